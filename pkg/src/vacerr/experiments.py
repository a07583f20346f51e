"""Reproducible experiment runs: configuration, presets, and on-disk result bundles.

A run directory holds CSV tables plus ``manifest.json``.  CSV bodies are a
pure function of the configuration; the only timestamp lives in the
manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import re
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .basis import basis_from_dict
from .bounds import IdealVAC, bound_sweep, reports_to_csv
from .diagnostics import condition_number, estimate_mse, min_condition_number
from .exceptions import ConfigError, InsufficientDataError, VacError
from .geometry import SubspaceRep, subspace_distances
from .oracles import double_well_grid_reference, ou_reference
from .sde import RNG_ALGORITHM, DoubleWellSpec, simulate_double_well, simulate_ou
from .vac import EmptyCellWarning, estimate_pair, implied_timescales, solve_vac

__all__ = [
    "ExperimentConfig",
    "PRESETS",
    "preset",
    "load_config",
    "build_reference",
    "run_experiment",
    "run_bounds",
]


def _lag_grid(step=0.05, stop=1.5):
    return [round(step * m, 10) for m in range(1, int(round(stop / step)) + 1)]


_FIELDS = {"name", "process", "basis", "taus", "durations", "delta", "trials", "seed", "blocks",
           "oracle", "mse_taus", "output", "workers", "timescales"}


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one run.

    ``process`` is ``{"kind": "ou"}`` or ``{"kind": "double-well", ...}`` with
    optional :class:`DoubleWellSpec` overrides; ``basis`` is a basis
    descriptor (see :func:`vacerr.basis.basis_from_dict`); ``oracle`` is
    ``{"kind": "ou-quadrature"}``, ``{"kind": "grid", "eps": ...}`` or None.
    ``mse_taus`` restricts the data-driven MSE to a subset of lag times
    (None means every lag time, ``[]`` disables it).
    """

    name: str
    process: dict
    basis: dict
    taus: list
    durations: list
    delta: float
    trials: int = 1
    seed: int = 0
    blocks: list = field(default_factory=lambda: [[1, 3]])
    oracle: dict | None = None
    mse_taus: list | None = None
    output: str | None = None
    workers: int = 1
    timescales: list = field(default_factory=lambda: [2, 3])

    def to_dict(self) -> dict:
        return asdict(self)

    def canonical_json(self) -> str:
        d = self.to_dict()
        d.pop("output")
        d.pop("workers")
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def validate(self, text: str | None = None) -> "ExperimentConfig":
        def fail(key, msg):
            raise ConfigError(f"{key}: {msg}", _key_line(text, key))

        if self.process.get("kind") not in ("ou", "double-well"):
            fail("process", f"unknown process kind {self.process.get('kind')!r}")
        if self.process["kind"] == "double-well":
            try:
                _dw_spec(self.process)
            except (TypeError, VacError) as exc:
                fail("process", str(exc))
        try:
            basis = basis_from_dict(self.basis)
            basis.n_functions
        except (VacError, KeyError, TypeError) as exc:
            fail("basis", str(exc))
        want_dim = 1 if self.process["kind"] == "ou" else 2
        if basis.dim != want_dim:
            fail("basis", f"basis acts on dimension {basis.dim}, process has dimension {want_dim}")
        if not isinstance(self.delta, (int, float)) or not self.delta > 0:
            fail("delta", "must be a positive number")
        if not self.taus:
            fail("taus", "tau grid is empty")
        for t in self.taus:
            if not isinstance(t, (int, float)) or t <= 0:
                fail("taus", f"lag time {t!r} must be positive")
            if abs(t / self.delta - round(t / self.delta)) > 1e-9:
                fail("taus", f"lag time {t} is not a multiple of delta={self.delta}")
        if not self.durations or any(not isinstance(T, (int, float)) or T <= max(self.taus)
                                     for T in self.durations):
            fail("durations", "need at least one trajectory length longer than every lag time")
        if not isinstance(self.trials, int) or self.trials < 1:
            fail("trials", "must be a positive integer")
        if not isinstance(self.seed, int) or self.seed < 0:
            fail("seed", "must be a nonnegative integer")
        if not isinstance(self.workers, int) or self.workers < 1:
            fail("workers", "must be a positive integer")
        if not self.blocks:
            fail("blocks", "need at least one (j, k) block")
        for b in self.blocks:
            if (not isinstance(b, (list, tuple)) or len(b) != 2
                    or not all(isinstance(x, int) for x in b) or not 1 <= b[0] <= b[1] <= basis.n_functions):
                fail("blocks", f"block {b!r} must satisfy 1 <= j <= k <= {basis.n_functions}")
        for i in self.timescales:
            if not isinstance(i, int) or not 1 <= i <= basis.n_functions:
                fail("timescales", f"mode {i!r} outside 1..{basis.n_functions}")
        if self.mse_taus is not None:
            missing = [t for t in self.mse_taus if not any(abs(t - s) < 1e-12 for s in self.taus)]
            if missing:
                fail("mse_taus", f"lag times {missing} are not on the tau grid")
        if self.oracle is not None:
            kind = self.oracle.get("kind")
            if kind not in ("ou-quadrature", "grid"):
                fail("oracle", f"unknown oracle kind {kind!r}")
            if (kind == "grid") != (self.process["kind"] == "double-well"):
                fail("oracle", f"oracle {kind!r} does not match process {self.process['kind']!r}")
        return self

    def make_basis(self):
        return basis_from_dict(self.basis)

    @classmethod
    def from_dict(cls, d: dict, text: str | None = None) -> "ExperimentConfig":
        unknown = set(d) - _FIELDS
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"unknown field {key!r}", _key_line(text, key))
        for key in ("name", "process", "basis", "taus", "durations", "delta"):
            if key not in d:
                raise ConfigError(f"missing required field {key!r}")
        return cls(**d).validate(text)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from None
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object", 1)
        return cls.from_dict(d, text)


def _key_line(text, key):
    if text is None:
        return None
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


PRESETS = {
    "ou-trial-1": dict(
        name="ou-trial-1", process={"kind": "ou"},
        basis={"kind": "indicator-1d", "n": 20, "offset": 0.1},
        taus=_lag_grid(), durations=[10000.0], delta=0.05, trials=30, seed=2020,
        blocks=[[1, 3]], oracle={"kind": "ou-quadrature"}),
    "ou-trial-2": dict(
        name="ou-trial-2", process={"kind": "ou"},
        basis={"kind": "indicator-1d", "n": 50, "offset": 0.1},
        taus=_lag_grid(), durations=[500.0], delta=0.05, trials=30, seed=2020,
        blocks=[[1, 3]], oracle={"kind": "ou-quadrature"}),
    "double-well": dict(
        name="double-well", process={"kind": "double-well"},
        basis={"kind": "polynomial-2d", "n": 6},
        taus=_lag_grid(), durations=[500.0], delta=0.01, trials=1, seed=2020,
        blocks=[[1, 2], [1, 3]], oracle={"kind": "grid", "eps": 0.04}),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ExperimentConfig.from_dict({**PRESETS[name], **overrides})


def load_config(name_or_path, **overrides) -> ExperimentConfig:
    """A preset name or the path of a JSON configuration file."""
    if str(name_or_path) in PRESETS:
        return preset(str(name_or_path), **overrides)
    path = Path(name_or_path)
    if not path.exists():
        raise ConfigError(f"{name_or_path!r} is neither a preset nor a file")
    text = path.read_text()
    cfg = ExperimentConfig.from_json(text)
    if overrides:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), **overrides})
    return cfg


def _dw_spec(process):
    kw = {k: v for k, v in process.items() if k != "kind"}
    if "sigma" in kw:
        kw["sigma"] = tuple(map(tuple, kw["sigma"]))
    if "x0" in kw:
        kw["x0"] = tuple(kw["x0"])
    return DoubleWellSpec(**kw)


def build_reference(cfg: ExperimentConfig, cache_dir=None, num_modes=6):
    """Oracle for the configured process, or None."""
    if cfg.oracle is None:
        return None
    if cfg.oracle["kind"] == "ou-quadrature":
        basis = cfg.make_basis()
        quad = basis if basis.kind == "indicator-1d" else None
        return ou_reference(num_modes, quadrature=quad)
    return double_well_grid_reference(_dw_spec(cfg.process), eps=cfg.oracle.get("eps", 0.04),
                                      num_modes=num_modes, literal=cfg.oracle.get("literal", False),
                                      cache_dir=cache_dir)


def _simulate(cfg, duration, trial):
    if cfg.process["kind"] == "ou":
        return simulate_ou(duration, cfg.delta, seed=cfg.seed, trial=trial)
    return simulate_double_well(_dw_spec(cfg.process), duration, cfg.delta, seed=cfg.seed, trial=trial)


def _fmt(x) -> str:
    return repr(float(x))


def _ideal_sweep(cfg, ref, basis):
    """Idealized VAC solution and node values per lag time."""
    if ref is None:
        return None
    pairs = ref.ideal_pairs(basis, cfg.taus)
    return [solve_vac(p) for p in pairs], ref.basis_values(basis)


def _trial_rows(cfg, duration, trial, ref, ideal):
    basis = cfg.make_basis()
    traj = _simulate(cfg, duration, trial)
    mse_taus = cfg.taus if cfg.mse_taus is None else cfg.mse_taus
    rows, ts_rows = [], []
    for a, tau in enumerate(cfg.taus):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptyCellWarning)
            sol = solve_vac(estimate_pair(traj, basis, tau))
        mse = None
        if any(abs(tau - t) < 1e-12 for t in mse_taus):
            try:
                mse = estimate_mse(traj, sol, basis, blocks=cfg.blocks)
            except InsufficientDataError:
                mse = None
        its = implied_timescales(sol)
        for i in cfg.timescales:
            eig = sol.eigenvalues[i - 1] if i <= sol.retained else np.nan
            rms = mse.eig_rms.get(i, np.nan) if mse is not None else np.nan
            ts_rows.append((duration, trial, tau, i, eig, its[i - 1] if i <= its.size else np.nan, rms))
        for j, k in cfg.blocks:
            true_err = est_err = np.nan
            if ideal is not None and k <= sol.retained:
                sols, values = ideal
                w = ref.weights
                gam = SubspaceRep(values @ sol.coeffs[:, j - 1:k], w)
                true_err = subspace_distances(gam, ref.eta_rep(j, k))[1]
                est_err = subspace_distances(gam, SubspaceRep(values @ sols[a].coeffs[:, j - 1:k], w))[1]
            calc = mse.subspace_rms.get((j, k), np.nan) if mse is not None else np.nan
            cond = condition_number(sol.eigenvalues, j, k) if k <= sol.retained else np.nan
            rows.append((duration, trial, tau, f"{j}..{k}", true_err, est_err, calc, cond))
    return rows, ts_rows


def _run_trial(args):
    return _trial_rows(*args)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) if isinstance(x, (float, np.floating)) else x for x in r])


def _mean_sd(x):
    x = np.asarray(x, dtype=np.float64)
    x = x[np.isfinite(x)]
    if x.size == 0:
        return np.nan, np.nan
    return float(x.mean()), float(x.std(ddof=1)) if x.size > 1 else 0.0


@dataclass
class ExperimentResult:
    """In-memory view of a run; the same tables are written to ``directory``."""

    config: ExperimentConfig
    directory: Path | None
    trials: list
    timescales: list
    summary: list
    optimal: dict
    conditions: list


def run_experiment(cfg: ExperimentConfig, output=None, cache_dir=None) -> ExperimentResult:
    """Simulate every trial, run VAC over the lag-time grid, and aggregate.

    Tables written to the run directory:

    ``trials.csv``
        ``T, trial, tau, block, true_error, estimation_error, calculated_rms, condition``
    ``timescales.csv``
        ``T, trial, tau, mode, eigenvalue, timescale, eigenvalue_rms``
    ``summary.csv``
        ``T, tau, block`` then mean and SD of each trial column plus the RMS
        of the true error
    ``conditions.csv``
        minimum condition number per block, from sampled eigenvalues (per
        trial) and from the oracle's idealized eigenvalues
    ``optimal.json``
        lag time minimizing the mean true error per ``(T, block)``
    """
    output = output or cfg.output
    ref = build_reference(cfg, cache_dir=cache_dir)
    basis = cfg.make_basis()
    ideal = _ideal_sweep(cfg, ref, basis)
    jobs = [(cfg, T, trial, ref, ideal) for T in cfg.durations for trial in range(cfg.trials)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_trial, jobs))
    else:
        results = [_run_trial(j) for j in jobs]
    trial_rows = [r for rows, _ in results for r in rows]
    ts_rows = [r for _, rows in results for r in rows]

    summary, optimal = [], {}
    for T in cfg.durations:
        for j, k in cfg.blocks:
            label = f"{j}..{k}"
            means = []
            for tau in cfg.taus:
                sel = [r for r in trial_rows if r[0] == T and r[2] == tau and r[3] == label]
                cols = [[r[c] for r in sel] for c in (4, 5, 6, 7)]
                stats = [_mean_sd(c) for c in cols]
                true = np.asarray(cols[0], dtype=np.float64)
                rms = float(np.sqrt(np.mean(true**2))) if np.all(np.isfinite(true)) else np.nan
                summary.append((T, tau, label, *[v for s in stats for v in s], rms))
                means.append(stats[0][0])
            if np.any(np.isfinite(means)):
                best = int(np.nanargmin(means))
                optimal[f"T={T:g} block={label}"] = {"tau": cfg.taus[best], "mean_true_error": means[best]}

    conditions = []
    for j, k in cfg.blocks:
        label = f"{j}..{k}"
        for T in cfg.durations:
            for trial in range(cfg.trials):
                sel = [(r[2], r[7]) for r in trial_rows if r[0] == T and r[1] == trial and r[3] == label]
                tau, val = sel[int(np.argmin([v for _, v in sel]))]
                conditions.append(("sampled", T, trial, label, tau, val))
        if ideal is not None:
            tau, val = min_condition_number(ideal[0], j, k)
            conditions.append(("ideal", "", "", label, tau, val))

    result = ExperimentResult(cfg, None, trial_rows, ts_rows, summary, optimal, conditions)
    if output is not None:
        out = Path(output)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "trials.csv", ["T", "trial", "tau", "block", "true_error", "estimation_error",
                                        "calculated_rms", "condition"], trial_rows)
        _write_csv(out / "timescales.csv", ["T", "trial", "tau", "mode", "eigenvalue", "timescale",
                                            "eigenvalue_rms"], ts_rows)
        stat_cols = [f"{c}_{s}" for c in ("true_error", "estimation_error", "calculated_rms", "condition")
                     for s in ("mean", "sd")]
        _write_csv(out / "summary.csv", ["T", "tau", "block", *stat_cols, "true_error_rms"], summary)
        _write_csv(out / "conditions.csv", ["source", "T", "trial", "block", "tau", "min_condition"],
                   conditions)
        (out / "optimal.json").write_text(json.dumps(optimal, indent=2, sort_keys=True) + "\n")
        write_manifest(out, cfg, ref, ["trials.csv", "timescales.csv", "summary.csv", "conditions.csv",
                                       "optimal.json"])
        result.directory = out
    return result


def run_bounds(cfg: ExperimentConfig, output=None, cache_dir=None, ks=None):
    """Bound reports over the lag-time grid plus the error-scale curves.

    ``bounds.csv`` follows the schema of :func:`vacerr.bounds.reports_to_csv`.
    ``curves.csv`` converts each bound to the error scale:
    ``tau, k, measured_error, best_error, rayleigh_ritz_bound, improved_bound``,
    where a bound ``B`` on the squared ratio becomes ``sqrt(B) * best_error``.
    """
    ref = build_reference(cfg, cache_dir=cache_dir)
    if ref is None:
        raise ConfigError("bounds need an oracle")
    basis = cfg.make_basis()
    ks = list(range(1, max(k for _, k in cfg.blocks) + 1)) if ks is None else list(ks)
    reports = bound_sweep(ref, basis, cfg.taus, ks)
    curves = []
    for tau in cfg.taus:
        iv = IdealVAC.compute(ref, basis, tau)
        for k in ks:
            best = subspace_distances(ref.eta_rep(1, k), iv.phi)[1]
            measured = subspace_distances(iv.gamma(1, k), ref.eta_rep(1, k))[1]
            by = {r.bound: r for r in reports if r.tau == tau and r.k == k}
            curves.append((tau, k, measured, best,
                           np.sqrt(by["rayleigh-ritz-subspace"].upper) * best,
                           np.sqrt(by["improved-subspace"].upper) * best))
    output = output or cfg.output
    if output is not None:
        out = Path(output)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "bounds.csv", "w", newline="") as fh:
            reports_to_csv(reports, fh)
        _write_csv(out / "curves.csv", ["tau", "k", "measured_error", "best_error",
                                        "rayleigh_ritz_bound", "improved_bound"], curves)
        write_manifest(out, cfg, ref, ["bounds.csv", "curves.csv"])
    return reports, curves


def write_manifest(out: Path, cfg: ExperimentConfig, ref, files):
    import scipy
    import sklearn

    manifest = {
        "config": json.loads(cfg.canonical_json()),
        "config_hash": cfg.config_hash,
        "rng": RNG_ALGORITHM,
        "versions": {"vacerr": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__, "scikit-learn": sklearn.__version__},
        "oracle_cache_keys": [ref.meta["cache_key"]] if ref is not None and "cache_key" in ref.meta else [],
        "files": files,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
