"""Approximation-error bounds and long-lag limits for idealized VAC.

Idealized VAC runs the eigensolver on oracle matrices ``C(0)``, ``C(tau)``,
so the only error left is the approximation error of the basis.  Every
quantity here is evaluated in the oracle's node space (see
:mod:`vacerr.oracles`).  Mode indices are 1-based.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .basis import Basis
from .exceptions import InvalidArgumentError, ResolutionError
from .geometry import SubspaceRep, inner, subspace_distances
from .oracles import SpectralReference, orthogonalized_projections
from .vac import CorrelationPair, VacSolution, solve_vac

__all__ = [
    "IdealVAC",
    "BoundReport",
    "LongLagLimits",
    "ErrorDecomposition",
    "rayleigh_ritz_eigenvalue_bound",
    "rayleigh_ritz_subspace_bound",
    "improved_subspace_bound",
    "long_lag_limits",
    "error_decomposition",
    "bound_sweep",
    "reports_to_csv",
]

ZERO_ERROR = 1e-12


@dataclass
class IdealVAC:
    """Idealized VAC solution with its node-space representation."""

    ref: SpectralReference
    basis: Basis
    tau: float
    values: np.ndarray
    propagated: np.ndarray
    pair: CorrelationPair
    solution: VacSolution

    @classmethod
    def compute(cls, ref, basis, tau, rank_tol=1e-10):
        if tau < 0:
            raise InvalidArgumentError(f"tau must be nonnegative, got {tau}")
        b = ref.basis_values(basis)
        tb = ref.transition(basis, tau)
        w = ref.weights
        c0 = inner(w, b, b)
        ct = inner(w, b, tb)
        pair = CorrelationPair(0.5 * (c0 + c0.T), 0.5 * (ct + ct.T), tau,
                               meta=ref.transition_meta(tau))
        return cls(ref, basis, tau, b, tb, pair, solve_vac(pair, rank_tol))

    @property
    def eigenvalues(self):
        return self.solution.eigenvalues

    def eigenvalue(self, i):
        """``lambda_i``, with ``lambda_{n+1} = -inf`` past the retained modes."""
        return self.eigenvalues[i - 1] if i <= self.solution.retained else -np.inf

    @property
    def phi(self) -> SubspaceRep:
        return SubspaceRep(self.values, self.ref.weights)

    def gamma(self, j, k) -> SubspaceRep:
        if k > self.solution.retained:
            raise InvalidArgumentError(f"only {self.solution.retained} VAC modes retained")
        return SubspaceRep(self.values @ self.solution.coeffs[:, j - 1:k], self.ref.weights)

    def transition_leak(self) -> float:
        """``||P_{Phi^perp} T_tau P_Phi||_2``."""
        w = self.ref.weights
        c0 = self.pair.c0
        evals, evecs = np.linalg.eigh(c0)
        keep = evals > 1e-12 * evals[-1]
        whiten = evecs[:, keep] / np.sqrt(evals[keep])
        t_on = self.propagated @ whiten
        resid = t_on - self.values @ np.linalg.lstsq(c0, inner(w, self.values, t_on), rcond=None)[0]
        m = inner(w, resid, resid)
        return float(np.sqrt(max(0.0, np.linalg.eigvalsh(0.5 * (m + m.T))[-1])))


@dataclass
class BoundReport:
    """One evaluation of a two-sided bound ``lower <= lhs <= upper``."""

    bound: str
    tau: float
    k: int
    lhs: float
    lower: float
    upper: float
    tol: float = 1e-8
    j: int = 1
    applicable: bool = True
    flags: list = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return bool(self.lower - self.tol <= self.lhs <= self.upper + self.tol)

    @property
    def slack(self) -> float:
        return float(min(self.lhs - self.lower, self.upper - self.lhs))


def _check_modes(ref, ideal, k, extra=0):
    if k < 1:
        raise InvalidArgumentError(f"k must be positive, got {k}")
    if k + extra > ref.num_modes:
        raise ResolutionError(f"reference resolves {ref.num_modes} modes, needs {k + extra}")
    if k > ideal.solution.retained:
        raise InvalidArgumentError(f"k={k} exceeds the {ideal.solution.retained} retained VAC modes")


def _ideal(ref, basis, tau, ideal):
    return ideal if ideal is not None else IdealVAC.compute(ref, basis, tau)


def rayleigh_ritz_eigenvalue_bound(ref, basis, tau, k, tol=1e-8, ideal=None) -> BoundReport:
    """``1 - d2^2(span eta_{1..k}, Phi) <= lambda_k / exp(-sigma_k tau) <= 1``."""
    iv = _ideal(ref, basis, tau, ideal)
    _check_modes(ref, iv, k)
    ratio = iv.eigenvalue(k) / np.exp(-ref.sigmas[k - 1] * tau)
    d2, _ = subspace_distances(ref.eta_rep(1, k), iv.phi)
    return BoundReport("rayleigh-ritz-eigenvalue", tau, k, float(ratio), 1.0 - d2**2, 1.0, tol)


def _subspace_ratio(ref, iv, k):
    _, err = subspace_distances(iv.gamma(1, k), ref.eta_rep(1, k))
    _, best = subspace_distances(ref.eta_rep(1, k), iv.phi)
    if best < ZERO_ERROR:
        return 1.0, ["zero-error"]
    return (err / best) ** 2, []


def rayleigh_ritz_subspace_bound(ref, basis, tau, k, tol=1e-8, ideal=None) -> BoundReport:
    """``1 <= dF^2(Gamma, H) / dF^2(H, Phi) <= 1 + ||P_{Phi^perp} T P_Phi||^2 / (e^{-sigma_k tau} - lambda_{k+1})^2``.

    ``H = span eta_{1..k}`` and ``Gamma`` is the span of the top ``k``
    idealized VAC eigenfunctions.  When the gap in the denominator is not
    positive the upper bound is infinite and the report is marked not
    applicable.
    """
    iv = _ideal(ref, basis, tau, ideal)
    _check_modes(ref, iv, k)
    lhs, flags = _subspace_ratio(ref, iv, k)
    gap = np.exp(-ref.sigmas[k - 1] * tau) - iv.eigenvalue(k + 1)
    if gap <= 0:
        return BoundReport("rayleigh-ritz-subspace", tau, k, lhs, 1.0, np.inf, tol,
                           applicable=False, flags=flags + ["not-applicable"])
    upper = 1.0 + (iv.transition_leak() / gap) ** 2
    return BoundReport("rayleigh-ritz-subspace", tau, k, lhs, 1.0, float(upper), tol, flags=flags)


def improved_subspace_bound(ref, basis, tau, k, tol=1e-8, ideal=None) -> BoundReport:
    """``1 <= dF^2(Gamma, H) / dF^2(H, Phi) <= 1 + |e^{-sigma_{k+1} tau} / (lambda_k - e^{-sigma_{k+1} tau})|^2 / 4``.

    Applicable only while ``lambda_k > exp(-sigma_{k+1} tau)``.
    """
    iv = _ideal(ref, basis, tau, ideal)
    _check_modes(ref, iv, k, extra=1)
    lhs, flags = _subspace_ratio(ref, iv, k)
    nxt = np.exp(-ref.sigmas[k] * tau)
    gap = iv.eigenvalue(k) - nxt
    if gap <= 0:
        return BoundReport("improved-subspace", tau, k, lhs, 1.0, np.inf, tol,
                           applicable=False, flags=flags + ["not-applicable"])
    return BoundReport("improved-subspace", tau, k, lhs, 1.0, float(1.0 + 0.25 * (nxt / gap) ** 2),
                       tol, flags=flags)


def _isolated(sigmas, idx, min_rel_gap):
    """Whether ``sigmas[idx]`` (0-based) is separated from all others by a relative gap."""
    s = sigmas[idx]
    others = np.delete(sigmas, idx)
    scale = max(abs(s), np.max(np.abs(sigmas)) * 1e-12, 1e-300)
    return bool(np.all(np.abs(others - s) >= min_rel_gap * scale))


def _block_isolated(sigmas, j, k, min_rel_gap, tail=None):
    lo = sigmas[j - 2] if j >= 2 else -np.inf
    hi = sigmas[k] if k < sigmas.size else tail
    scale = max(abs(sigmas[k - 1]), 1.0)
    ok_lo = sigmas[j - 1] - lo >= min_rel_gap * scale
    ok_hi = hi is None or hi - sigmas[k - 1] >= min_rel_gap * scale
    return bool(ok_lo and ok_hi)


@dataclass
class LongLagLimits:
    """Idealized VAC quantities over a lag-time grid and their ``tau -> inf`` targets.

    ``eig_ratio[t] = lambda_k e^{sigma_k tau}`` approaches ``eig_target``;
    ``subspace_gap[t] = dF(span gamma_{j..k}, span q_{j..k})`` approaches 0;
    ``scaled_gap[t] = dF(span gamma_{1..k}, span q_{1..k}) lambda_k / lambda_{k+1}``
    approaches ``scaled_target``.
    """

    taus: np.ndarray
    k: int
    j: int
    eig_ratio: np.ndarray
    eig_target: float
    subspace_gap: np.ndarray
    scaled_gap: np.ndarray
    scaled_target: float
    applicable: dict
    converged: dict


def _verdict(values, target=None, rtol=1e-3):
    if values.size < 2 or not np.all(np.isfinite(values[-2:])):
        return False
    if target == 0.0:
        return bool(abs(values[-1] - values[-2]) < rtol)
    return bool(abs(values[-1] - values[-2]) < rtol * max(abs(values[-1]), 1e-300))


def long_lag_limits(ref, basis, k, tau_grid, j=1, min_rel_gap=0.05) -> LongLagLimits:
    """Evaluate the three ``tau -> infinity`` limits of idealized VAC over ``tau_grid``."""
    taus = np.asarray(tau_grid, dtype=np.float64)
    if taus.size == 0:
        raise InvalidArgumentError("tau grid is empty")
    if not 1 <= j <= k or k + 1 > ref.num_modes:
        raise ResolutionError(f"need 1 <= j <= k and k + 1 <= {ref.num_modes}")
    sig = ref.sigmas
    qs = orthogonalized_projections(ref, basis, k + 1)
    eig_target = float(qs.overlaps[k - 1, k - 1] ** 2)
    denom = qs.overlaps[k, k]
    applicable = {
        "eigenvalue": _isolated(sig, k - 1, min_rel_gap),
        "subspace": _block_isolated(sig, j, k, min_rel_gap, ref.sigma_tail),
        "scaled": (_isolated(sig, k - 1, min_rel_gap) and _isolated(sig, k, min_rel_gap)
                   and bool(abs(denom) > 1e-12)),
    }
    scaled_target = float(abs(qs.overlaps[k, k - 1] / denom)) if abs(denom) > 1e-12 else np.nan
    eig_ratio, sub_gap, scaled = [], [], []
    for tau in taus:
        iv = IdealVAC.compute(ref, basis, tau)
        if k + 1 > iv.solution.retained:
            raise InvalidArgumentError("basis must retain at least k + 1 VAC modes")
        eig_ratio.append(iv.eigenvalue(k) * np.exp(sig[k - 1] * tau))
        sub_gap.append(subspace_distances(iv.gamma(j, k), qs.rep(j, k))[1])
        d_top = subspace_distances(iv.gamma(1, k), qs.rep(1, k))[1]
        scaled.append(d_top * iv.eigenvalue(k) / iv.eigenvalue(k + 1))
    eig_ratio, sub_gap, scaled = map(np.asarray, (eig_ratio, sub_gap, scaled))
    converged = {
        "eigenvalue": _verdict(eig_ratio),
        "subspace": _verdict(sub_gap, 0.0),
        "scaled": _verdict(scaled),
    }
    return LongLagLimits(taus, k, j, eig_ratio, eig_target, sub_gap, scaled, scaled_target,
                         applicable, converged)


@dataclass
class ErrorDecomposition:
    """Split of the approximation error of ``span gamma_{j..k}``.

    ``total <= lag_independent + lag_dependent`` is the triangle inequality
    through ``span q_{j..k}``; ``lag_independent <= rhs_bound`` and
    ``1 <= proj_ratio <= proj_upper`` are the two bounds on the
    lag-independent part.
    """

    tau: float
    j: int
    k: int
    lag_independent: float
    lag_dependent: float
    total: float
    rhs_bound: float
    proj_ratio: float
    proj_upper: float
    applicable: bool = True
    tol: float = 1e-10

    @property
    def triangle_ok(self) -> bool:
        return self.total <= self.lag_independent + self.lag_dependent + self.tol

    @property
    def rhs_ok(self) -> bool:
        return self.lag_independent <= self.rhs_bound + self.tol

    @property
    def proj_ok(self) -> bool:
        return 1.0 - self.tol <= self.proj_ratio <= self.proj_upper + self.tol

    @property
    def satisfied(self) -> bool:
        return self.triangle_ok and self.rhs_ok and self.proj_ok

    def as_tuple(self):
        return self.lag_independent, self.lag_dependent, self.total, self.rhs_bound


def error_decomposition(ref, basis, tau, j, k, min_rel_gap=0.05, ideal=None) -> ErrorDecomposition:
    """Lag-time-independent and lag-time-dependent parts of the approximation error."""
    if not 1 <= j <= k:
        raise InvalidArgumentError(f"need 1 <= j <= k, got j={j}, k={k}")
    iv = _ideal(ref, basis, tau, ideal)
    _check_modes(ref, iv, k)
    applicable = _block_isolated(ref.sigmas, j, k, min_rel_gap, ref.sigma_tail)
    qs = orthogonalized_projections(ref, basis, k)
    q_rep, eta_rep, gam = qs.rep(j, k), ref.eta_rep(j, k), iv.gamma(j, k)
    lag_indep = subspace_distances(q_rep, eta_rep)[1]
    lag_dep = subspace_distances(gam, q_rep)[1]
    total = subspace_distances(gam, eta_rep)[1]
    prefix = subspace_distances(ref.eta_rep(1, j - 1), iv.phi)
    top = subspace_distances(ref.eta_rep(1, k), iv.phi)[1]
    rhs = float(np.sqrt(prefix[1] ** 2 + top**2))
    best = subspace_distances(eta_rep, iv.phi)[1]
    ratio = 1.0 if best < ZERO_ERROR else (lag_indep / best) ** 2
    upper = np.inf if prefix[0] >= 1 else 1.0 / (1.0 - prefix[0] ** 2)
    return ErrorDecomposition(tau, j, k, lag_indep, lag_dep, total, rhs, float(ratio),
                              float(upper), applicable)


BOUNDS = {
    "rayleigh-ritz-eigenvalue": rayleigh_ritz_eigenvalue_bound,
    "rayleigh-ritz-subspace": rayleigh_ritz_subspace_bound,
    "improved-subspace": improved_subspace_bound,
}


def bound_sweep(ref, basis, taus, ks, bounds=tuple(BOUNDS)) -> list[BoundReport]:
    """Evaluate the selected bounds for every ``(tau, k)``; one eigensolve per lag time."""
    taus = list(taus)
    if not taus:
        raise InvalidArgumentError("tau grid is empty")
    reports = []
    for tau in taus:
        iv = IdealVAC.compute(ref, basis, tau)
        for k in ks:
            for name in bounds:
                reports.append(BOUNDS[name](ref, basis, tau, k, ideal=iv))
    return reports


def _fmt(x):
    return repr(float(x))


def reports_to_csv(reports, handle=None) -> str:
    """CSV with columns ``bound, tau, k, lhs, lower, upper, satisfied, slack``."""
    buf = handle if handle is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bound", "tau", "k", "lhs", "lower", "upper", "satisfied", "slack"])
    for r in reports:
        writer.writerow([r.bound, _fmt(r.tau), r.k, _fmt(r.lhs), _fmt(r.lower), _fmt(r.upper),
                         int(r.satisfied), _fmt(r.slack)])
    return buf.getvalue() if handle is None else ""
