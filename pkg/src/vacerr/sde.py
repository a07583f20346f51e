"""Stationary trajectories of the Ornstein-Uhlenbeck and double-well processes.

All randomness flows through :class:`numpy.random.Generator` objects built on
the PCG64 bit generator.  Independent trial streams are derived from a root
seed with :func:`trial_rng`, which hashes ``(seed, trial)`` through
:class:`numpy.random.SeedSequence`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .exceptions import InvalidArgumentError

__all__ = [
    "RNG_ALGORITHM",
    "Trajectory",
    "DoubleWellSpec",
    "trial_rng",
    "simulate_ou",
    "simulate_double_well",
    "write_trajectory",
    "read_trajectory",
]

RNG_ALGORITHM = "PCG64 (numpy.random.SeedSequence entropy=[seed, trial])"


def trial_rng(seed: int, trial: int | None = None) -> np.random.Generator:
    """Return an independent PCG64 generator for ``(seed, trial)``."""
    entropy = [int(seed)] if trial is None else [int(seed), int(trial)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled states of a Markov process.

    Parameters
    ----------
    states : (n_samples, dim) array_like
        One state per row.  A 1-D input is treated as a scalar process.
    delta : float
        Sampling interval in time units.
    """

    states: np.ndarray
    delta: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        states = np.array(self.states, dtype=np.float64)
        if states.ndim == 1:
            states = states[:, None]
        if states.ndim != 2 or states.shape[0] == 0:
            raise InvalidArgumentError("trajectory must contain at least one state")
        if not np.isfinite(self.delta) or self.delta <= 0:
            raise InvalidArgumentError(f"delta must be positive, got {self.delta}")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def n_samples(self) -> int:
        return self.states.shape[0]

    @property
    def duration(self) -> float:
        """Elapsed time between first and last sample, ``(n_samples - 1) * delta``."""
        return (self.n_samples - 1) * self.delta

    def __len__(self):
        return self.n_samples

    def lag_steps(self, t: float) -> int:
        """Convert a lag time to a whole number of sampling steps."""
        return lag_to_steps(t, self.delta)


def lag_to_steps(t: float, delta: float) -> int:
    if t < 0:
        raise InvalidArgumentError(f"lag time must be nonnegative, got {t}")
    steps = t / delta
    rounded = int(round(steps))
    if abs(steps - rounded) > 1e-8 * max(1.0, steps):
        raise InvalidArgumentError(
            f"lag time {t} is not a multiple of the sampling interval {delta}"
        )
    return rounded


def _sample_count(duration: float, delta: float) -> int:
    if not (delta > 0) or not (duration > 0):
        raise InvalidArgumentError("duration and delta must be positive")
    if duration < delta * (1 - 1e-12):
        raise InvalidArgumentError("duration must be at least one sampling interval")
    return int(np.floor(duration / delta + 1e-9)) + 1


def simulate_ou(duration: float, delta: float, seed: int = 0, trial: int | None = None) -> Trajectory:
    """Exact simulation of ``dX = -X dt + sqrt(2) dW`` from stationarity.

    Uses the AR(1) recursion ``X[t+delta] = exp(-delta) X[t] + xi`` with
    ``xi ~ N(0, 1 - exp(-2 delta))`` and ``X[0] ~ N(0, 1)``.
    """
    n = _sample_count(duration, delta)
    rng = trial_rng(seed, trial)
    a = np.exp(-delta)
    noise = rng.standard_normal(n)
    noise[1:] *= np.sqrt(-np.expm1(-2.0 * delta))
    x = np.empty(n)
    x[0] = noise[0]
    _ar1(x, noise, a)
    return Trajectory(x, delta, meta={"process": "ou", "seed": seed, "trial": trial,
                                       "rng": RNG_ALGORITHM})


@numba.njit(cache=True)
def _ar1(x, noise, a):
    for i in range(1, x.shape[0]):
        x[i] = a * x[i - 1] + noise[i]


@dataclass(frozen=True)
class DoubleWellSpec:
    """Parameters of ``dX = -1/2 sigma sigma^T grad U dt + sigma dW``.

    The potential is ``U = a4 x1^4 + a2 x1^2 + a1 x1 + b2 x2^2``, by default
    ``4 x1^4 - 8 x1^2 + x1 + 0.5 x2^2``.
    """

    a4: float = 4.0
    a2: float = -8.0
    a1: float = 1.0
    b2: float = 0.5
    sigma: tuple = ((2.0, 0.0), (-1.0, np.sqrt(3.0)))
    dt: float = 1e-4
    burn_in: float = 10.0
    x0: tuple = (1.0, 0.0)

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if sigma.shape != (2, 2):
            raise InvalidArgumentError("sigma must be a 2x2 matrix")
        if not self.dt > 0:
            raise InvalidArgumentError("integration timestep must be positive")
        if self.burn_in < 0:
            raise InvalidArgumentError("burn-in must be nonnegative")
        object.__setattr__(self, "sigma", tuple(map(tuple, sigma.tolist())))

    @property
    def sigma_matrix(self) -> np.ndarray:
        return np.array(self.sigma)

    @property
    def diffusion(self) -> np.ndarray:
        """``D = 1/2 sigma sigma^T``; the generator is ``D:Hess - (D grad U).grad``."""
        s = self.sigma_matrix
        return 0.5 * s @ s.T

    def potential(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        x1, x2 = x[..., 0], x[..., 1]
        return self.a4 * x1**4 + self.a2 * x1**2 + self.a1 * x1 + self.b2 * x2**2

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([4 * self.a4 * x1**3 + 2 * self.a2 * x1 + self.a1,
                         2 * self.b2 * x2], axis=-1)


@numba.njit(cache=True)
def _baoab_limit(x, r_prev, noise, out, stride, dt, a4, a2, a1, b2, m, s, sqdt):
    """Advance the Leimkuhler-Matthews limit scheme over one block of noise.

    ``m`` is the drift matrix 1/2 sigma sigma^T and ``s`` is sigma.  Every
    ``stride`` steps the state is written to ``out``; returns the number of
    samples written.
    """
    n_written = 0
    x1 = x[0]
    x2 = x[1]
    p0 = r_prev[0]
    p1 = r_prev[1]
    for i in range(noise.shape[0]):
        g1 = 4.0 * a4 * x1 ** 3 + 2.0 * a2 * x1 + a1
        g2 = 2.0 * b2 * x2
        q0 = noise[i, 0]
        q1 = noise[i, 1]
        h0 = 0.5 * (p0 + q0) * sqdt
        h1 = 0.5 * (p1 + q1) * sqdt
        nx1 = x1 - dt * (m[0, 0] * g1 + m[0, 1] * g2) + s[0, 0] * h0 + s[0, 1] * h1
        nx2 = x2 - dt * (m[1, 0] * g1 + m[1, 1] * g2) + s[1, 0] * h0 + s[1, 1] * h1
        x1 = nx1
        x2 = nx2
        p0 = q0
        p1 = q1
        if (i + 1) % stride == 0:
            out[n_written, 0] = x1
            out[n_written, 1] = x2
            n_written += 1
    x[0] = x1
    x[1] = x2
    r_prev[0] = p0
    r_prev[1] = p1
    return n_written


def simulate_double_well(spec: DoubleWellSpec, duration: float, delta: float,
                         seed: int = 0, trial: int | None = None,
                         block_steps: int = 1 << 20) -> Trajectory:
    """Simulate the double-well diffusion with the BAOAB-limit integrator.

    The integrator runs at ``spec.dt`` from ``spec.x0``; the first
    ``spec.burn_in`` time units are discarded and the remainder is subsampled
    every ``delta`` time units.  The returned trajectory spans ``duration``.
    """
    stride = int(round(delta / spec.dt))
    if stride < 1 or abs(stride * spec.dt - delta) > 1e-9 * delta:
        raise InvalidArgumentError(
            f"delta={delta} is not an integer multiple of the timestep {spec.dt}")
    n = _sample_count(duration, delta)
    burn_steps = int(round(spec.burn_in / spec.dt))
    # the first retained sample sits exactly at the end of burn-in
    total_steps = burn_steps + (n - 1) * stride

    rng = trial_rng(seed, trial)
    m = np.ascontiguousarray(spec.diffusion)
    s = np.ascontiguousarray(spec.sigma_matrix)
    x = np.array(spec.x0, dtype=np.float64)
    r_prev = rng.standard_normal(2)
    sqdt = np.sqrt(spec.dt)

    burn_out = np.empty((0, 2))
    done = 0
    while done < burn_steps:
        size = min(block_steps, burn_steps - done)
        _baoab_limit(x, r_prev, rng.standard_normal((size, 2)), burn_out, size + 1,
                     spec.dt, spec.a4, spec.a2, spec.a1, spec.b2, m, s, sqdt)
        done += size

    states = np.empty((n, 2))
    states[0] = x
    written = 1
    remaining = total_steps - burn_steps
    block = max(stride, (block_steps // stride) * stride)
    while remaining > 0:
        size = min(block, remaining)
        written += _baoab_limit(x, r_prev, rng.standard_normal((size, 2)), states[written:],
                                stride, spec.dt, spec.a4, spec.a2, spec.a1, spec.b2,
                                m, s, sqdt)
        remaining -= size
    return Trajectory(states, delta, meta={"process": "double-well", "seed": seed,
                                           "trial": trial, "rng": RNG_ALGORITHM})


def write_trajectory(traj: Trajectory, path) -> None:
    """Write a trajectory as CSV (``.csv``/``.txt``) or NumPy binary (``.npz``)."""
    path = Path(path)
    if path.suffix == ".npz":
        np.savez(path, states=traj.states, delta=traj.delta)
        return
    header = f"dim={traj.dim} delta={traj.delta!r}"
    np.savetxt(path, traj.states, delimiter=",", header=header, comments="# ", fmt="%.17g")


def read_trajectory(path) -> Trajectory:
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as data:
            return Trajectory(data["states"], float(data["delta"]))
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("#"):
        raise InvalidArgumentError(f"{path}: missing '# dim=<d> delta=<delta>' header")
    fields = dict(tok.split("=", 1) for tok in first[1:].split() if "=" in tok)
    try:
        dim = int(fields["dim"])
        delta = float(fields["delta"])
    except (KeyError, ValueError) as exc:
        raise InvalidArgumentError(f"{path}: malformed header {first.strip()!r}") from exc
    states = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if states.shape[1] != dim:
        raise InvalidArgumentError(f"{path}: header says dim={dim}, rows have {states.shape[1]}")
    return Trajectory(states, delta)
