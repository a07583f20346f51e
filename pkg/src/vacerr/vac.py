"""Linear VAC: correlation matrices and the generalized eigenproblem.

Mode indices in this module's public functions are 1-based, so the trivial
eigenfunction is mode 1, as in the usual numbering of transition-operator
eigenpairs.  Array axes are of course 0-based.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .basis import Basis
from .exceptions import (DegenerateSubspaceError, InvalidArgumentError,
                         SingularMassMatrixError)
from .sde import Trajectory, lag_to_steps

__all__ = [
    "CorrelationPair",
    "VacSolution",
    "EmptyCellWarning",
    "lagged_correlation",
    "estimate_correlation",
    "estimate_pair",
    "solve_vac",
    "eigenfunction_series",
    "implied_timescales",
    "VAC",
]


class EmptyCellWarning(UserWarning):
    """A basis function never fires on the data and was dropped from the solve."""


def _sym(a):
    return 0.5 * (a + a.T)


def _matrix_to_json(a):
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": a.ravel(order="C").tolist()}


def _matrix_from_json(d):
    return np.asarray(d["data"], dtype=np.float64).reshape(d["shape"])


@dataclass(frozen=True)
class CorrelationPair:
    """Instantaneous and lagged correlation matrices ``C(0)``, ``C(tau)``."""

    c0: np.ndarray
    ctau: np.ndarray
    tau: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c0 = np.array(self.c0, dtype=np.float64, ndmin=2)
        ct = np.array(self.ctau, dtype=np.float64, ndmin=2)
        if c0.shape != ct.shape or c0.shape[0] != c0.shape[1]:
            raise InvalidArgumentError(f"c0 {c0.shape} and ctau {ct.shape} must be equal square matrices")
        for name, a in (("c0", c0), ("ctau", ct)):
            scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
            if np.max(np.abs(a - a.T), initial=0.0) > 1e-12 * scale:
                raise InvalidArgumentError(f"{name} is not symmetric")
        object.__setattr__(self, "c0", _sym(c0))
        object.__setattr__(self, "ctau", _sym(ct))

    @property
    def n(self) -> int:
        return self.c0.shape[0]

    def to_dict(self):
        return {"tau": self.tau, "c0": _matrix_to_json(self.c0),
                "ctau": _matrix_to_json(self.ctau), "meta": self.meta}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        return cls(_matrix_from_json(d["c0"]), _matrix_from_json(d["ctau"]), float(d["tau"]),
                   meta=d.get("meta", {}))


@dataclass(frozen=True)
class VacSolution:
    """Sorted VAC eigenvalues and ``C(0)``-orthonormal coefficient vectors.

    ``coeffs[:, i]`` holds the coefficients of eigenfunction ``i + 1`` in the
    original basis; dropped directions contribute zero coefficients.
    """

    eigenvalues: np.ndarray
    coeffs: np.ndarray
    tau: float
    n_dropped: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def retained(self) -> int:
        return self.eigenvalues.size

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def out_of_range(self) -> np.ndarray:
        """Mask of eigenvalues outside ``[0, 1]`` (possible only for sampled matrices)."""
        return (self.eigenvalues < 0) | (self.eigenvalues > 1)

    def block(self, j: int, k: int) -> np.ndarray:
        """Coefficient columns of modes ``j..k`` (1-based, inclusive)."""
        _check_block(j, k, self.retained)
        return self.coeffs[:, j - 1:k]

    def to_dict(self):
        return {"tau": self.tau, "eigenvalues": self.eigenvalues.tolist(),
                "coeffs": _matrix_to_json(self.coeffs), "retained": self.retained,
                "n_dropped": self.n_dropped, "meta": self.meta}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["eigenvalues"], dtype=np.float64), _matrix_from_json(d["coeffs"]),
                   float(d["tau"]), int(d.get("n_dropped", 0)), meta=d.get("meta", {}))


def _check_block(j, k, n):
    if not (1 <= j <= k <= n):
        raise InvalidArgumentError(f"need 1 <= j <= k <= {n}, got j={j}, k={k}")


def lagged_correlation(features: np.ndarray, lag: int) -> np.ndarray:
    """Symmetrized time average of ``phi(X_s) phi(X_{s+lag})^T`` over all available pairs."""
    n_samples = features.shape[0]
    if not 0 <= lag < n_samples:
        raise InvalidArgumentError(f"lag of {lag} steps needs more than {n_samples} samples")
    a = features[: n_samples - lag]
    b = features[lag:]
    return _sym(a.T @ b) / (n_samples - lag)


def _features(traj, basis):
    return traj.states if basis is None else basis.transform(traj.states)


def estimate_correlation(traj, basis: Basis | None, t: float) -> np.ndarray:
    """Estimate ``C(t)`` from one trajectory or a list of trajectory segments.

    With several segments the estimate is the mean of per-segment estimates
    weighted by the number of lagged pairs each contributes.
    """
    trajs = [traj] if isinstance(traj, Trajectory) else list(traj)
    if not trajs:
        raise InvalidArgumentError("no trajectories given")
    total = None
    weight = 0
    for tr in trajs:
        steps = lag_to_steps(t, tr.delta)
        if steps >= tr.n_samples:
            raise InvalidArgumentError(f"lag time {t} exceeds trajectory duration {tr.duration}")
        c = lagged_correlation(_features(tr, basis), steps)
        w = tr.n_samples - steps
        total = c * w if total is None else total + c * w
        weight += w
    return total / weight


def estimate_pair(traj, basis: Basis | None, tau: float) -> CorrelationPair:
    """``C(0)`` and ``C(tau)`` estimated from the same data."""
    first = traj if isinstance(traj, Trajectory) else traj[0]
    meta = {"delta": first.delta, "duration": first.duration,
            "basis": basis.descriptor() if basis is not None else "identity"}
    return CorrelationPair(estimate_correlation(traj, basis, 0.0),
                           estimate_correlation(traj, basis, tau), tau, meta=meta)


def solve_vac(pair: CorrelationPair, rank_tol: float = 1e-10) -> VacSolution:
    """Solve ``C(tau) v = lambda C(0) v`` by whitening ``C(0)``.

    Directions of ``C(0)`` with eigenvalue below ``rank_tol`` times the largest
    are discarded before the symmetric whitened problem is solved.  The
    returned eigenvalues are descending; each eigenvector's largest-magnitude
    coefficient is made positive.
    """
    c0, ct = pair.c0, pair.ctau
    empty = np.flatnonzero(np.diag(c0) == 0)
    if empty.size:
        warnings.warn(f"dropping {empty.size} basis functions with zero occupancy: {empty.tolist()}",
                      EmptyCellWarning, stacklevel=2)
    w, u = linalg.eigh(c0)
    if not np.all(np.isfinite(w)) or w[-1] <= np.finfo(float).tiny:
        raise SingularMassMatrixError("C(0) is numerically zero")
    keep = w > rank_tol * w[-1]
    if not np.any(keep):
        raise DegenerateSubspaceError("no directions retained after conditioning")
    whiten = u[:, keep] / np.sqrt(w[keep])
    lam, y = linalg.eigh(_sym(whiten.T @ ct @ whiten))
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    v = whiten @ y[:, order]
    pivot = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[pivot, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    v = v * signs
    return VacSolution(lam, v, pair.tau, n_dropped=int(np.count_nonzero(~keep)),
                       meta=dict(pair.meta))


def eigenfunction_series(sol: VacSolution, basis: Basis | None, i: int, traj: Trajectory) -> np.ndarray:
    """Values of VAC eigenfunction ``i`` (1-based) along the trajectory."""
    if not 1 <= i <= sol.retained:
        raise InvalidArgumentError(f"eigenfunction index {i} outside 1..{sol.retained}")
    return _features(traj, basis) @ sol.coeffs[:, i - 1]


def implied_timescales(sol_or_eigenvalues, tau: float | None = None) -> np.ndarray:
    """``-tau / log(lambda)`` per eigenvalue.

    Eigenvalues ``>= 1`` give ``+inf``; eigenvalues ``<= 0`` give ``nan`` (the
    timescale is undefined).
    """
    if isinstance(sol_or_eigenvalues, VacSolution):
        lam, tau = sol_or_eigenvalues.eigenvalues, sol_or_eigenvalues.tau
    else:
        lam = np.asarray(sol_or_eigenvalues, dtype=np.float64)
        if tau is None:
            raise InvalidArgumentError("tau is required when passing raw eigenvalues")
    out = np.full(lam.shape, np.nan)
    inside = (lam > 0) & (lam < 1)
    out[inside] = -tau / np.log(lam[inside])
    out[lam >= 1] = np.inf
    return out


class VAC(TransformerMixin, BaseEstimator):
    """Variational approach to conformational dynamics at one lag time.

    Parameters
    ----------
    lag_time : float
        Lag time ``tau`` in the trajectory's time units.
    basis : Basis, optional
        Basis applied to raw states.  When ``None`` the input to ``fit`` is
        taken to be an already-featurized array, which is how VAC sits at
        the end of a :class:`~sklearn.pipeline.Pipeline`.
    delta : float, optional
        Sampling interval for array input.  Ignored for :class:`Trajectory`
        input, which carries its own.
    rank_tol : float
        Relative eigenvalue cutoff when whitening ``C(0)``.
    n_components : int, optional
        Number of eigenfunctions returned by ``transform``.

    Attributes
    ----------
    eigenvalues_ : ndarray
        VAC eigenvalues in descending order.
    coeffs_ : (n_basis, n_retained) ndarray
        Eigenfunction coefficients, ``C(0)``-orthonormal.
    timescales_ : ndarray
        Implied timescales ``-tau / log(lambda)``.
    pair_ : CorrelationPair
    solution_ : VacSolution
    """

    def __init__(self, lag_time=1.0, basis=None, delta=None, rank_tol=1e-10, n_components=None):
        self.lag_time = lag_time
        self.basis = basis
        self.delta = delta
        self.rank_tol = rank_tol
        self.n_components = n_components

    def _as_trajectory(self, X):
        if isinstance(X, Trajectory):
            return X
        if isinstance(X, (list, tuple)) and X and isinstance(X[0], Trajectory):
            return list(X)
        if self.delta is None:
            raise InvalidArgumentError("delta is required for array input")
        return Trajectory(X, self.delta)

    def fit(self, X, y=None):
        traj = self._as_trajectory(X)
        self.pair_ = estimate_pair(traj, self.basis, self.lag_time)
        self.solution_ = solve_vac(self.pair_, self.rank_tol)
        self.eigenvalues_ = self.solution_.eigenvalues
        self.coeffs_ = self.solution_.coeffs
        self.timescales_ = implied_timescales(self.solution_)
        return self

    def transform(self, X):
        check_is_fitted(self, "solution_")
        states = X.states if isinstance(X, Trajectory) else np.asarray(X, dtype=np.float64)
        feats = states if self.basis is None else self.basis.transform(states)
        return feats @ self.coeffs_[:, : self.n_components]
