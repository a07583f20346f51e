"""Estimation-error diagnostics: condition numbers, first-order errors, data-driven MSE.

Mode indices are 1-based throughout.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from .exceptions import DivisionGuardError, InsufficientDataError, InvalidArgumentError
from .sde import Trajectory
from .vac import CorrelationPair, VacSolution

__all__ = [
    "condition_number",
    "min_condition_number",
    "LhatMatrix",
    "lhat",
    "first_order_errors",
    "MseReport",
    "sokal_window",
    "autocovariance",
    "estimate_mse",
    "mse_to_csv",
]

MIN_PAIRS = 100
WINDOW_C = 6.0


def _block(j, k, n):
    if not (1 <= j <= k <= n):
        raise InvalidArgumentError(f"need 1 <= j <= k <= {n}, got j={j}, k={k}")


def condition_number(eigenvalues, j: int, k: int) -> float:
    """``1 / min(lambda_{j-1} - lambda_j, lambda_k - lambda_{k+1})``.

    ``lambda_0 = +inf`` and ``lambda_{n+1} = -inf``, so the whole space has
    condition number 0.  A non-positive boundary gap gives ``+inf``.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    _block(j, k, lam.size)
    upper = lam[j - 2] - lam[j - 1] if j > 1 else np.inf
    lower = lam[k - 1] - lam[k] if k < lam.size else np.inf
    gap = min(upper, lower)
    if gap <= 0:
        return np.inf
    return 0.0 if np.isinf(gap) else float(1.0 / gap)


def min_condition_number(sweep, j: int, k: int) -> tuple[float, float]:
    """Lag time minimizing the condition number of modes ``j..k`` and the minimum.

    ``sweep`` holds :class:`VacSolution` objects or ``(tau, eigenvalues)``
    pairs.  Ties go to the earliest entry.
    """
    items = [(s.tau, s.eigenvalues) if isinstance(s, VacSolution) else s for s in sweep]
    if not items:
        raise InvalidArgumentError("empty sweep")
    values = [condition_number(lam, j, k) for _, lam in items]
    best = int(np.argmin(values))
    return float(items[best][0]), float(values[best])


@dataclass(frozen=True)
class LhatMatrix:
    """``L_ij = v_i^T [C_hat(tau) - lambda_j C_hat(0)] v_j`` for a reference solution ``(v, lambda)``."""

    entries: np.ndarray
    tau: float
    provenance: dict = field(default_factory=dict, compare=False)


def lhat(pair_sampled: CorrelationPair, sol_ideal: VacSolution) -> LhatMatrix:
    if pair_sampled.n != sol_ideal.n:
        raise InvalidArgumentError(
            f"sampled matrices are {pair_sampled.n}x{pair_sampled.n}, solution has {sol_ideal.n} basis functions")
    v = sol_ideal.coeffs
    entries = v.T @ pair_sampled.ctau @ v - (v.T @ pair_sampled.c0 @ v) * sol_ideal.eigenvalues[None, :]
    prov = {"solution_tau": sol_ideal.tau, "solution_meta": dict(sol_ideal.meta)}
    return LhatMatrix(entries, pair_sampled.tau, prov)


def first_order_errors(lh: LhatMatrix, eigenvalues, j: int, k: int):
    """First-order eigenvalue errors ``L_ii`` and subspace error of modes ``j..k``.

    The subspace error is ``sqrt(sum_{l not in [j,k]} sum_{m in [j,k]} |L_lm / (lambda_l - lambda_m)|^2)``.
    """
    L = np.asarray(lh.entries if isinstance(lh, LhatMatrix) else lh, dtype=np.float64)
    lam = np.asarray(eigenvalues, dtype=np.float64)
    n = L.shape[0]
    if lam.size < n:
        raise InvalidArgumentError("need one eigenvalue per row of L")
    _block(j, k, n)
    inside = np.arange(j - 1, k)
    outside = np.setdiff1d(np.arange(n), inside)
    gaps = lam[outside][:, None] - lam[inside][None, :]
    if np.any(gaps == 0):
        raise DivisionGuardError(f"block {j}..{k} is not separated from the other eigenvalues")
    sub = float(np.sqrt(np.sum((L[np.ix_(outside, inside)] / gaps) ** 2)))
    return np.diag(L).copy(), sub


def autocovariance(series: np.ndarray, max_lag: int | None = None) -> np.ndarray:
    """Uncentered autocovariance ``R(s) = mean_r F_r F_{r+s}`` along the last axis, ``s <= max_lag``."""
    x = np.asarray(series, dtype=np.float64)
    m = x.shape[-1]
    max_lag = m - 1 if max_lag is None else min(int(max_lag), m - 1)
    size = fft.next_fast_len(m + max_lag + 1, real=True)
    f = fft.rfft(x, n=size, axis=-1)
    acf = fft.irfft(f.real**2 + f.imag**2, n=size, axis=-1)[..., :max_lag + 1]
    return acf / np.arange(m, m - max_lag - 1, -1)


def sokal_window(acov: np.ndarray, cap: int, c: float = WINDOW_C):
    """Smallest ``K`` with ``K >= c * tau_int(K)``, ``tau_int(K) = 1/2 + sum_{1<=s<=K} R(s)/R(0)``.

    Returns ``(K, reached)``; when no ``K <= cap`` qualifies, ``K = cap`` and
    ``reached`` is False.
    """
    r0 = acov[0]
    cap = int(max(0, min(cap, acov.size - 1)))
    if r0 <= 0:
        return 0, True
    tau_int = 0.5 + np.cumsum(acov[1:cap + 1]) / r0
    ks = np.arange(1, cap + 1)
    hit = np.flatnonzero(ks >= c * tau_int)
    if hit.size:
        return int(ks[hit[0]]), True
    return cap, False


@dataclass
class MseReport:
    """Asymptotic variances ``V_lm^2`` and the mean squared errors built from them."""

    tau: float
    pairs: list
    variances: np.ndarray
    windows: np.ndarray
    negative: np.ndarray
    window_capped: np.ndarray
    eig_mse: dict
    subspace_mse: dict

    def variance(self, l, m) -> float:
        return float(self.variances[self.pairs.index((l, m))])

    @property
    def eig_rms(self) -> dict:
        return {i: float(np.sqrt(v)) for i, v in self.eig_mse.items()}

    @property
    def subspace_rms(self) -> dict:
        return {b: float(np.sqrt(v)) for b, v in self.subspace_mse.items()}


def estimate_mse(traj: Trajectory, sol: VacSolution, basis, j: int | None = None, k: int | None = None,
                 blocks=None, chunk: int = 16, min_pairs: int = MIN_PAIRS) -> MseReport:
    """Data-driven mean squared estimation error for VAC eigenvalues and subspaces.

    ``sol`` is normally the VAC solution estimated from ``traj`` itself.  For
    every needed ``(l, m)`` the series
    ``F_lm(x, y) = (g_l(x) g_m(y) + g_l(y) g_m(x)) / 2 - lambda_m (g_l(x) g_m(x) + g_l(y) g_m(y)) / 2``
    is formed over all lagged pairs, its uncentered autocovariance is summed
    up to an automatic window, and ``V_lm^2 = (Delta / T) (R(0) + 2 sum_{s=1}^K R(s))``
    with ``T = N Delta``.  Eigenvalue MSEs are ``V_ii^2``; the subspace MSE of
    block ``j..k`` is ``sum V_lm^2 / (lambda_l - lambda_m)^2``.
    """
    if blocks is None:
        if j is None or k is None:
            raise InvalidArgumentError("give j and k or a list of blocks")
        blocks = [(j, k)]
    blocks = [tuple(int(x) for x in b) for b in blocks]
    r = sol.retained
    for b in blocks:
        _block(*b, r)
    lag = int(round(sol.tau / traj.delta))
    if not np.isclose(lag * traj.delta, sol.tau, rtol=1e-9, atol=1e-12):
        raise InvalidArgumentError(f"tau={sol.tau} is not a multiple of delta={traj.delta}")
    m_len = traj.n_samples - lag
    if m_len < min_pairs:
        raise InsufficientDataError(f"only {m_len} lagged pairs; at least {min_pairs} required")
    lam = sol.eigenvalues

    pairs = []
    for a, b in blocks:
        pairs += [(i, i) for i in range(a, b + 1)]
        pairs += [(l, m) for l in range(1, r + 1) if not a <= l <= b for m in range(a, b + 1)]
    pairs = list(dict.fromkeys(pairs))
    for a, b in blocks:
        for l in range(1, r + 1):
            if not a <= l <= b and np.any(lam[l - 1] == lam[a - 1:b]):
                raise DivisionGuardError(f"eigenvalue {l} coincides with block {a}..{b}")

    feats = traj.states if basis is None else basis.transform(traj.states)
    g = feats @ sol.coeffs
    gx, gy = np.ascontiguousarray(g[:m_len].T), np.ascontiguousarray(g[lag:].T)
    duration = traj.n_samples * traj.delta
    cap = m_len // 10

    variances = np.empty(len(pairs))
    windows = np.empty(len(pairs), dtype=np.int64)
    negative = np.zeros(len(pairs), dtype=bool)
    capped = np.zeros(len(pairs), dtype=bool)
    for start in range(0, len(pairs), chunk):
        batch = pairs[start:start + chunk]
        li = np.array([p[0] - 1 for p in batch])
        mi = np.array([p[1] - 1 for p in batch])
        xl, xm, yl, ym = gx[li], gx[mi], gy[li], gy[mi]
        cross = 0.5 * (xl * ym + yl * xm)
        same = (0.5 * lam[mi])[:, None] * (xl * xm + yl * ym)
        series = cross - same
        # F that vanishes identically (e.g. against the constant mode) is pure rounding noise
        scale = np.mean(cross**2, axis=1) + np.mean(same**2, axis=1)
        acov = autocovariance(series, cap)
        for row, idx in enumerate(range(start, start + len(batch))):
            if acov[row, 0] <= 1e-24 * scale[row]:
                windows[idx], variances[idx] = 0, 0.0
                continue
            K, reached = sokal_window(acov[row], cap)
            raw = traj.delta / duration * (acov[row, 0] + 2.0 * acov[row, 1:K + 1].sum())
            windows[idx], capped[idx] = K, not reached
            negative[idx] = raw < 0
            variances[idx] = max(raw, 0.0)

    lookup = dict(zip(pairs, variances))
    eig_mse = {i: float(lookup[(i, i)]) for a, b in blocks for i in range(a, b + 1)}
    sub_mse = {}
    for a, b in blocks:
        total = 0.0
        for l in range(1, r + 1):
            if a <= l <= b:
                continue
            for m in range(a, b + 1):
                total += lookup[(l, m)] / (lam[l - 1] - lam[m - 1]) ** 2
        sub_mse[(a, b)] = float(total)
    return MseReport(sol.tau, pairs, variances, windows, negative, capped, eig_mse, sub_mse)


def mse_to_csv(reports, handle=None) -> str:
    """CSV rows ``tau, pair, variance, window, block, block_mse, rms``.

    Pair rows leave the block columns empty; block rows (eigenvalue ``i`` is
    block ``i..i``) leave the pair columns empty.
    """
    if isinstance(reports, MseReport):
        reports = [reports]
    buf = handle if handle is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau", "pair", "variance", "window", "block", "block_mse", "rms"])
    for rep in reports:
        tau = repr(float(rep.tau))
        for (l, m), v, K in zip(rep.pairs, rep.variances, rep.windows):
            w.writerow([tau, f"{l}-{m}", repr(float(v)), int(K), "", "", ""])
        for i, v in rep.eig_mse.items():
            w.writerow([tau, "", "", "", f"{i}..{i}", repr(v), repr(float(np.sqrt(v)))])
        for (a, b), v in rep.subspace_mse.items():
            w.writerow([tau, "", "", "", f"{a}..{b}", repr(v), repr(float(np.sqrt(v)))])
    return buf.getvalue() if handle is None else ""
