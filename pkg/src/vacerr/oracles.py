"""Ground-truth spectral data for the Ornstein-Uhlenbeck and double-well processes.

Every reference discretizes ``L^2(mu)`` on a finite set of nodes: quadrature
nodes for the OU process, lattice points for the double well.  A function is a
vector of node values, and the inner product is ``sum_k w_k f(x_k) g(x_k)``
with ``w`` the stationary weights.  All oracle-based distances and bounds are
evaluated in this node space.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from math import factorial
from pathlib import Path

import numpy as np
from numpy.polynomial import hermite_e, legendre
from scipy import sparse
from scipy.sparse import linalg as splinalg
from scipy.special import ndtr

from .basis import Basis, IndicatorBasis
from .exceptions import (DegenerateProjectionError, InvalidArgumentError,
                         ResolutionError)
from .geometry import SubspaceRep, inner
from .sde import DoubleWellSpec
from .vac import CorrelationPair

__all__ = [
    "Quadrature",
    "gauss_hermite",
    "cell_quadrature",
    "SpectralReference",
    "OUReference",
    "GridReference",
    "OrthogonalizedProjections",
    "ou_reference",
    "ou_ideal_correlation",
    "double_well_grid_reference",
    "ideal_correlation_from_grid",
    "orthogonalized_projections",
]

DEFAULT_GRID_SPACING = 0.04


@dataclass(frozen=True)
class Quadrature:
    """Nodes and stationary-measure weights; weights sum to one."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))


def gauss_hermite(n_nodes: int = 100) -> Quadrature:
    """Gauss-Hermite rule for the standard normal density (exact to degree ``2 n - 1``)."""
    x, w = hermite_e.hermegauss(n_nodes)
    return Quadrature(x, w / np.sqrt(2 * np.pi))


def cell_quadrature(edges, nodes_per_cell: int = 64, cutoff: float = 12.0) -> Quadrature:
    """Composite Gauss-Legendre rule for ``N(0, 1)`` with one panel per indicator cell.

    The outer cells are truncated at ``+-cutoff``, which drops normal mass of
    order ``1e-15`` for the default cutoff.
    """
    edges = np.asarray(edges, dtype=np.float64)
    if edges.size and (edges[0] <= -cutoff or edges[-1] >= cutoff):
        raise InvalidArgumentError(f"cell boundaries must lie inside (-{cutoff}, {cutoff})")
    panels = np.concatenate([[-cutoff], edges, [cutoff]])
    t, w = legendre.leggauss(nodes_per_cell)
    a, b = panels[:-1, None], panels[1:, None]
    x = 0.5 * (b - a) * t + 0.5 * (a + b)
    wx = 0.5 * (b - a) * w * np.exp(-0.5 * x**2) / np.sqrt(2 * np.pi)
    return Quadrature(x.ravel(), wx.ravel())


@dataclass
class SpectralReference:
    """True decay rates and eigenfunctions on a node discretization.

    Attributes
    ----------
    sigmas : (r,) ndarray
        Decay rates ``0 = sigma_1 < sigma_2 <= ...``; eigenvalues of the
        transition operator are ``exp(-sigma_i t)``.
    nodes : (N, d) ndarray
    weights : (N,) ndarray
        Stationary measure at the nodes (the diagonal Gram matrix).
    eigenfunctions : (N, r) ndarray
        ``eta_i`` at the nodes, ``mu``-orthonormal.
    sigma_tail : float
        Decay rate bounding the residual beyond the first ``r`` modes.
    """

    sigmas: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    eigenfunctions: np.ndarray
    sigma_tail: float
    meta: dict = field(default_factory=dict)

    @property
    def num_modes(self) -> int:
        return self.sigmas.size

    @property
    def gram(self) -> np.ndarray:
        return self.weights

    def tail_rate(self, tau: float) -> float:
        return float(np.exp(-self.sigma_tail * tau))

    def eigenvalues(self, tau: float) -> np.ndarray:
        return np.exp(-self.sigmas * tau)

    def basis_values(self, basis: Basis) -> np.ndarray:
        return basis.transform(self.nodes)

    def eta_rep(self, j: int, k: int) -> SubspaceRep:
        """``span(eta_j, ..., eta_k)`` (1-based, inclusive); empty when ``k < j``."""
        if k > self.num_modes:
            raise ResolutionError(f"reference resolves {self.num_modes} modes, mode {k} requested")
        return SubspaceRep(self.eigenfunctions[:, j - 1:k] if k >= j
                           else np.zeros((self.nodes.shape[0], 0)), self.weights)

    def transition(self, basis: Basis, tau: float) -> np.ndarray:
        """Node values of ``T_tau phi_j`` for every basis function."""
        raise NotImplementedError

    def ideal_pair(self, basis: Basis, tau: float) -> CorrelationPair:
        """Exact (up to discretization) ``C(0)`` and ``C(tau)``."""
        if tau < 0:
            raise InvalidArgumentError(f"tau must be nonnegative, got {tau}")
        b = self.basis_values(basis)
        c0 = inner(self.weights, b, b)
        ct = inner(self.weights, b, self.transition(basis, tau))
        meta = {"oracle": type(self).__name__, "basis": basis.descriptor()}
        meta.update(self.transition_meta(tau))
        return CorrelationPair(0.5 * (c0 + c0.T), 0.5 * (ct + ct.T), tau, meta=meta)

    def ideal_pairs(self, basis: Basis, taus) -> list[CorrelationPair]:
        return [self.ideal_pair(basis, t) for t in taus]

    def transition_meta(self, tau: float) -> dict:
        return {}

    def spectral_correlation(self, basis: Basis, tau: float) -> np.ndarray:
        """``sum_l exp(-sigma_l tau) <eta_l, phi> <eta_l, phi>^T`` over resolved modes."""
        ov = inner(self.weights, self.eigenfunctions, self.basis_values(basis))
        return ov.T @ (self.eigenvalues(tau)[:, None] * ov)


class OUReference(SpectralReference):
    """Hermite eigenfunctions of ``dX = -X dt + sqrt(2) dW``."""

    noise_nodes: int = 60

    def transition(self, basis, tau):
        if tau < 0:
            raise InvalidArgumentError(f"tau must be nonnegative, got {tau}")
        x = self.nodes[:, 0]
        if tau == 0:
            return self.basis_values(basis)
        a = np.exp(-tau)
        s = np.sqrt(-np.expm1(-2 * tau))
        if isinstance(basis, IndicatorBasis):
            q = np.concatenate([[-np.inf], basis.edges, [np.inf]])
            cdf = ndtr((q[None, :] - a * x[:, None]) / s)
            return np.diff(cdf, axis=1)
        z, wz = hermite_e.hermegauss(self.noise_nodes)
        wz = wz / np.sqrt(2 * np.pi)
        y = a * x[:, None] + s * z[None, :]
        vals = basis.transform(y.reshape(-1, 1)).reshape(x.size, z.size, -1)
        return np.einsum("nzj,z->nj", vals, wz)


def hermite_eigenfunctions(x, num_modes):
    """Normalized probabilists' Hermite polynomials ``He_k(x) / sqrt(k!)``, ``k < num_modes``."""
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for k in range(num_modes):
        c = np.zeros(k + 1)
        c[k] = 1.0
        cols.append(hermite_e.hermeval(x, c) / np.sqrt(float(factorial(k))))
    return np.column_stack(cols)


def ou_reference(num_modes: int = 6, quadrature=None) -> OUReference:
    """Spectral reference for the OU process.

    ``quadrature`` may be a :class:`Quadrature`, an :class:`IndicatorBasis`
    (a cell-aligned composite rule is built for it), or ``None`` for a
    100-node Gauss-Hermite rule.
    """
    if num_modes < 2:
        raise InvalidArgumentError("num_modes must be at least 2")
    if quadrature is None:
        quadrature = gauss_hermite(100)
    elif isinstance(quadrature, IndicatorBasis):
        quadrature = cell_quadrature(quadrature.edges)
    x = quadrature.nodes[:, 0]
    return OUReference(
        sigmas=np.arange(num_modes, dtype=np.float64),
        nodes=quadrature.nodes,
        weights=quadrature.weights,
        eigenfunctions=hermite_eigenfunctions(x, num_modes),
        sigma_tail=float(num_modes),
        meta={"process": "ou", "n_nodes": int(x.size)},
    )


def ou_ideal_correlation(basis: Basis, tau: float, quadrature=None) -> np.ndarray:
    """Quadrature evaluation of ``C_ij(tau) = <phi_i, T_tau phi_j>`` for the OU process.

    For an indicator basis the conditional law gives
    ``T_tau 1_[a,b)(x) = Phi((b - x e^-tau)/s) - Phi((a - x e^-tau)/s)`` with
    ``s^2 = 1 - e^{-2 tau}``, integrated cell by cell.
    """
    if tau < 0:
        raise InvalidArgumentError(f"tau must be nonnegative, got {tau}")
    if quadrature is None:
        quadrature = basis if isinstance(basis, IndicatorBasis) else gauss_hermite(100)
    return ou_reference(2, quadrature).ideal_pair(basis, tau).ctau


class GridReference(SpectralReference):
    """Reversible nearest-neighbour hopping chain on a 2-D lattice.

    ``rate * (P - I)`` approximates the generator, so ``T_tau`` is
    approximated by ``P^m`` with ``m = round(rate * tau)``.
    """

    P: sparse.csr_matrix = None
    rate: float = 0.0

    def _power(self, tau):
        return int(round(self.rate * tau))

    def transition_meta(self, tau):
        steps = self.rate * tau
        return {"power": int(round(steps)), "power_rounding": abs(steps - round(steps))}

    def transition(self, basis, tau):
        if tau < 0:
            raise InvalidArgumentError(f"tau must be nonnegative, got {tau}")
        v = self.basis_values(basis)
        for _ in range(self._power(tau)):
            v = self.P @ v
        return v

    def ideal_pairs(self, basis, taus):
        """Sweep lag times with one incremental pass of matrix-vector products."""
        taus = list(taus)
        if any(t < 0 for t in taus):
            raise InvalidArgumentError("tau must be nonnegative")
        b = self.basis_values(basis)
        c0 = inner(self.weights, b, b)
        c0 = 0.5 * (c0 + c0.T)
        order = np.argsort(taus, kind="stable")
        out = [None] * len(taus)
        v, done = b, 0
        for idx in order:
            m = self._power(taus[idx])
            for _ in range(m - done):
                v = self.P @ v
            done = m
            ct = inner(self.weights, b, v)
            meta = {"oracle": "GridReference", "basis": basis.descriptor()}
            meta.update(self.transition_meta(taus[idx]))
            out[idx] = CorrelationPair(c0, 0.5 * (ct + ct.T), taus[idx], meta=meta)
        return out


def _hopping_offsets(diffusion, literal):
    """Neighbour offsets and generator rate for the six-neighbour stencil.

    The stencil's second moment is ``2 [[2, s], [s, 2]]`` with ``s = +-1``
    set by which diagonal pair is used, so it reproduces a diffusion matrix
    ``D = c [[2, s], [s, 2]]`` with rate ``12 c / eps^2``.  ``literal`` keeps
    the ``(+1, +1)`` diagonals and the ``24 / eps^2`` rate regardless of ``D``.
    """
    axes = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    if literal:
        return axes + [(1, 1), (-1, -1)], 24.0
    d = np.asarray(diffusion)
    c = d[0, 0] / 2.0
    if not (c > 0 and np.isclose(d[1, 1], d[0, 0]) and np.isclose(abs(d[0, 1]), c)
            and np.isclose(d[0, 1], d[1, 0])):
        raise InvalidArgumentError(
            f"six-neighbour hopping cannot represent diffusion matrix {d.tolist()}")
    diag = [(1, 1), (-1, -1)] if d[0, 1] > 0 else [(1, -1), (-1, 1)]
    return axes + diag, 12.0 * c


def _hopping_matrix(spec, x1, x2, offsets):
    n1, n2 = x1.size, x2.size
    g1, g2 = np.meshgrid(x1, x2, indexing="ij")
    u = spec.potential(np.stack([g1, g2], axis=-1))
    idx = np.arange(n1 * n2).reshape(n1, n2)
    rows, cols, vals = [], [], []
    off_total = np.zeros((n1, n2))
    for d1, d2 in offsets:
        src = (slice(max(0, -d1), n1 - max(0, d1)), slice(max(0, -d2), n2 - max(0, d2)))
        dst = (slice(max(0, d1), n1 - max(0, -d1)), slice(max(0, d2), n2 - max(0, -d2)))
        # logistic acceptance; expit form avoids overflow for large uphill moves
        du = u[dst] - u[src]
        p = 0.5 * (1.0 - np.tanh(0.5 * du)) / 6.0
        rows.append(idx[src].ravel())
        cols.append(idx[dst].ravel())
        vals.append(p.ravel())
        off_total[src] += p
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append((1.0 - off_total).ravel())
    P = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n1 * n2, n1 * n2))
    return P, u.ravel()


def _grid_axis(lo, hi, eps):
    count = (hi - lo) / eps
    m = int(round(count))
    if abs(count - m) > 1e-6 * max(1, count):
        raise InvalidArgumentError(f"grid spacing {eps} does not divide [{lo}, {hi}]")
    return lo + eps * np.arange(m + 1)


def double_well_grid_reference(spec: DoubleWellSpec | None = None, eps: float = DEFAULT_GRID_SPACING,
                               num_modes: int = 6, bounds=((-2.0, 2.0), (-5.0, 5.0)),
                               literal: bool = False, cache_dir=None,
                               residual_tol: float = 1e-6) -> GridReference:
    """Spectral reference for the double well from a hopping process on a lattice.

    Hops to the six stencil neighbours have probability
    ``1 / (6 (1 + exp[U(neighbour) - U(x)]))`` and the remainder stays put.
    The chain satisfies detailed balance with ``mu ~ exp(-U)``; its top
    eigenpairs come from the ``mu``-symmetrized generator by shift-invert
    Lanczos.  Results are cached under ``cache_dir`` when given.
    """
    spec = spec or DoubleWellSpec()
    if not eps > 0:
        raise InvalidArgumentError("grid spacing must be positive")
    (lo1, hi1), (lo2, hi2) = bounds
    if lo1 > -2 or hi1 < 2 or lo2 > -5 or hi2 < 5:
        raise InvalidArgumentError("grid must cover [-2, 2] x [-5, 5]")
    x1, x2 = _grid_axis(lo1, hi1, eps), _grid_axis(lo2, hi2, eps)
    offsets, rate_const = _hopping_offsets(spec.diffusion, literal)
    rate = rate_const / eps**2
    P, u = _hopping_matrix(spec, x1, x2, offsets)
    mu = np.exp(-(u - u.min()))
    mu /= mu.sum()
    g1, g2 = np.meshgrid(x1, x2, indexing="ij")
    nodes = np.column_stack([g1.ravel(), g2.ravel()])

    n_eig = num_modes + 5
    params = {"spec": [spec.a4, spec.a2, spec.a1, spec.b2, spec.sigma], "eps": eps,
              "bounds": bounds, "literal": literal, "n_eig": n_eig}
    key = hashlib.sha256(json.dumps(params, sort_keys=True, default=list).encode()).hexdigest()[:16]
    cache_file = Path(cache_dir) / f"dwgrid-{key}.npz" if cache_dir else None
    if cache_file is not None and cache_file.exists():
        with np.load(cache_file) as data:
            theta, vecs = data["theta"], data["vecs"]
    else:
        sq = np.sqrt(mu)
        S = sparse.diags(sq) @ P @ sparse.diags(1.0 / sq)
        A = (rate * (0.5 * (S + S.T) - sparse.identity(mu.size))).tocsc()
        theta, vecs = splinalg.eigsh(A, k=n_eig, sigma=0.1, which="LM")
        order = np.argsort(-theta)
        theta, vecs = theta[order], vecs[:, order]
        resid = np.linalg.norm(A @ vecs - vecs * theta, axis=0)
        if np.max(resid[:num_modes]) > residual_tol * rate:
            raise ResolutionError(f"eigen-residual {np.max(resid):.3g} above tolerance")
        if cache_file is not None:
            cache_file.parent.mkdir(parents=True, exist_ok=True)
            np.savez(cache_file, theta=theta, vecs=vecs)

    sigmas = np.maximum(-theta, 0.0)
    if sigmas[num_modes - 1] > 0.5 * rate:
        raise ResolutionError(
            f"grid spacing {eps} too coarse: mode {num_modes} decays within two hops")
    eta = vecs / np.sqrt(mu)[:, None]
    eta[:, 0] = 1.0
    sigmas[0] = 0.0
    # re-orthogonalize against the exact constant and fix signs deterministically
    for i in range(1, eta.shape[1]):
        v = eta[:, i] - np.sum(mu * eta[:, i]) * 1.0
        v /= np.sqrt(np.sum(mu * v * v))
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        eta[:, i] = v
    ref = GridReference(
        sigmas=sigmas[:num_modes], nodes=nodes, weights=mu, eigenfunctions=eta[:, :num_modes],
        sigma_tail=float(sigmas[num_modes]),
        meta={"process": "double-well", "eps": eps, "rate": rate, "literal": literal,
              "shape": [x1.size, x2.size], "cache_key": key},
    )
    ref.P = P
    ref.rate = rate
    return ref


def ideal_correlation_from_grid(ref: GridReference, basis: Basis, tau: float) -> np.ndarray:
    """``phi^T D_mu P^m phi`` with ``m = round(rate * tau)``."""
    return ref.ideal_pair(basis, tau).ctau


@dataclass(frozen=True)
class OrthogonalizedProjections:
    """Gram-Schmidt of the projections ``P_Phi eta_1, ..., P_Phi eta_p``.

    Attributes
    ----------
    values : (N, p) ndarray
        ``q_1..q_p`` at the reference nodes.
    coeffs : (n, p) ndarray
        ``q_j`` as combinations of the basis functions.
    overlaps : (r, p) ndarray
        ``<eta_i, q_j>`` for every resolved eigenfunction.
    """

    values: np.ndarray
    coeffs: np.ndarray
    overlaps: np.ndarray
    gram: np.ndarray

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def rep(self, j: int, k: int) -> SubspaceRep:
        return SubspaceRep(self.values[:, j - 1:k], self.gram)


def orthogonalized_projections(ref: SpectralReference, basis: Basis, p: int,
                               tol: float = 1e-10) -> OrthogonalizedProjections:
    """Orthogonalized projections ``q_1..q_p`` of the true eigenfunctions onto the basis span.

    ``q~_k = P_Phi eta_k - sum_{i<k} <q_i, eta_k> q_i`` and ``q_k = q~_k / ||q~_k||``.
    """
    if not 1 <= p <= ref.num_modes:
        raise InvalidArgumentError(f"p must lie in 1..{ref.num_modes}")
    w = ref.weights
    b = ref.basis_values(basis)
    if p > b.shape[1]:
        raise InvalidArgumentError(f"p={p} exceeds the basis size {b.shape[1]}")
    c0 = inner(w, b, b)
    proj = np.linalg.solve(c0, inner(w, b, ref.eigenfunctions[:, :p]))
    qc = np.zeros((b.shape[1], p))
    for k in range(p):
        eta_k = ref.eigenfunctions[:, k]
        qt = proj[:, k].copy()
        for i in range(k):
            qt -= np.sum(w * (b @ qc[:, i]) * eta_k) * qc[:, i]
        norm = np.sqrt(qt @ c0 @ qt)
        if norm < tol:
            raise DegenerateProjectionError(f"projection of eta_{k + 1} is dependent on earlier ones")
        qc[:, k] = qt / norm
    values = b @ qc
    return OrthogonalizedProjections(values, qc, inner(w, ref.eigenfunctions, values), w)
