"""Gap and projection distances between subspaces of a weighted inner-product space.

Functions live in a finite ambient basis (quadrature nodes, grid points, or
the VAC basis itself).  A subspace is given by the coordinates of spanning
vectors in that basis together with the ambient Gram matrix ``G``, so that
``<u, w> = u^T G w``.  ``G`` may be passed as a full matrix or, for node
bases, as the vector of its diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateSubspaceError, InvalidArgumentError

__all__ = ["SubspaceRep", "inner", "orthonormalize", "subspace_distances"]


def inner(gram, A, B) -> np.ndarray:
    """``A^T G B`` for a full or diagonal Gram matrix."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if gram.ndim == 1:
        return A.T @ (gram[:, None] * B)
    return A.T @ gram @ B


@dataclass(frozen=True)
class SubspaceRep:
    """Span of the columns of ``coeffs`` under the inner product ``gram``."""

    coeffs: np.ndarray
    gram: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.ndim == 1:
            c = c[:, None]
        g = np.asarray(self.gram, dtype=np.float64)
        if c.ndim != 2:
            raise InvalidArgumentError("coeffs must be an (ambient, k) matrix")
        if g.ndim not in (1, 2) or g.shape[0] != c.shape[0] or (g.ndim == 2 and g.shape[1] != c.shape[0]):
            raise InvalidArgumentError(
                f"gram of shape {g.shape} does not match ambient dimension {c.shape[0]}")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "gram", g)

    @property
    def ambient_dim(self) -> int:
        return self.coeffs.shape[0]

    @property
    def k(self) -> int:
        return self.coeffs.shape[1]

    def columns(self, sl) -> "SubspaceRep":
        return SubspaceRep(self.coeffs[:, sl], self.gram)


def orthonormalize(rep: SubspaceRep, tol: float = 1e-10) -> SubspaceRep:
    """Return a ``G``-orthonormal basis ``C`` (``C^T G C = I``) of the same span.

    Raises :class:`DegenerateSubspaceError` when the spanning vectors are
    dependent, judged by the smallest eigenvalue of the span's Gram matrix
    relative to the largest.
    """
    c = rep.coeffs
    if c.shape[1] == 0:
        return rep
    m = inner(rep.gram, c, c)
    m = 0.5 * (m + m.T)
    w, u = np.linalg.eigh(m)
    if w[-1] <= 0 or w[0] <= tol * w[-1]:
        raise DegenerateSubspaceError(
            f"spanning vectors are dependent (Gram eigenvalues {w[0]:.3g} .. {w[-1]:.3g})")
    q = c @ (u / np.sqrt(w))
    # one refinement pass restores orthonormality lost to conditioning
    m2 = inner(rep.gram, q, q)
    w2, u2 = np.linalg.eigh(0.5 * (m2 + m2.T))
    q = q @ (u2 / np.sqrt(w2))
    return SubspaceRep(q, rep.gram)


def subspace_distances(U: SubspaceRep, W: SubspaceRep) -> tuple[float, float]:
    """Gap distance ``||P_{W^perp} P_U||_2`` and projection distance ``||P_{W^perp} P_U||_F``.

    ``dim(U) <= dim(W)`` is required.  Returns ``(d2, dF)``.

    The squared sines of the principal angles are the eigenvalues of
    ``R^T G R`` with ``R = (I - P_W) C_U``; working with the residual rather
    than ``1 - cos^2`` keeps small distances accurate to full precision.
    """
    if U.ambient_dim != W.ambient_dim:
        raise InvalidArgumentError("subspaces live in different ambient spaces")
    if U.k > W.k:
        raise InvalidArgumentError(f"dim(U)={U.k} exceeds dim(W)={W.k}")
    if U.k == 0:
        return 0.0, 0.0
    cu = orthonormalize(U).coeffs
    cw = orthonormalize(W).coeffs
    resid = cu - cw @ inner(U.gram, cw, cu)
    m = inner(U.gram, resid, resid)
    sines2 = np.clip(np.linalg.eigvalsh(0.5 * (m + m.T)), 0.0, 1.0)
    return float(np.sqrt(sines2[-1])), float(np.sqrt(np.sum(sines2)))
