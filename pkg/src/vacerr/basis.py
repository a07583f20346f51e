"""Basis function families, exposed as scikit-learn transformers.

``transform`` maps an ``(n_samples, dim)`` state array to the
``(n_samples, n_basis)`` feature matrix ``phi_j(x_i)``, so a basis drops into a
:class:`sklearn.pipeline.Pipeline` ahead of :class:`vacerr.VAC` or any other
estimator.  None of the families learn anything from data; ``fit`` only
validates the input dimension.
"""

from __future__ import annotations

import json

import numpy as np
from scipy.special import ndtri
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import InvalidArgumentError

__all__ = [
    "Basis",
    "IndicatorBasis",
    "MonomialBasis",
    "FunctionBasis",
    "indicator_basis",
    "polynomial_basis_2d",
    "evaluate",
    "basis_from_dict",
    "basis_from_json",
]


def _as_states(X, dim):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        # a 1-D array is a single state for dim > 1, a sample of scalars otherwise
        X = X[:, None] if dim == 1 else X[None, :]
    if X.ndim != 2 or X.shape[1] != dim:
        raise InvalidArgumentError(
            f"expected states of dimension {dim}, got array of shape {np.shape(X)}")
    return X


class Basis(TransformerMixin, BaseEstimator):
    """Common surface of every basis family."""

    kind = "custom"

    @property
    def dim(self) -> int:
        raise NotImplementedError

    @property
    def n_functions(self) -> int:
        raise NotImplementedError

    def fit(self, X=None, y=None):
        if X is not None:
            _as_states(X, self.dim)
        self.n_features_out_ = self.n_functions
        return self

    def transform(self, X) -> np.ndarray:
        return self._evaluate(_as_states(X, self.dim))

    def __call__(self, X) -> np.ndarray:
        return self.transform(X)

    def _evaluate(self, X):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise InvalidArgumentError(f"{type(self).__name__} is not serializable")

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def descriptor(self) -> str:
        try:
            return self.to_json()
        except InvalidArgumentError:
            return repr(self)


class IndicatorBasis(Basis):
    """Indicators of the intervals ``[q_{i-1}, q_i)`` cut at standard-normal quantiles.

    Parameters
    ----------
    n : int
        Number of cells, at least 2.
    offset : float
        Shift added to every quantile boundary ``Phi^{-1}(i / n)``.
    boundaries : array_like, optional
        Explicit interior boundaries ``q_1 < ... < q_{n-1}``; overrides the
        quantile construction (``offset`` is still added).
    """

    kind = "indicator-1d"

    def __init__(self, n=20, offset=0.0, boundaries=None):
        self.n = n
        self.offset = offset
        self.boundaries = boundaries

    @property
    def dim(self):
        return 1

    @property
    def n_functions(self):
        return self.edges.size + 1

    @property
    def edges(self) -> np.ndarray:
        """Interior boundaries ``q_1, ..., q_{n-1}`` after the offset."""
        if self.boundaries is not None:
            q = np.asarray(self.boundaries, dtype=np.float64).ravel() + self.offset
        else:
            n = int(self.n)
            if n < 2:
                raise InvalidArgumentError(f"indicator basis needs n >= 2, got {self.n}")
            q = ndtri(np.arange(1, n) / n) + self.offset
        if q.size < 1 or np.any(np.diff(q) <= 0) or not np.all(np.isfinite(q)):
            raise InvalidArgumentError("indicator boundaries must be finite and strictly increasing")
        return q

    def cell_index(self, x) -> np.ndarray:
        """Index of the cell containing each scalar ``x`` (boundaries belong to the right cell)."""
        return np.searchsorted(self.edges, np.asarray(x, dtype=np.float64), side="right")

    def _evaluate(self, X):
        q = self.edges
        idx = np.searchsorted(q, X[:, 0], side="right")
        out = np.zeros((X.shape[0], q.size + 1))
        out[np.arange(X.shape[0]), idx] = 1.0
        return out

    def to_dict(self):
        q = self.edges
        return {"kind": self.kind, "n": int(q.size + 1), "boundaries": q.tolist()}


class MonomialBasis(Basis):
    """Products of coordinate powers ``x_1^{e_1} ... x_d^{e_d}``.

    Parameters
    ----------
    exponents : sequence of tuples
        One exponent tuple per basis function, all of the same length ``d``.
    """

    kind = "polynomial"

    def __init__(self, exponents=((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))):
        self.exponents = exponents

    @property
    def _exps(self):
        e = np.asarray(self.exponents, dtype=np.int64)
        if e.ndim != 2 or e.shape[0] == 0 or np.any(e < 0):
            raise InvalidArgumentError("exponents must be a nonempty list of nonnegative tuples")
        return e

    @property
    def dim(self):
        return self._exps.shape[1]

    @property
    def n_functions(self):
        return self._exps.shape[0]

    def _evaluate(self, X):
        e = self._exps
        return np.prod(X[:, None, :] ** e[None, :, :], axis=2)

    def to_dict(self):
        kind = "polynomial-2d" if self.dim == 2 else self.kind
        return {"kind": kind, "n": self.n_functions, "exponents": self._exps.tolist()}


class FunctionBasis(Basis):
    """Arbitrary user-supplied functions.

    Each callable receives the ``(n_samples, dim)`` state array and returns
    ``n_samples`` values.
    """

    def __init__(self, functions=(), n_dims=1):
        self.functions = functions
        self.n_dims = n_dims

    @property
    def dim(self):
        return int(self.n_dims)

    @property
    def n_functions(self):
        return len(self.functions)

    def _evaluate(self, X):
        if not self.functions:
            raise InvalidArgumentError("FunctionBasis has no functions")
        return np.column_stack([np.broadcast_to(np.asarray(f(X), dtype=np.float64),
                                                (X.shape[0],)) for f in self.functions])


def indicator_basis(n: int, offset: float = 0.0) -> IndicatorBasis:
    """Indicator basis with boundaries ``Phi^{-1}(i/n) + offset``."""
    basis = IndicatorBasis(n=n, offset=offset)
    basis.edges  # validate eagerly
    return basis


def polynomial_basis_2d() -> MonomialBasis:
    """The six monomials ``1, x1, x2, x1^2, x1 x2, x2^2`` in that order."""
    return MonomialBasis()


def evaluate(basis: Basis, state) -> np.ndarray:
    """Evaluate ``basis`` at one state, returning an ``n``-vector."""
    state = np.asarray(state, dtype=np.float64)
    if state.ndim > 1 or state.size != basis.dim:
        raise InvalidArgumentError(
            f"state has dimension {state.size}, basis expects {basis.dim}")
    return basis.transform(state.reshape(1, -1))[0]


def basis_from_dict(d: dict) -> Basis:
    kind = d.get("kind")
    if kind == "indicator-1d":
        if "boundaries" in d:
            b = IndicatorBasis(boundaries=d["boundaries"])
        else:
            b = IndicatorBasis(n=d["n"], offset=d.get("offset", 0.0))
    elif kind in ("polynomial-2d", "polynomial"):
        if "exponents" in d:
            b = MonomialBasis(exponents=tuple(map(tuple, d["exponents"])))
        else:
            b = MonomialBasis()
    else:
        raise InvalidArgumentError(f"unknown basis kind {kind!r}")
    if "n" in d and b.n_functions != d["n"]:
        raise InvalidArgumentError(f"basis declares n={d['n']} but defines {b.n_functions} functions")
    return b


def basis_from_json(text: str) -> Basis:
    return basis_from_dict(json.loads(text))
