import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from vacerr import CorrelationPair, SubspaceRep, indicator_basis, orthonormalize, solve_vac, subspace_distances


def spd(rng, n):
    a = rng.normal(size=(n, n))
    return a @ a.T + n * np.eye(n)


@st.composite
def split_pair(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(3, 9))
    k = draw(st.integers(2, n))
    k1 = draw(st.integers(1, k - 1))
    rng = np.random.default_rng(seed)
    gram = spd(rng, n)
    U = orthonormalize(SubspaceRep(rng.normal(size=(n, k)), gram))
    # W is a perturbation of U so that the distances are not all saturated
    W = orthonormalize(SubspaceRep(U.coeffs + draw(st.floats(0.01, 2.0)) * rng.normal(size=(n, k)), gram))
    return U, W, k1


@settings(max_examples=200, deadline=None)
@given(split_pair())
def test_projection_distance_of_orthogonal_complements(case):
    U, W, k1 = case
    whole = subspace_distances(U, W)[1] ** 2
    first = subspace_distances(U.columns(slice(0, k1)), W.columns(slice(0, k1)))[1] ** 2
    rest = subspace_distances(U.columns(slice(k1, None)), W.columns(slice(k1, None)))[1] ** 2
    assert rest <= whole + first + 1e-10


@settings(max_examples=100, deadline=None)
@given(split_pair())
def test_gap_distance_below_projection_distance(case):
    U, W, k1 = case
    U1 = U.columns(slice(0, k1))
    d2, dF = subspace_distances(U1, W)
    assert 0 <= d2 <= dF + 1e-12 <= np.sqrt(k1) * d2 + 1e-10 and d2 <= 1 + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 12))
def test_whitened_eigenvectors_are_mass_orthonormal(seed, n):
    rng = np.random.default_rng(seed)
    c0 = spd(rng, n)
    a = rng.normal(size=(n, n))
    sol = solve_vac(CorrelationPair(c0, 0.5 * (a + a.T), 1.0))
    v = sol.coeffs
    np.testing.assert_allclose(v.T @ c0 @ v, np.eye(sol.retained), atol=1e-9)
    assert np.all(np.diff(sol.eigenvalues) <= 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 40), st.floats(-2, 2), st.lists(st.floats(-50, 50), min_size=1, max_size=30))
def test_indicators_partition_unity(n, offset, xs):
    feats = indicator_basis(n, offset).transform(np.asarray(xs)[:, None])
    np.testing.assert_array_equal(feats.sum(axis=1), 1.0)
    assert set(np.unique(feats)) <= {0.0, 1.0}
