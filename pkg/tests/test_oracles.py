import numpy as np
import pytest
import sympy as sp

import _oracle
from vacerr import (InvalidArgumentError, MonomialBasis, ResolutionError, indicator_basis,
                    orthogonalized_projections, ou_ideal_correlation, ou_reference)
from vacerr.oracles import (_hopping_offsets, double_well_grid_reference, gauss_hermite,
                            hermite_eigenfunctions)
from vacerr.sde import DoubleWellSpec

# derived with tests/_oracle.py: bivariate-normal rectangle probabilities for C(tau)
IDEAL_EIGS_N20_OFF01 = {
    0.2: (0.81048066763234, 0.6165158228330666, 0.40655253787318923),
    0.5: (0.5980783882512455, 0.3231047279639411, 0.1361714322486656),
    1.0: (0.36196018472172864, 0.11531171212211588, 0.026555467560013434),
}


def test_symbolic_moment_against_quadrature():
    # <x^2, eta_3> = E[x^2 (x^2 - 1)/sqrt 2] = sqrt 2
    assert _oracle.gaussian_moment_inner(lambda x: x**2, lambda x: (x**2 - 1) / sp.sqrt(2)) == sp.sqrt(2)
    q = gauss_hermite()
    eta = hermite_eigenfunctions(q.nodes[:, 0], 3)
    assert np.sum(q.weights * q.nodes[:, 0] ** 2 * eta[:, 2]) == pytest.approx(np.sqrt(2), abs=1e-13)


@pytest.mark.parametrize("quad", [None, "indicator"])
def test_eigenfunctions_orthonormal(quad):
    ref = ou_reference(6, quadrature=indicator_basis(20, 0.1) if quad else None)
    np.testing.assert_allclose(ref.eigenfunctions.T @ (ref.weights[:, None] * ref.eigenfunctions),
                               np.eye(6), atol=1e-12)


@pytest.mark.parametrize("tau", sorted(IDEAL_EIGS_N20_OFF01))
def test_indicator_correlations_against_independent_oracle(ou_indicator, tau):
    ref, basis = ou_indicator
    _, ct = _oracle.indicator_pair(_oracle.indicator_edges(20, 0.1), tau)
    np.testing.assert_allclose(ref.ideal_pair(basis, tau).ctau, ct, atol=1e-12)
    np.testing.assert_allclose(ou_ideal_correlation(basis, tau), ct, atol=1e-12)
    from vacerr import solve_vac
    lam = solve_vac(ref.ideal_pair(basis, tau)).eigenvalues
    np.testing.assert_allclose(lam[1:4], IDEAL_EIGS_N20_OFF01[tau], atol=1e-10)


def test_transition_of_polynomials():
    ref = ou_reference(4)
    basis = MonomialBasis(((1,), (2,)))
    tb = ref.transition(basis, 0.4)
    x = ref.nodes[:, 0]
    a = np.exp(-0.4)
    np.testing.assert_allclose(tb[:, 0], a * x, atol=1e-12)
    np.testing.assert_allclose(tb[:, 1], a**2 * x**2 + 1 - a**2, atol=1e-10)
    with pytest.raises(InvalidArgumentError):
        ref.transition(basis, -1.0)


def test_spectral_correlation_matches_direct_up_to_tail(ou_indicator):
    ref, basis = ou_indicator
    direct = ref.ideal_pair(basis, 1.0).ctau
    assert np.max(np.abs(ref.spectral_correlation(basis, 1.0) - direct)) <= ref.tail_rate(1.0)


def test_orthogonalized_projection_closed_form():
    # basis {1, x^3}: P eta_2 = x^3 E[x^4] / E[x^6] = x^3 / 5, so <eta_2, q_2>^2 = 9 / 15
    x = sp.Symbol("x")
    num = _oracle.gaussian_moment_inner(lambda t: t, lambda t: t**3)
    den = _oracle.gaussian_moment_inner(lambda t: t**3, lambda t: t**3)
    expected = float(num**2 / den)
    assert expected == pytest.approx(0.6)
    qs = orthogonalized_projections(ou_reference(6), MonomialBasis(((0,), (3,))), 2)
    assert qs.overlaps[1, 1] ** 2 == pytest.approx(expected, abs=1e-12)
    assert qs.overlaps[0, 0] == pytest.approx(1.0, abs=1e-12)
    del x


def test_orthogonalized_projection_overlaps_indicator(ou_indicator):
    ref, basis = ou_indicator
    ov = _oracle.q_overlaps(_oracle.indicator_edges(20, 0.1), 3)
    qs = orthogonalized_projections(ref, basis, 3)
    np.testing.assert_allclose(np.abs(qs.overlaps[:3, :3]), np.abs(ov[:3, :3]), atol=1e-12)


def test_resolution_limits():
    ref = ou_reference(4)
    with pytest.raises(ResolutionError):
        ref.eta_rep(1, 5)
    assert ref.eta_rep(1, 0).k == 0
    with pytest.raises(InvalidArgumentError):
        ou_reference(1)


# --- double-well grid -------------------------------------------------------

def test_grid_is_stochastic_and_reversible(dw_grid):
    P = dw_grid.P
    np.testing.assert_allclose(np.asarray(P.sum(axis=1)).ravel(), 1.0, atol=1e-12)
    assert P.min() >= 0
    flux = P.multiply(dw_grid.weights[:, None]).tocsr()
    assert abs(flux - flux.T).max() < 1e-10 * dw_grid.weights.max()


def _generator_error(ref, box=0.5):
    spec = DoubleWellSpec()
    x = ref.nodes
    f = x[:, 0] ** 2 + x[:, 0] * x[:, 1] + 0.5 * x[:, 1] ** 2
    grad_f = np.column_stack([2 * x[:, 0] + x[:, 1], x[:, 0] + x[:, 1]])
    hess = np.array([[2.0, 1.0], [1.0, 1.0]])
    exact = -np.einsum("ni,ij,nj->n", spec.grad(x), spec.diffusion, grad_f) + np.sum(spec.diffusion * hess)
    approx = ref.rate * (ref.P @ f - f)
    inside = (np.abs(x[:, 0]) < box) & (np.abs(x[:, 1]) < 2.0)
    return np.max(np.abs(approx - exact)[inside] / (1 + np.abs(exact[inside])))


def test_grid_generator_matches_diffusion_operator(dw_grid, grid_cache):
    """``rate (P - I) f`` converges to ``-D grad U . grad f + D : hess f`` at second order."""
    fine = _generator_error(dw_grid)
    coarse = _generator_error(double_well_grid_reference(eps=0.08, cache_dir=grid_cache))
    assert fine < 0.05
    assert 3.0 < coarse / fine < 5.0


def test_literal_stencil_has_the_wrong_diffusion():
    # the (+1,+1) diagonals with rate 24/eps^2 produce diffusion 2 [[2, 1], [1, 2]]
    offsets, rate = _hopping_offsets(DoubleWellSpec().diffusion, literal=True)
    second = rate / 24 * sum(np.outer(o, o) for o in offsets)
    np.testing.assert_allclose(second, [[4, 2], [2, 4]])
    offsets, rate = _hopping_offsets(DoubleWellSpec().diffusion, literal=False)
    np.testing.assert_allclose(rate / 24 * sum(np.outer(o, o) for o in offsets), DoubleWellSpec().diffusion)


def test_grid_spectrum_and_eigenfunctions(dw_grid):
    s = dw_grid.sigmas
    assert s[0] == 0.0 and np.all(np.diff(s) > 0)
    # the slow inter-well rate is resolved to three digits already at eps = 0.04
    assert s[1] == pytest.approx(0.3125, abs=2e-3)
    w = dw_grid.weights
    np.testing.assert_allclose(dw_grid.eigenfunctions.T @ (w[:, None] * dw_grid.eigenfunctions),
                               np.eye(6), atol=1e-8)


def test_grid_cache_roundtrip(dw_grid, grid_cache):
    again = double_well_grid_reference(cache_dir=grid_cache)
    np.testing.assert_array_equal(again.sigmas, dw_grid.sigmas)
    assert any(grid_cache.iterdir())


def test_grid_rejects_bad_domains():
    with pytest.raises(InvalidArgumentError):
        double_well_grid_reference(bounds=((-1, 1), (-5, 5)))
    with pytest.raises(InvalidArgumentError):
        double_well_grid_reference(eps=0.07)
