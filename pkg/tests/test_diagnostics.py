import csv
import io

import numpy as np
import pytest

from vacerr import (CorrelationPair, DivisionGuardError, InsufficientDataError, InvalidArgumentError,
                    VacSolution, condition_number, estimate_mse, estimate_pair, first_order_errors,
                    indicator_basis, lhat, min_condition_number, ou_reference, simulate_ou, solve_vac)
from vacerr.diagnostics import LhatMatrix, autocovariance, mse_to_csv, sokal_window


def test_condition_number_examples():
    lam = [1.0, 0.9, 0.5, 0.4]
    assert condition_number(lam, 1, 2) == pytest.approx(2.5)
    assert condition_number(lam, 1, 4) == 0.0
    assert condition_number(lam, 2, 2) == pytest.approx(10.0)
    assert condition_number([1.0, 0.5, 0.5], 1, 2) == np.inf
    with pytest.raises(InvalidArgumentError):
        condition_number(lam, 3, 2)
    with pytest.raises(InvalidArgumentError):
        condition_number(lam, 1, 5)


def test_min_condition_number():
    assert min_condition_number([(0.3, [1.0, 0.5, 0.1])], 1, 2) == (0.3, 2.5)
    sweep = [(t, [1.0, np.exp(-t), np.exp(-3 * t) * 0 + np.exp(-t) * 0.5]) for t in (0.1, 0.2, 0.4)]
    assert min_condition_number(sweep, 1, 2)[0] == 0.1
    with pytest.raises(InvalidArgumentError):
        min_condition_number([], 1, 1)


@pytest.fixture(scope="module")
def ideal():
    basis = indicator_basis(6, 0.1)
    ref = ou_reference(6, quadrature=basis)
    pair = ref.ideal_pair(basis, 0.5)
    return pair, solve_vac(pair)


def test_lhat_exact_data_is_zero(ideal):
    pair, sol = ideal
    assert np.max(np.abs(lhat(pair, sol).entries)) < 1e-10


def test_lhat_is_linear_in_the_perturbation(ideal):
    pair, sol = ideal
    E = np.random.default_rng(0).normal(size=(6, 6))
    E = E + E.T
    for delta in (1e-3, 2e-3):
        got = lhat(CorrelationPair(pair.c0, pair.ctau + delta * E, 0.5), sol).entries
        np.testing.assert_allclose(got, delta * sol.coeffs.T @ E @ sol.coeffs, atol=1e-13)
    with pytest.raises(InvalidArgumentError):
        lhat(CorrelationPair(np.eye(3), np.eye(3), 0.5), sol)


def test_first_order_examples():
    eig, sub = first_order_errors(np.zeros((3, 3)), [1.0, 0.5, 0.2], 1, 2)
    assert sub == 0 and not eig.any()
    L = np.array([[0.0, 0.0], [0.04, 0.0]])
    assert first_order_errors(LhatMatrix(L, 1.0), [0.9, 0.5], 1, 1)[1] == pytest.approx(0.1)
    with pytest.raises(DivisionGuardError):
        first_order_errors(L, [0.5, 0.5], 1, 1)


def test_first_order_errors_are_accurate_to_second_order(ideal):
    pair, sol = ideal
    E = np.random.default_rng(1).normal(size=(6, 6))
    E = E @ E.T
    resid = []
    for d in (1e-5, 5e-6):
        sampled = CorrelationPair(pair.c0, pair.ctau + d * E, 0.5)
        eig, _ = first_order_errors(lhat(sampled, sol), sol.eigenvalues, 1, 2)
        resid.append(np.abs(solve_vac(sampled).eigenvalues - sol.eigenvalues - eig).max())
    assert resid[0] / resid[1] == pytest.approx(4.0, rel=0.1)


def test_autocovariance_and_window():
    x = np.random.default_rng(2).normal(size=(2, 50))
    brute = [np.mean(x[0, : 50 - s] * x[0, s:]) for s in range(50)]
    np.testing.assert_allclose(autocovariance(x)[0], brute, atol=1e-13)
    np.testing.assert_allclose(autocovariance(x, 5)[0], brute[:6], atol=1e-13)
    phi = 0.8
    acov = phi ** np.arange(200)
    K, ok = sokal_window(acov, 100)
    tau_int = lambda k: 0.5 + phi * (1 - phi**k) / (1 - phi)
    assert ok and K >= 6 * tau_int(K) and K - 1 < 6 * tau_int(K - 1)
    assert sokal_window(acov, 5) == (5, False)
    assert sokal_window(np.zeros(10), 5) == (0, True)


def test_ar1_long_run_variance():
    rng = np.random.default_rng(3)
    phi, n = 0.6, 200000
    e = rng.normal(size=n)
    x = np.empty(n)
    x[0] = e[0] / np.sqrt(1 - phi**2)
    for i in range(1, n):
        x[i] = phi * x[i - 1] + e[i]
    acov = autocovariance(x, 1000)
    K, _ = sokal_window(acov, 1000)
    long_run = acov[0] + 2 * acov[1:K + 1].sum()
    assert long_run == pytest.approx(1 / (1 - phi) ** 2, rel=0.05)


def test_trivial_eigenfunction_has_zero_variance():
    basis = indicator_basis(8, 0.1)
    ref = ou_reference(6, quadrature=basis)
    sol = solve_vac(ref.ideal_pair(basis, 0.5))
    traj = simulate_ou(200, 0.1, seed=1)
    rep = estimate_mse(traj, sol, basis, 1, 1)
    assert rep.eig_mse[1] < 1e-20
    assert np.all(rep.variances >= 0) and np.all(rep.windows >= 0)


def test_mse_guards():
    basis = indicator_basis(5)
    traj = simulate_ou(5, 0.1, seed=1)
    sol = solve_vac(estimate_pair(traj, basis, 0.2))
    with pytest.raises(InsufficientDataError):
        estimate_mse(traj, sol, basis, 1, 2)
    long = simulate_ou(100, 0.1, seed=1)
    bad = VacSolution(sol.eigenvalues, sol.coeffs, 0.25)
    with pytest.raises(InvalidArgumentError):
        estimate_mse(long, bad, basis, 1, 2)
    tie = VacSolution(np.array([1.0, 0.5, 0.5, 0.2, 0.1]), sol.coeffs, 0.2)
    with pytest.raises(DivisionGuardError):
        estimate_mse(long, tie, basis, 1, 2)


def test_subspace_mse_invariant_to_order_within_block():
    basis = indicator_basis(10, 0.1)
    traj = simulate_ou(300, 0.1, seed=5)
    sol = solve_vac(estimate_pair(traj, basis, 0.3))
    perm = np.array([0, 2, 1] + list(range(3, sol.retained)))
    swapped = VacSolution(sol.eigenvalues[perm], sol.coeffs[:, perm], sol.tau)
    a = estimate_mse(traj, sol, basis, 2, 3).subspace_mse[(2, 3)]
    b = estimate_mse(traj, swapped, basis, 2, 3).subspace_mse[(2, 3)]
    assert a == pytest.approx(b, rel=1e-12)


def test_eigenvalue_mse_shrinks_with_length():
    basis = indicator_basis(10, 0.1)
    med = []
    for T in (250, 1000):
        vals = []
        for seed in range(12):
            traj = simulate_ou(T, 0.1, seed=seed)
            sol = solve_vac(estimate_pair(traj, basis, 0.5))
            vals.append(estimate_mse(traj, sol, basis, 2, 2).eig_mse[2])
        med.append(np.median(vals))
    assert med[1] < med[0]


def test_csv_emit():
    basis = indicator_basis(5)
    traj = simulate_ou(100, 0.1, seed=1)
    rep = estimate_mse(traj, solve_vac(estimate_pair(traj, basis, 0.2)), basis, 1, 2)
    rows = list(csv.reader(io.StringIO(mse_to_csv(rep))))
    assert rows[0] == ["tau", "pair", "variance", "window", "block", "block_mse", "rms"]
    assert rows[-1][4] == "1..2"
    assert float(rows[-1][6]) ** 2 == pytest.approx(float(rows[-1][5]))
