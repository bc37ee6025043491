import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from repalign.theory import (EquicorrelatedSpec, TwoTrainSpec, chebyshev_check,
                             equicorrelated_coefficient, equicorrelated_inverse,
                             equicorrelated_matrix, equicorrelated_prediction,
                             error_k, error_kstar, gaussian_exceedance,
                             gp_mean_general, monotonicity_scan,
                             random_simplified_spec, run_theory_checks,
                             two_train_prediction)

SPEC = TwoTrainSpec(0.5, 0.5, 0.25, 1.0, 1.0, 1.0, 2.0)


def test_gp_mean_general_examples(rng):
    y = rng.normal(size=4)
    ks = rng.normal(size=(4, 2))
    np.testing.assert_allclose(gp_mean_general(np.eye(4), ks, y), ks.T @ y)
    np.testing.assert_array_equal(gp_mean_general(np.eye(4), np.zeros((4, 2)), y), 0)
    x = rng.normal(size=(5, 5))
    K = x @ x.T + np.eye(5)
    ks = rng.normal(size=(5, 3))
    y = rng.normal(size=5)
    np.testing.assert_allclose(gp_mean_general(K, ks, y), ks.T @ np.linalg.inv(K) @ y,
                               atol=1e-10)
    with pytest.raises(np.linalg.LinAlgError):
        gp_mean_general(np.ones((2, 2)), ks[:2], y[:2])


def test_two_train_examples():
    assert two_train_prediction(SPEC) == pytest.approx(1.2)
    assert two_train_prediction(TwoTrainSpec(0.3, 0.7, 0.0, 1.0, 1.0, 2.0, 5.0)) == \
        pytest.approx(0.3 * 2 + 0.7 * 5)
    assert two_train_prediction(TwoTrainSpec(0.3, 0.7, 0.2, 1.0, 1.0, 0.0, 0.0)) == 0
    with pytest.raises(ZeroDivisionError):
        two_train_prediction(TwoTrainSpec(0.1, 0.1, 1.0, 1.0, 1.0, 1.0, 1.0))


def test_error_formulas():
    assert error_kstar(0.0, SPEC) == 0
    assert error_kstar(0.1, SPEC) == pytest.approx(0.24)
    assert error_k(0.0, SPEC) == 0
    assert error_k(0.1, SPEC) == pytest.approx(0.1 * 0.5 * 3 / (1.35 * 1.25))
    assert error_k(0.1, SPEC) == pytest.approx(0.08889, abs=1e-5)
    with pytest.raises(ValueError):
        error_k(0.1, TwoTrainSpec(0.5, 0.4, 0.25, 1.0, 1.0, 1.0, 2.0))


def test_error_formulas_match_prediction_differences():
    # the closed forms against two explicit predictions
    eps = 0.1
    shifted = TwoTrainSpec(0.6, 0.6, 0.25, 1.0, 1.0, 1.0, 2.0)
    assert error_kstar(eps, SPEC) == pytest.approx(
        abs(two_train_prediction(shifted) - two_train_prediction(SPEC)))
    student = TwoTrainSpec(0.5, 0.5, 0.35, 1.0, 1.0, 1.0, 2.0)
    assert error_k(eps, SPEC) == pytest.approx(
        abs(two_train_prediction(student) - two_train_prediction(SPEC)))


def test_error_k_sublinear():
    eps = np.linspace(0.05, 0.5, 10)
    ratio = np.array([error_k(e, SPEC) for e in eps]) / eps
    assert np.all(np.diff(ratio) < 0)


def test_equicorrelated_inverse():
    np.testing.assert_allclose(equicorrelated_inverse(2, 0.5),
                               [[4 / 3, -2 / 3], [-2 / 3, 4 / 3]])
    np.testing.assert_array_equal(equicorrelated_inverse(3, 0.0), np.eye(3))
    c = 0.37
    K = equicorrelated_matrix(20, c)
    np.testing.assert_allclose(K @ equicorrelated_inverse(20, c), np.eye(20), atol=1e-10)
    with pytest.raises(ValueError):
        equicorrelated_inverse(3, 1.0)
    with pytest.raises(ValueError):
        equicorrelated_inverse(3, -0.5)


@given(st.integers(2, 20), st.floats(0.0, 0.95))
def test_equicorrelated_inverse_property(n, c):
    K = equicorrelated_matrix(n, c)
    np.testing.assert_allclose(K @ equicorrelated_inverse(n, c), np.eye(n), atol=1e-10)


def test_equicorrelated_prediction(rng):
    y = rng.normal(size=4)
    pred = equicorrelated_prediction(EquicorrelatedSpec(4, 3, 0.3, 0.2, tuple(y)))
    via_inverse = 0.2 * np.ones(4) @ equicorrelated_inverse(4, 0.3) @ y
    assert pred.shape == (3,)
    np.testing.assert_allclose(pred, via_inverse, atol=1e-10)
    assert pred[0] == pytest.approx(equicorrelated_coefficient(4, 0.3, 0.2) * y.sum())
    two = equicorrelated_prediction(EquicorrelatedSpec(2, 1, 0.25, 0.5, (1.0, 2.0)))
    assert two[0] == pytest.approx(two_train_prediction(SPEC))
    zero = equicorrelated_prediction(EquicorrelatedSpec(3, 2, 0.1, 0.0, (1.0, 2.0, 3.0)))
    np.testing.assert_array_equal(zero, 0)
    with pytest.raises(ValueError):
        EquicorrelatedSpec(3, 1, 0.1, 0.1, (1.0,))


def test_chebyshev():
    emp, bound = chebyshev_check(0.5, 1.0, 10.0, 100_000, 0)
    assert bound == pytest.approx(0.01) and emp < 1e-3
    assert chebyshev_check(1.0, 1.0, 2.0, 10_000, 0)[0] == 0.0
    emp, bound = chebyshev_check(0.0, 1.0, 2.0, 1_000_000, 1)
    exact = gaussian_exceedance(2.0)
    assert exact == pytest.approx(0.0455, abs=1e-4)
    assert abs(emp - exact) < 4 * np.sqrt(exact * (1 - exact) / 1_000_000)
    assert emp <= bound == 0.25
    with pytest.raises(ValueError):
        chebyshev_check(1.5, 1.0, 2.0, 10, 0)


def test_monotonicity_scan(rng):
    specs = [random_simplified_spec(rng) for _ in range(100)]
    report = monotonicity_scan(specs)
    assert report.ok and report.checked == 100
    assert error_kstar(0.0, specs[0]) == error_k(0.0, specs[0]) == 0

    def broken(eps, spec):
        return 0.5 * error_k(eps, spec)

    report = monotonicity_scan(specs, kstar_error=broken)
    assert not report.ok and "below" in report.violations[0]

    report = monotonicity_scan(specs, k_error=lambda e, s: -e)
    assert not report.ok and "decreases" in report.violations[0]


def test_run_theory_checks_small():
    results = run_theory_checks(seed=1, n_specs=200, chebyshev_trials=20_000)
    assert all(r.passed for r in results), [r for r in results if not r.passed]
