import numpy as np
import pytest

from conftest import lp_quantile_fit, random_dataset
from mmqr.errors import DomainError, SingularMatrixError
from mmqr.loss import perturbed_loss, total_loss
from mmqr.separate import (Dataset, FitConfig, check_full_rank, fit_quantile, mm_step,
                           mm_weights, solve_spd)


def test_dataset_validation():
    with pytest.raises(DomainError):
        Dataset([1.0, 2.0], np.ones((3, 1)))
    with pytest.raises(DomainError):
        Dataset([1.0, np.nan, 2.0], np.ones((3, 1)))
    with pytest.raises(DomainError):
        Dataset([1.0, 2.0], np.eye(2))              # n must exceed p


def test_rank_deficiency_names_columns():
    x = np.arange(6.0)
    X = np.column_stack([np.ones(6), x, 2 * x + 1])
    with pytest.raises(SingularMatrixError, match="'c'.*'intercept', 'b'"):
        Dataset(np.arange(6.0), X, ["intercept", "b", "c"])


def test_zero_column_is_rank_deficient():
    with pytest.raises(SingularMatrixError, match="identically zero"):
        check_full_rank(np.column_stack([np.ones(4), np.zeros(4)]))


def test_solve_spd_badly_scaled(rng):
    A = rng.normal(size=(5, 5))
    M = A @ A.T + 5 * np.eye(5)
    D = np.diag(10.0 ** np.arange(-6, 9, 3))
    M2 = D @ M @ D
    b = rng.normal(size=5)
    v = solve_spd(M2, b)
    exact = np.linalg.solve(D, np.linalg.solve(M, np.linalg.solve(D, b)))
    np.testing.assert_allclose(v, exact, rtol=1e-10)


def test_solve_spd_reports_pivot():
    M = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(SingularMatrixError) as info:
        solve_spd(M, np.ones(2))
    assert info.value.pivot == 1


def test_weights_are_bounded():
    w = mm_weights(np.array([0.0, 1.0, -1e3]), 1e-10)
    assert w[0] == pytest.approx(1e10)
    assert np.all((w > 0) & (w <= 1e10))


def test_one_step_all_ones_design():
    # p = 1 with X = 1: theta = sum(w y) / sum(w) + n (2q - 1) / (2 sum(w))
    y = np.array([1.0, 2.0, 4.0])
    data = Dataset(y, np.ones((3, 1)))
    theta = mm_step(data, 0.5, np.array([0.0]), 1e-10)
    w = 1.0 / (1e-10 + np.abs(y))
    assert theta[0] == pytest.approx(np.sum(w * y) / np.sum(w), rel=1e-12)


def test_mm_step_matches_weighted_lstsq(rng):
    data = random_dataset(rng, 40, 3)
    theta_t = rng.normal(size=3)
    q, eps = 0.3, 1e-6
    r = data.y - data.X @ theta_t
    w = 1 / (eps + np.abs(r))
    # minimize sum w_i r_i^2 / 4 + (4q-2) r_i / 4 <=> weighted LS on a shifted response
    z = data.y + (2 * q - 1) / w
    expected = np.linalg.lstsq(data.X * np.sqrt(w)[:, None], z * np.sqrt(w), rcond=None)[0]
    np.testing.assert_allclose(mm_step(data, q, theta_t, eps), expected, rtol=1e-9)


def test_mm_step_validates_theta(rng):
    data = random_dataset(rng, 20, 2)
    with pytest.raises(DomainError):
        mm_step(data, 0.5, np.array([1.0, np.inf]))
    with pytest.raises(DomainError):
        mm_step(data, 0.5, np.zeros(3))


def test_intercept_only_example():
    data = Dataset([1.0, 2.0, 3.0, 4.0], np.ones((4, 1)))
    fit = fit_quantile(data, 0.3)
    assert fit.theta[0] == pytest.approx(2.0, abs=1e-6)
    assert fit.converged


@pytest.mark.parametrize("q", [0.1, 0.5, 0.9])
def test_matches_linear_programming(rng, q):
    data = random_dataset(rng, 120, 4)
    fit = fit_quantile(data, q)
    _, lp_value = lp_quantile_fit(data.X, data.y, q)
    assert total_loss(q, data.y - data.X @ fit.theta) == pytest.approx(lp_value, rel=1e-7)


def test_noiseless_recovery():
    x = np.linspace(0, 1, 30)
    X = np.column_stack([np.ones(30), x])
    fit = fit_quantile(Dataset(2 + 3 * x, X), 0.5)
    np.testing.assert_allclose(fit.theta, [2.0, 3.0], atol=1e-6)


def test_descent_and_history(rng):
    data = random_dataset(rng, 150, 5)
    fit = fit_quantile(data, 0.75)
    h = np.array(fit.history)
    assert len(h) == fit.iterations + 1
    assert np.all(np.diff(h) <= 1e-12 * np.abs(h[1:]).max())
    assert fit.final_perturbed_loss == pytest.approx(
        perturbed_loss(0.75, data.y - data.X @ fit.theta), rel=1e-14)


def test_iteration_cap_and_initializers(rng):
    data = random_dataset(rng, 60, 3)
    fit = fit_quantile(data, 0.5, FitConfig(max_iter=3))
    assert fit.iterations == 3 and not fit.converged
    a = fit_quantile(data, 0.5, FitConfig(init="zeros")).theta
    b = fit_quantile(data, 0.5, FitConfig(init=np.ones(3))).theta
    np.testing.assert_allclose(a, b, atol=1e-6)
    with pytest.raises(DomainError):
        fit_quantile(data, 0.5, FitConfig(init="median"))


def test_objective_stop_rule(rng):
    data = random_dataset(rng, 80, 3)
    loose = fit_quantile(data, 0.5, FitConfig(obj_tol=1e-8))
    tight = fit_quantile(data, 0.5)
    assert loose.converged and loose.iterations <= tight.iterations
    assert loose.final_perturbed_loss == pytest.approx(tight.final_perturbed_loss, rel=1e-7)


def test_fitconfig_validation():
    with pytest.raises(DomainError):
        FitConfig(epsilon=0)
    with pytest.raises(DomainError):
        FitConfig(max_iter=0)
    with pytest.raises(DomainError):
        FitConfig(tol=-1)
