import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from mmqr.basis import coefficient_function, logistic
from mmqr.errors import DomainError, ParseError
from mmqr.simulation import (GG_SET_1, GG_SET_2, ErrorDistribution, Estimator,
                             Scenario, error_quantile, gamma_quantile, gg_convert, gg_from_mu,
                             gg_pdf, gg_quantile, gg_sample, hetero_coefficients, imse,
                             parse_distribution, parse_estimator, parse_scenario,
                             run_replicate, run_scenario, sample_hetero, theoretical_quantile)

DISTS = [ErrorDistribution("normal"), ErrorDistribution("student_t", df=10),
         ErrorDistribution("beta_shifted", alpha=2, beta=2),
         ErrorDistribution("beta_shifted", alpha=0.5, beta=0.5),
         ErrorDistribution("beta_shifted", alpha=2, beta=5),
         ErrorDistribution("log_exponential"), ErrorDistribution("logistic")]
LEVELS = np.arange(1, 1000) / 1000


def test_error_quantile_examples():
    assert error_quantile(ErrorDistribution("normal"), 0.5) == 0.0
    assert error_quantile(ErrorDistribution("log_exponential"), 1 - np.exp(-1)) == pytest.approx(
        0.0, abs=1e-15)
    assert error_quantile(ErrorDistribution("beta_shifted"), 0.5) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("dist", DISTS, ids=str)
def test_error_quantile_inverts_cdf(dist):
    assert np.max(np.abs(dist.cdf(error_quantile(dist, LEVELS)) - LEVELS)) <= 1e-10


def test_error_quantiles_match_reference_laws():
    np.testing.assert_allclose(error_quantile(DISTS[1], LEVELS), stats.t(10).ppf(LEVELS),
                               rtol=1e-10)
    np.testing.assert_allclose(error_quantile(DISTS[4], LEVELS),
                               5 * (stats.beta(2, 5).ppf(LEVELS) - 0.5), rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(error_quantile(DISTS[5], LEVELS),
                               np.log(stats.expon.ppf(LEVELS)), rtol=1e-12)


def test_distribution_validation_and_parsing():
    with pytest.raises(DomainError):
        ErrorDistribution("cauchy")
    with pytest.raises(DomainError):
        ErrorDistribution("beta_shifted", alpha=0)
    assert parse_distribution("beta:0.5,0.5") == DISTS[3]
    assert parse_distribution("t") == DISTS[1]
    assert parse_distribution("logexp") == DISTS[5]
    for bad in ("beta:1", "gumbel"):
        with pytest.raises(ParseError):
            parse_distribution(bad)


def test_theoretical_quantile():
    x = np.linspace(0, 1, 7)
    np.testing.assert_allclose(theoretical_quantile(x, 0.5, DISTS[0]), 1 + 3 * x)
    for dist in DISTS:
        e = error_quantile(dist, 0.3)
        assert theoretical_quantile(0.0, 0.3, dist) == pytest.approx(1 + e)
    # logistic errors: exactly A b(q) with the logistic basis
    A = np.array([[1.0, 1.0, -1.0], [3.0, 2.0, -2.0]])
    q = np.array([0.02, 0.3, 0.77])
    np.testing.assert_allclose(coefficient_function(A, logistic(), q),
                               hetero_coefficients(q, DISTS[-1]), atol=1e-12)


def test_sample_hetero():
    a, b = sample_hetero(DISTS[0], 50, 9), sample_hetero(DISTS[0], 50, 9)
    np.testing.assert_array_equal(a.y, b.y)
    s = sample_hetero(DISTS[3], 5000, 1)
    e = (s.y - 1 - 3 * s.x) / (1 + 2 * s.x)
    assert np.all(np.abs(e) <= 2.5 + 1e-12)
    s = sample_hetero(DISTS[0], 100_000, 2)
    near = np.abs(s.x - 0.5) < 0.01
    assert np.median(s.y[near]) == pytest.approx(2.5, abs=0.1)


def test_imse():
    truth = np.arange(5.0)
    assert imse(np.tile(truth, (3, 1)), truth) == 0.0
    assert imse(np.tile(truth + 0.2, (4, 1)), truth) == pytest.approx(5 * 0.04)
    P = np.array([[1.0, 2.0], [0.0, 0.0]])
    assert imse(P, np.zeros((2, 2))) == pytest.approx(2.5)
    with pytest.raises(DomainError):
        imse(np.zeros((2, 3)), np.zeros(4))


def test_gg_conversion():
    assert gg_convert(1, 1, 1) == (0.0, 1.0, 1)
    assert gg_convert(np.e, 1, 1)[0] == pytest.approx(1.0)
    rng = np.random.default_rng(0)
    th, be, k = rng.uniform(0.1, 5, (3, 100))
    back = gg_from_mu(*gg_convert(th, be, k))
    assert np.max(np.abs(back[0] - th)) <= 1e-12 and np.max(np.abs(back[1] - be)) <= 1e-12
    with pytest.raises(DomainError):
        gg_convert(-1, 1, 1)


def test_gg_pdf():
    y = np.linspace(0.1, 5, 20)
    np.testing.assert_allclose(gg_pdf(y, 1, 1, 1), np.exp(-y), rtol=1e-13)
    np.testing.assert_allclose(gg_pdf(y, 2.0, 1.0, 3.0), stats.gamma(3, scale=2).pdf(y), rtol=1e-12)
    assert gg_pdf(-1.0, 1, 1, 1) == 0.0 and gg_pdf(0.0, 1, 1, 1) == 0.0
    total = quad(lambda t: gg_pdf(t, 2, 1.5, 3), 0, np.inf)[0]
    assert abs(total - 1) <= 1e-6


def test_gamma_quantile_examples():
    assert gamma_quantile(0.5, 1) == pytest.approx(np.log(2), abs=1e-12)
    np.testing.assert_allclose(gamma_quantile([0.1, 0.9], 1), [0.1053605157, 2.302585093],
                               rtol=1e-9)
    assert gamma_quantile(0.5, 2) == pytest.approx(1.6783469900, abs=1e-9)
    q = np.linspace(0.001, 0.999, 999)
    np.testing.assert_allclose(gamma_quantile(q, 1.0), -np.log1p(-q), atol=1e-10)


@pytest.mark.parametrize("k", [0.03, 0.3, 1.0, 7.5, 1e3, 1e8])
def test_gamma_quantile_inverse_contract(k):
    from scipy.special import gammainc
    q = np.linspace(0.001, 0.999, 999)
    assert np.max(np.abs(gammainc(k, gamma_quantile(q, k)) - q)) <= 1e-10


def test_gg_quantile():
    assert gg_quantile(0.5, 0.0, 1.0, 1.0) == pytest.approx(np.log(2), rel=1e-12)
    q = np.linspace(0.01, 0.99, 99)
    v = gg_quantile(q, 0.3, 0.7, 2.5)
    assert np.all(np.diff(v) > 0)
    np.testing.assert_allclose(gg_quantile(q, 0.3 + 0.4, 0.7, 2.5), np.exp(0.4) * v, rtol=1e-12)


def test_gg_quantile_consistent_with_pdf():
    mu, sigma, k = 0.2, 0.6, 1.7
    theta, beta, _ = gg_from_mu(mu, sigma, k)
    for q in (0.1, 0.5, 0.9):
        yq = gg_quantile(q, mu, sigma, k)
        assert quad(lambda t: gg_pdf(t, theta, beta, k), 0, yq)[0] == pytest.approx(q, abs=1e-6)


def test_gg_quantile_large_shape_is_finite():
    # parameter set 1 reaches k ~ 8e10 at x = 6
    x = np.array([0.0, 3.0, 6.0])
    v = GG_SET_1.quantile(x, 0.5)
    assert np.all(np.isfinite(v) & (v > 0))


def test_gg_sample():
    s = gg_sample(GG_SET_2, 500, 3)
    assert np.all(s.y > 0) and np.all((s.x >= 0) & (s.x <= 1))
    np.testing.assert_array_equal(s.y, gg_sample(GG_SET_2, 500, 3).y)
    s1 = gg_sample(GG_SET_1, 200, 1)
    assert np.all((s1.x >= 0) & (s1.x <= 6))


def test_gg_conditional_median_monte_carlo():
    rng = np.random.default_rng(4)
    u = rng.uniform(size=100_000)
    draws = GG_SET_2.quantile(np.full(u.size, 0.5), u)
    assert np.median(draws) == pytest.approx(GG_SET_2.quantile(0.5, 0.5), abs=0.01)


def test_parse_estimator():
    assert parse_estimator("separate") == Estimator("separate")
    e = parse_estimator("joint ns:0.1,0.5,0.9 xknots=seq3")
    assert e.basis == "ns:0.1,0.5,0.9" and e.xknots == "seq3"
    assert parse_estimator("dk h1=0.6").h1 == 0.6
    for bad in ("", "joint cubic", "dk bw=3", "separate extra"):
        with pytest.raises(ParseError):
            parse_estimator(bad)


def test_parse_scenario():
    sc = parse_scenario("""
        # normal errors
        model = hetero
        dist = "normal"
        n = 100
        N = 4
        seed = 7
        quantiles = 0.25, 0.5
        estimators = separate; joint logistic; dk h1=0.2
    """)
    assert (sc.n, sc.N, sc.seed, sc.quantiles) == (100, 4, 7, (0.25, 0.5))
    assert [e.method for e in sc.estimators] == ["separate", "joint", "dk"]
    gg = parse_scenario("model = gg\ngg = 2\n")
    assert gg.gg == GG_SET_2
    for bad in ("n = ten", "colour = red", "just text", "model = gauss"):
        with pytest.raises((ParseError, DomainError)):
            parse_scenario(bad)


SMALL = """dist = normal
n = 60
N = 3
seed = 11
quantiles = 0.25, 0.5
estimators = separate; joint logistic; dk h1=0.2
grid = 49
"""


def test_run_scenario_deterministic_and_schedule_free():
    sc = parse_scenario(SMALL)
    a = run_scenario(sc)
    b = run_scenario(sc, threads=3)
    assert a.to_csv() == b.to_csv()
    np.testing.assert_array_equal(a.per_replicate[1], run_replicate(sc, 1))
    assert a.methods == ["separate", "joint logistic", "dk h1=0.2 h2=0.0001"]
    assert np.all(a.values > 0)


def test_scenario_validation():
    with pytest.raises(DomainError):
        Scenario(n=1)
    with pytest.raises(DomainError):
        Scenario(quantiles=(0.5, 1.0))


def test_gg_scenario_runs():
    sc = parse_scenario("model = gg\ngg = 1\nn = 80\nN = 1\nquantiles = 0.5\n"
                        "estimators = joint logistic xknots=seq3; dk h1=0.3\ngrid = 49\n")
    table = run_scenario(sc)
    assert table.values.shape == (2, 1) and np.all(np.isfinite(table.values))
