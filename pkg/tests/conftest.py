import numpy as np
import pytest
from scipy.optimize import linprog

from mmqr.separate import Dataset


def random_dataset(rng, n, p):
    """Intercept plus p-1 uniform covariates with heteroscedastic noise."""
    Z = rng.uniform(0.0, 1.0, (n, p - 1))
    beta = rng.normal(0.0, 2.0, p)
    X = np.column_stack([np.ones(n), Z])
    y = X @ beta + (1.0 + Z.sum(axis=1)) * rng.standard_normal(n)
    return Dataset(y, X)


def lp_quantile_fit(X, y, q):
    """Exact minimizer of the check loss via its linear-programming form.

    min q 1'u + (1-q) 1'v  s.t.  X b + u - v = y,  u, v >= 0.
    """
    n, p = X.shape
    c = np.concatenate([np.zeros(p), np.full(n, q), np.full(n, 1.0 - q)])
    A = np.hstack([X, np.eye(n), -np.eye(n)])
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    res = linprog(c, A_eq=A, b_eq=y, bounds=bounds, method="highs")
    assert res.status == 0
    return res.x[:p], res.fun


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdicts at the end of the run."""
    import sys
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        terminalreporter.write_line(results[num])
