"""Joint MM fit of all quantile coefficient functions beta(q) = A b(q).

The parameter vector stacks the columns of the p-by-h matrix A. For a grid
q_1..q_k the per-level design is ``D(q) = b(q)' kron X``; the update solves

    [sum_a D_a' W_a D_a] theta = sum_a (D_a' W_a y + D_a' c_a / 2)

where the left side equals ``sum_a (b_a b_a') kron (X' W_a X)``. Only the
k small Gram matrices X' W_a X are formed; D is never materialized.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSpec, basis_matrix, eval_basis
from .errors import DomainError
from .loss import check_epsilon
from .separate import FitConfig, ols, solve_spd


class MonotonicityWarning(UserWarning):
    """Fitted conditional quantiles decrease in q somewhere on the grid."""


def vec(A):
    """Stack the columns of A: (a_11..a_p1, ..., a_1h..a_ph)."""
    return np.asarray(A, dtype=float).reshape(-1, order="F")


def unvec(theta, p, h):
    theta = np.asarray(theta, dtype=float)
    if theta.size != p * h:
        raise DomainError(f"theta has {theta.size} entries, expected {p}*{h}")
    return theta.reshape((p, h), order="F")


def default_grid(k=999):
    """Equally spaced levels ``1/(k+1), ..., k/(k+1)``."""
    return np.arange(1, k + 1) / (k + 1.0)


def check_grid(grid, n=None, p=None, h=None):
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise DomainError("quantile grid is empty")
    if np.any(~((grid > 0) & (grid < 1))):
        raise DomainError("grid levels must lie strictly inside (0, 1)")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("grid levels must be strictly increasing")
    if n is not None and grid.size * n <= h * p:
        raise DomainError(f"k*n = {grid.size * n} must exceed h*p = {h * p}")
    return grid


def kron_design(X, b):
    """Explicit ``b' kron X`` of shape (n, h*p). Only for small checks."""
    return np.kron(np.asarray(b, dtype=float)[None, :], np.asarray(X, dtype=float))


def design_row_product(X, b, theta):
    """D(q) theta computed as X (A b) without building D(q)."""
    X = np.asarray(X, dtype=float)
    b = np.asarray(b, dtype=float)
    p, h = X.shape[1], b.shape[0]
    return X @ (unvec(theta, p, h) @ b)


def residual_matrix(data, B, theta):
    """Residuals y - X A b(q_a) for all grid levels, shape (n, k)."""
    A = unvec(theta, data.p, B.shape[1])
    return data.y[:, None] - data.X @ (A @ B.T)


def _assemble(X, y, grid, B, R, eps):
    n, p = X.shape
    h = B.shape[1]
    W = 1.0 / (eps + np.abs(R))
    XX = (X[:, :, None] * X[:, None, :]).reshape(n, p * p)
    G = W.T @ XX                                    # (k, p*p): X' W_a X per level
    BB = (B[:, :, None] * B[:, None, :]).reshape(-1, h * h)
    M = (BB.T @ G).reshape(h, h, p, p).transpose(0, 2, 1, 3).reshape(h * p, h * p)
    M = 0.5 * (M + M.T)
    U = (W * y[:, None]).T @ X + 0.5 * (4.0 * grid - 2.0)[:, None] * X.sum(axis=0)
    v = (B.T @ U).reshape(-1)                       # row l*p + j matches vec order
    return M, v


def accumulate_normal_system(data, spec, grid, theta_t, eps):
    """Return the (hp x hp) matrix and hp-vector of the MM normal equations."""
    eps = check_epsilon(eps)
    grid = check_grid(grid)
    B = basis_matrix(spec, grid)
    R = residual_matrix(data, B, theta_t)
    return _assemble(data.X, data.y, grid, B, R, eps)


def mm_step_simultaneous(data, spec, grid, theta_t, eps):
    M, v = accumulate_normal_system(data, spec, grid, theta_t, eps)
    return solve_spd(M, v)


def simultaneous_objective(data, spec, grid, theta, eps):
    """Sum over grid levels of the perturbed loss of r(q_a, theta)."""
    grid = check_grid(grid)
    B = basis_matrix(spec, grid)
    R = residual_matrix(data, B, theta)
    return _objective(R, grid, eps)


def _objective(R, grid, eps):
    rho = np.where(R < 0, (grid - 1.0) * R, grid * R)
    return float(np.sum(rho - 0.5 * eps * np.log(eps + np.abs(R))))


@dataclass
class SimultaneousFit:
    A: np.ndarray
    spec: BasisSpec
    iterations: int
    converged: bool
    history: list = field(default_factory=list, repr=False)

    def coefficients(self, q):
        return eval_basis(self.spec, q) @ self.A.T

    def predict(self, x, q):
        return predict_quantile(self.A, self.spec, x, q)


def initial_params(data, spec, init):
    h = spec.dim
    if isinstance(init, str):
        A = np.zeros((data.p, h))
        if init == "ols":
            A[:, 0] = ols(data)
        elif init != "zeros":
            raise DomainError(f"unknown initializer {init!r}")
        return vec(A)
    theta = np.asarray(init, dtype=float)
    if theta.ndim == 2:
        theta = vec(theta)
    if theta.size != data.p * h:
        raise DomainError(f"initial value has {theta.size} entries, expected {data.p * h}")
    return theta


def fit_simultaneous(data, spec, grid=None, cfg=None, check_monotone=True):
    """Fit A by MM over a quantile grid (default: 999 levels).

    Uses the same stopping rule as :func:`mmqr.separate.fit_quantile`. The
    objective (summed perturbed loss) is recorded in ``history``.
    """
    cfg = cfg or FitConfig()
    grid = default_grid() if grid is None else grid
    grid = check_grid(grid, data.n, data.p, spec.dim)
    eps = cfg.epsilon
    B = basis_matrix(spec, grid)
    theta = initial_params(data, spec, cfg.init)
    R = residual_matrix(data, B, theta)
    history = [_objective(R, grid, eps)]
    converged = False
    it = 0
    while it < cfg.max_iter:
        M, v = _assemble(data.X, data.y, grid, B, R, eps)
        new = solve_spd(M, v)
        it += 1
        step = np.max(np.abs(new - theta))
        theta = new
        R = residual_matrix(data, B, theta)
        history.append(_objective(R, grid, eps))
        if step < cfg.tol or cfg.stalled(history[-2], history[-1]):
            converged = True
            break
    A = unvec(theta, data.p, spec.dim)
    if check_monotone:
        fitted = data.y[:, None] - R
        bad = np.any(np.diff(fitted, axis=1) < -1e-9 * (1 + np.abs(fitted[:, 1:])), axis=1)
        if np.any(bad):
            warnings.warn(f"fitted quantiles decrease in q for {int(bad.sum())} of "
                          f"{data.n} design rows", MonotonicityWarning, stacklevel=2)
    return SimultaneousFit(A=A, spec=spec, iterations=it, converged=converged, history=history)


def predict_quantile(A, spec, x, q):
    """x' A b(q). ``x`` may be one design row or a matrix of rows."""
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    if A.shape[1] != spec.dim or x.shape[-1] != A.shape[0]:
        raise DomainError(f"shapes A {A.shape}, x {x.shape} and basis dim {spec.dim} disagree")
    return x @ (A @ eval_basis(spec, q).T)
