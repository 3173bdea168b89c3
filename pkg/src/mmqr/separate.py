"""Single-quantile regression by majorize-minimize (iteratively reweighted LS).

Each iteration replaces the perturbed check loss by its quadratic majorizer
at the current residuals and minimizes that in closed form:

    theta_new = (X' W X)^{-1} (X' W y + X' c / 2),
    W = diag(1 / (eps + |r_i|)),   c_i = 4q - 2.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import lapack

from .errors import DomainError, SingularMatrixError
from .loss import DEFAULT_EPSILON, check_epsilon, check_level, perturbed_loss

RANK_PIVOT_TOL = 1e-12


def _cholesky_scaled(M):
    """Cholesky of the Jacobi-equilibrated matrix; returns (factor, scale)."""
    d = np.diag(M).copy()
    if np.any(~np.isfinite(d)) or np.any(d <= 0):
        bad = int(np.flatnonzero(~(d > 0))[0]) if np.any(~(d > 0)) else 0
        raise SingularMatrixError(f"matrix is not positive definite (pivot {bad})", pivot=bad)
    s = 1.0 / np.sqrt(d)
    C = M * s[:, None] * s[None, :]
    L, info = lapack.dpotrf(C, lower=1, clean=1)
    if info > 0:
        raise SingularMatrixError(
            f"matrix is not positive definite: factorization failed at pivot {info - 1}",
            pivot=info - 1)
    if info < 0:
        raise DomainError("invalid matrix passed to Cholesky factorization")
    return L, s


def _cho_apply(L, s, b):
    x, info = lapack.dpotrs(L, b * s, lower=1)
    return x * s


def solve_spd(M, b):
    """Solve ``M v = b`` for symmetric positive definite ``M``.

    The matrix is symmetrically rescaled to unit diagonal before the Cholesky
    factorization, and one step of iterative refinement is applied.
    Raises :class:`SingularMatrixError` naming the failing pivot otherwise.
    """
    M = np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or b.shape[0] != M.shape[0]:
        raise DomainError(f"incompatible shapes {M.shape} and {b.shape}")
    L, s = _cholesky_scaled(M)
    v = _cho_apply(L, s, b)
    v = v + _cho_apply(L, s, b - M @ v)
    return v


def check_full_rank(X, names=None, tol=RANK_PIVOT_TOL):
    """Raise :class:`SingularMatrixError` when ``X`` lacks full column rank.

    Columns are normalized to unit length and the Gram matrix is factorized;
    a pivot below ``tol`` marks a column that is (numerically) a combination
    of the earlier ones. The message names that column and its partners.
    """
    X = np.asarray(X, dtype=float)
    p = X.shape[1]
    if names is None:
        names = [f"x{j}" for j in range(p)]
    norms = np.linalg.norm(X, axis=0)
    for j in np.flatnonzero(norms == 0):
        raise SingularMatrixError(f"column {names[j]!r} is identically zero", pivot=int(j))
    Z = X / norms
    G = Z.T @ Z
    for j in range(p):
        # Schur complement of column j against columns 0..j-1
        if j == 0:
            continue
        A = G[:j, :j]
        g = G[:j, j]
        coef = np.linalg.lstsq(A, g, rcond=None)[0]
        pivot = G[j, j] - g @ coef
        if pivot <= tol:
            partners = [names[k] for k in np.flatnonzero(np.abs(coef) > 1e-8)]
            raise SingularMatrixError(
                f"design is rank deficient: column {names[j]!r} is a linear "
                f"combination of {partners}", pivot=j)


@dataclass(frozen=True)
class Dataset:
    """Response ``y`` (n,) and design ``X`` (n, p); the intercept is a column of X."""

    y: np.ndarray
    X: np.ndarray
    names: Optional[Sequence[str]] = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        n, p = X.shape
        if y.shape[0] != n:
            raise DomainError(f"y has {y.shape[0]} rows but X has {n}")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise DomainError("dataset contains non-finite values")
        if not n > p >= 1:
            raise DomainError(f"need n > p >= 1, got n={n}, p={p}")
        names = list(self.names) if self.names is not None else None
        if names is not None and len(names) != p:
            raise DomainError(f"{len(names)} names for {p} columns")
        check_full_rank(X, names)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", names)

    @classmethod
    def with_intercept(cls, y, covariates, names=None):
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates[:, None]
        X = np.column_stack([np.ones(covariates.shape[0]), covariates])
        if names is not None:
            names = ["intercept", *names]
        return cls(y, X, names)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


@dataclass
class FitConfig:
    """Iteration controls shared by every MM fitter.

    ``init`` is ``"ols"``, ``"zeros"`` or an explicit starting vector.
    ``obj_tol``, when set, also stops once an update lowers the objective by
    less than ``obj_tol * max(1, |objective|)``.
    """

    epsilon: float = DEFAULT_EPSILON
    max_iter: int = 10_000
    tol: float = 1e-10
    init: Union[str, np.ndarray] = "ols"
    obj_tol: Optional[float] = None

    def stalled(self, before, after):
        return self.obj_tol is not None and before - after <= self.obj_tol * max(1.0, abs(after))

    def __post_init__(self):
        check_epsilon(self.epsilon)
        if int(self.max_iter) < 1:
            raise DomainError("max_iter must be at least 1")
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.obj_tol is not None and not self.obj_tol > 0:
            raise DomainError("obj_tol must be positive when set")
        self.max_iter = int(self.max_iter)


@dataclass
class QuantileFit:
    theta: np.ndarray
    iterations: int
    final_perturbed_loss: float
    converged: bool
    q: float = 0.5
    history: list = field(default_factory=list, repr=False)


def mm_weights(residuals, eps=DEFAULT_EPSILON):
    """IRLS weights ``1 / (eps + |r_i|)``; each lies in ``(0, 1/eps]``."""
    eps = check_epsilon(eps)
    return 1.0 / (eps + np.abs(np.asarray(residuals, dtype=float)))


def normal_system(X, y, q, theta_t, eps):
    r = y - X @ theta_t
    w = mm_weights(r, eps)
    Xw = X * w[:, None]
    M = Xw.T @ X
    v = Xw.T @ y + 0.5 * (4.0 * q - 2.0) * X.sum(axis=0)
    return M, v


def mm_step(data, q, theta_t, eps=DEFAULT_EPSILON):
    """One MM update for the linear model at quantile level ``q``."""
    q = check_level(q)
    eps = check_epsilon(eps)
    theta_t = np.asarray(theta_t, dtype=float).reshape(-1)
    if theta_t.shape[0] != data.p or not np.all(np.isfinite(theta_t)):
        raise DomainError("theta_t must be a finite vector of length p")
    M, v = normal_system(data.X, data.y, q, theta_t, eps)
    return solve_spd(M, v)


def ols(data):
    return solve_spd(data.X.T @ data.X, data.X.T @ data.y)


def initial_theta(data, init):
    if isinstance(init, str):
        if init == "ols":
            return ols(data)
        if init == "zeros":
            return np.zeros(data.p)
        raise DomainError(f"unknown initializer {init!r}")
    theta = np.asarray(init, dtype=float).reshape(-1)
    if theta.shape[0] != data.p:
        raise DomainError(f"initial vector has length {theta.shape[0]}, expected {data.p}")
    return theta


def fit_quantile(data, q, cfg=None):
    """Fit the linear ``q``-th quantile regression by iterating :func:`mm_step`.

    Stops when the largest absolute parameter change drops below ``cfg.tol``
    or after ``cfg.max_iter`` updates. ``history`` holds the perturbed loss
    at the start and after every update.
    """
    cfg = cfg or FitConfig()
    q = check_level(q)
    theta = initial_theta(data, cfg.init)
    loss = perturbed_loss(q, data.y - data.X @ theta, cfg.epsilon)
    history = [loss]
    converged = False
    it = 0
    while it < cfg.max_iter:
        new = mm_step(data, q, theta, cfg.epsilon)
        it += 1
        step = np.max(np.abs(new - theta))
        theta = new
        loss = perturbed_loss(q, data.y - data.X @ theta, cfg.epsilon)
        history.append(loss)
        if step < cfg.tol or cfg.stalled(history[-2], loss):
            converged = True
            break
    return QuantileFit(theta=theta, iterations=it, final_perturbed_loss=loss,
                       converged=converged, q=q, history=history)
