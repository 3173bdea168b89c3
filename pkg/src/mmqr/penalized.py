"""Adaptive-lasso quantile regression by MM with BIC-based selection of lambda.

The penalty ``lambda * sum_{j>=2} |beta_j| / |beta_tilde_j|`` is majorized by
a quadratic through the AM-GM inequality, with a small ``eps_l`` keeping
the curvature finite when a coefficient reaches zero. The update is

    beta_new = (X'WX + 2 lambda V)^{-1} (X'W y + X'c / 2),
    V = diag(0, 1 / (|beta_tilde_j| (|beta_j| + eps_l))).
"""

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateFitError, DomainError
from .loss import (DEFAULT_EPSILON, check_epsilon, check_level, check_loss, perturbed_loss,
                   surrogate_value)
from .separate import FitConfig, fit_quantile, normal_system, solve_spd

ZERO_GUARD = 1e-12


class DegenerateFitWarning(UserWarning):
    pass


def default_lambda_grid(size=100):
    return np.geomspace(1e-4, 0.999, size)


@dataclass
class PenaltyConfig:
    lambda_grid: Sequence[float] = field(default_factory=default_lambda_grid)
    epsilon_l: float = 1e-10
    active_threshold: float = 1e-6

    def __post_init__(self):
        grid = np.asarray(self.lambda_grid, dtype=float).reshape(-1)
        if grid.size == 0:
            raise DomainError("lambda grid is empty")
        if np.any(~((grid > 0) & (grid < 1))):
            raise DomainError("lambda candidates must lie in (0, 1)")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("lambda grid must be strictly increasing")
        if not self.epsilon_l > 0:
            raise DomainError("epsilon_l must be positive")
        if not self.active_threshold > 0:
            raise DomainError("active_threshold must be positive")
        self.lambda_grid = grid


@dataclass
class PenalizedFit:
    """Penalized estimate; ``active_set`` holds design-column indices of nonzero slopes."""

    beta: np.ndarray
    lam: float
    bic: float
    active_set: tuple
    iterations: int = 0
    converged: bool = False
    history: list = field(default_factory=list, repr=False)


def adaptive_weights(beta_tilde, names=None):
    """Weights ``1/|beta_tilde_j|`` for the slopes (the intercept is skipped)."""
    bt = np.asarray(beta_tilde, dtype=float).reshape(-1)
    slopes = np.abs(bt[1:])
    bad = np.flatnonzero(slopes <= ZERO_GUARD) + 1
    if bad.size:
        labels = [names[j] if names else f"x{j}" for j in bad]
        raise DegenerateFitError(
            f"unpenalized estimate is zero for {labels}; drop or floor these covariates")
    return 1.0 / slopes


def penalty_matrix(beta_t, beta_tilde, eps_l):
    w = adaptive_weights(beta_tilde)
    d = np.zeros(len(beta_t))
    d[1:] = w / (np.abs(np.asarray(beta_t, dtype=float)[1:]) + eps_l)
    return d


def penalized_mm_step(data, q, beta_t, beta_tilde, lam, eps=DEFAULT_EPSILON, eps_l=1e-10):
    q = check_level(q)
    eps = check_epsilon(eps)
    if lam < 0:
        raise DomainError("lambda must be non-negative")
    beta_t = np.asarray(beta_t, dtype=float).reshape(-1)
    M, v = normal_system(data.X, data.y, q, beta_t, eps)
    M[np.diag_indices_from(M)] += 2.0 * lam * penalty_matrix(beta_t, beta_tilde, eps_l)
    return solve_spd(M, v)


def penalized_objective(data, q, beta, beta_tilde, lam, eps=DEFAULT_EPSILON):
    """Perturbed check loss plus the weighted l1 penalty."""
    r = data.y - data.X @ beta
    return perturbed_loss(q, r, eps) + lam * float(np.sum(adaptive_weights(beta_tilde) * np.abs(beta[1:])))


def penalized_surrogate(data, q, beta, beta_t, beta_tilde, lam, eps=DEFAULT_EPSILON, eps_l=1e-10):
    """Value of the (approximate) majorizer at ``beta``, anchored at ``beta_t``."""
    r = data.y - data.X @ beta
    r_t = data.y - data.X @ beta_t
    a = np.abs(np.asarray(beta_t, dtype=float)[1:]) + eps_l
    pen = adaptive_weights(beta_tilde) * (0.5 * a + beta[1:] ** 2 / (2.0 * a))
    return float(np.sum(surrogate_value(q, r, r_t, eps))) + lam * float(np.sum(pen))


def sigma_mle(q, residuals):
    """Scale MLE of the asymmetric Laplace model: mean check loss."""
    r = np.asarray(residuals, dtype=float)
    if r.size == 0:
        raise DomainError("residual vector is empty")
    s = float(np.sum(check_loss(q, r))) / r.size
    if s == 0:
        warnings.warn("all residuals are zero; scale estimate is 0", DegenerateFitWarning,
                      stacklevel=2)
    return s


def bic(q, residuals, active_size, n=None):
    """``ln(sum rho_q(r_i)) + |S| ln(n) / (2n)``."""
    r = np.asarray(residuals, dtype=float)
    n = r.size if n is None else int(n)
    total = float(np.sum(check_loss(q, r)))
    if not total > 0:
        raise DegenerateFitError("total check loss is zero; BIC is undefined")
    return float(np.log(total) + active_size * np.log(n) / (2.0 * n))


def fit_penalized(data, q, lam, beta_tilde, cfg=None, pcfg=None):
    """Iterate :func:`penalized_mm_step` from ``beta_tilde`` until it settles."""
    cfg = cfg or FitConfig()
    pcfg = pcfg or PenaltyConfig()
    q = check_level(q)
    beta_tilde = np.asarray(beta_tilde, dtype=float).reshape(-1)
    adaptive_weights(beta_tilde, data.names)
    if isinstance(cfg.init, str):
        beta = beta_tilde.copy()
    else:
        beta = np.asarray(cfg.init, dtype=float).reshape(-1)
    history = [penalized_objective(data, q, beta, beta_tilde, lam, cfg.epsilon)]
    converged = False
    it = 0
    while it < cfg.max_iter:
        new = penalized_mm_step(data, q, beta, beta_tilde, lam, cfg.epsilon, pcfg.epsilon_l)
        it += 1
        step = np.max(np.abs(new - beta))
        beta = new
        history.append(penalized_objective(data, q, beta, beta_tilde, lam, cfg.epsilon))
        if step < cfg.tol or cfg.stalled(history[-2], history[-1]):
            converged = True
            break
    active = tuple(int(j) for j in np.flatnonzero(np.abs(beta[1:]) > pcfg.active_threshold) + 1)
    value = bic(q, data.y - data.X @ beta, len(active), data.n)
    return PenalizedFit(beta=beta, lam=float(lam), bic=value, active_set=active,
                        iterations=it, converged=converged, history=history)


def select_lambda(data, q, pcfg=None, cfg=None, beta_tilde=None, return_path=False):
    """Pick lambda from ``pcfg.lambda_grid`` by minimum BIC.

    The unpenalized estimate is computed once with :func:`fit_quantile`
    unless supplied. Ties go to the smallest lambda. Returns
    ``(fit, lambda_opt)``, plus the list of all fits if ``return_path``.
    """
    pcfg = pcfg or PenaltyConfig()
    cfg = cfg or FitConfig()
    q = check_level(q)
    if beta_tilde is None:
        beta_tilde = fit_quantile(data, q, cfg).theta
    adaptive_weights(beta_tilde, data.names)
    path = [fit_penalized(data, q, lam, beta_tilde, cfg, pcfg) for lam in pcfg.lambda_grid]
    best = min(range(len(path)), key=lambda i: (path[i].bic, path[i].lam))
    fit = path[best]
    if return_path:
        return fit, fit.lam, path
    return fit, fit.lam
