"""Check losses and the quadratic MM surrogate.

Everything here is vectorized over numpy arrays and free of state.
"""

import numpy as np

from .errors import DomainError

DEFAULT_EPSILON = 1e-10


def check_level(q):
    """Validate a quantile level and return it as a float."""
    q = float(q)
    if not 0.0 < q < 1.0:
        raise DomainError(f"quantile level must lie strictly inside (0, 1), got {q!r}")
    return q


def check_epsilon(eps):
    eps = float(eps)
    if not (eps > 0.0 and np.isfinite(eps)):
        raise DomainError(f"perturbation must be positive and finite, got {eps!r}")
    return eps


def _residuals(r):
    r = np.asarray(r, dtype=float)
    if r.size == 0:
        raise DomainError("residual vector is empty")
    if not np.all(np.isfinite(r)):
        raise DomainError("residuals must be finite")
    return r


def check_loss(q, r):
    """Pinball loss ``q*r - r*1{r<0}``, elementwise.

    Returns a float for scalar input and an array otherwise.
    """
    q = check_level(q)
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise DomainError("residuals must be finite")
    out = np.where(r < 0, (q - 1.0) * r, q * r)
    return float(out) if out.ndim == 0 else out


def total_loss(q, residuals):
    """Sum of check losses over a residual vector."""
    r = _residuals(residuals)
    return float(np.sum(check_loss(q, r)))


def perturbed_terms(q, r, eps=DEFAULT_EPSILON):
    """Per-residual perturbed loss ``rho_q(r) - (eps/2) ln(eps + |r|)``."""
    eps = check_epsilon(eps)
    r = np.asarray(r, dtype=float)
    return check_loss(q, r) - 0.5 * eps * np.log(eps + np.abs(r))


def perturbed_loss(q, residuals, eps=DEFAULT_EPSILON):
    """Smooth approximation of :func:`total_loss` that keeps MM weights finite.

    Parameters
    ----------
    q : float
        Quantile level in (0, 1).
    residuals : array_like
        Nonempty, finite residual vector.
    eps : float
        Positive perturbation; the gap to the exact loss is
        ``(eps/2) * sum(ln(eps + |r_i|))``.
    """
    r = _residuals(residuals)
    return float(np.sum(perturbed_terms(q, r, eps)))


def surrogate_value(q, r, r_prev, eps=DEFAULT_EPSILON):
    """Quadratic majorizer of the perturbed loss, anchored at ``r_prev``.

    The additive constant is fixed by requiring equality with the perturbed
    loss at ``r = r_prev``, so the value is written relative to that anchor:

        rho_eps(r_prev) + [(r^2 - r_prev^2) / (eps + |r_prev|)
                           + (4q - 2)(r - r_prev)] / 4

    which is algebraically the textbook form with the constant expanded.
    """
    q = check_level(q)
    eps = check_epsilon(eps)
    r = np.asarray(r, dtype=float)
    r_prev = np.asarray(r_prev, dtype=float)
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(r_prev))):
        raise DomainError("surrogate inputs must be finite")
    anchor = perturbed_terms(q, r_prev, eps)
    quad = (r - r_prev) * (r + r_prev) / (eps + np.abs(r_prev))
    out = anchor + 0.25 * (quad + (4.0 * q - 2.0) * (r - r_prev))
    return float(out) if np.ndim(out) == 0 else out


def surrogate_constant(q, r_prev, eps=DEFAULT_EPSILON):
    """The constant term that makes the surrogate touch the loss at ``r_prev``."""
    r_prev = np.asarray(r_prev, dtype=float)
    return (4.0 * perturbed_terms(q, r_prev, eps)
            - r_prev ** 2 / (eps + np.abs(r_prev))
            - (4.0 * q - 2.0) * r_prev)
