"""Double-kernel conditional CDF, quantile and density estimates.

Observations are weighted by a normal kernel in x with bandwidth ``h1`` and
each indicator ``1{y_i <= y}`` is smoothed into ``Phi((y - y_i) / h2)``:

    F(y | x) = sum_i w_i(x) Phi((y - y_i) / h2),
    f(y | x) = sum_i w_i(x) phi((y - y_i) / h2) / h2.

The 1/h2 factor makes f a proper density. Bandwidths are chosen by
leave-one-out likelihood cross-validation, evaluated in log space.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, ndtr, ndtri

from .errors import DomainError, NumericError
from .loss import check_level

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class PointSample:
    """Pairs (x_i, y_i) with a single real covariate."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if x.size != y.size or x.size == 0:
            raise DomainError(f"need equally long nonempty x and y, got {x.size} and {y.size}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DomainError("sample contains non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.x.size


@dataclass(frozen=True)
class KernelConfig:
    h1: float
    h2: float = 1e-4

    def __post_init__(self):
        if not (self.h1 > 0 and self.h2 > 0 and np.isfinite(self.h1) and np.isfinite(self.h2)):
            raise DomainError(f"bandwidths must be positive, got h1={self.h1}, h2={self.h2}")


def _log_kernel(sample, x, h1):
    z = (sample.x[None, :] - np.asarray(x, dtype=float).reshape(-1, 1)) / h1
    return -0.5 * z * z


def kernel_weights(sample, x, h1):
    """Normalized normal-kernel weights ``w_i(x)``; one row per entry of ``x``.

    Normalization is done in log space, so weights of far-away points may
    round to zero but the nearest point always keeps a positive weight.
    """
    if not h1 > 0:
        raise DomainError("h1 must be positive")
    scalar = np.ndim(x) == 0
    logk = _log_kernel(sample, x, h1)
    w = np.exp(logk - logk.max(axis=1, keepdims=True))
    total = w.sum(axis=1, keepdims=True)
    if not np.all(np.isfinite(total)):
        raise NumericError("kernel weights are not finite; check x and h1")
    w = w / total
    return w[0] if scalar else w


def dk_cdf(sample, x, y, cfg):
    """Smoothed conditional CDF at the scalar covariate ``x`` for each ``y``."""
    w = kernel_weights(sample, float(x), cfg.h1)
    y = np.asarray(y, dtype=float)
    out = ndtr((y[..., None] - sample.y) / cfg.h2) @ w
    return float(out) if out.ndim == 0 else out


def dk_pdf(sample, x, y, cfg):
    w = kernel_weights(sample, float(x), cfg.h1)
    y = np.asarray(y, dtype=float)
    z = (y[..., None] - sample.y) / cfg.h2
    out = (np.exp(-0.5 * z * z - LOG_SQRT_2PI) @ w) / cfg.h2
    return float(out) if out.ndim == 0 else out


def _invert(ys, cw, w, order, q, h2, tol, max_iter):
    """Bisection for one weight vector; ``ys`` is y sorted, ``cw`` cumulative weights."""
    # The root lies within 8*h2 of the first sorted y whose cumulative weight reaches q.
    j = min(int(np.searchsorted(cw, q)), ys.size - 1)
    lo, hi = ys[j] - 8.0 * h2, ys[j] + 8.0 * h2

    def window(a, b):
        # Terms with y_i far below contribute w_i, far above 0 (to < 1e-18).
        s = int(np.searchsorted(ys, a - 9.0 * h2))
        e = int(np.searchsorted(ys, b + 9.0 * h2, side="right"))
        return (cw[s - 1] if s > 0 else 0.0), ys[s:e], w[order[s:e]]

    base, yy, ww = window(lo, hi)

    def F(t):
        return base + float(ndtr((t - yy) / h2) @ ww)

    expand = 0
    while F(lo) > q or F(hi) < q:
        expand += 1
        if expand > 60:
            raise NumericError(f"could not bracket the {q}-quantile")
        width = hi - lo
        lo, hi = lo - width, hi + width
        base, yy, ww = window(lo, hi)
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = F(mid)
        if abs(fm - q) <= tol or not lo < mid < hi:
            break
        if fm < q:
            lo = mid
        else:
            hi = mid
    return mid


def dk_quantile(sample, x, q, cfg, tol=1e-12, max_iter=200):
    """Invert the smoothed CDF at covariate value(s) ``x`` by bisection.

    The result has shape ``(len(x), len(q))``; a scalar ``x`` or ``q``
    drops its axis. The bracket starts at ``y_(j) -/+ 8 h2`` around the
    first sorted response whose cumulative weight reaches q, and iteration
    stops when ``|F - q| <= tol`` or the bracket reaches float resolution.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    qs = np.atleast_1d(np.asarray(q, dtype=float))
    for level in qs:
        check_level(level)
    order = np.argsort(sample.y, kind="stable")
    ys = sample.y[order]
    W = kernel_weights(sample, xs, cfg.h1)
    out = np.empty((xs.size, qs.size))
    for a in range(xs.size):
        w = W[a]
        cw = np.cumsum(w[order])
        for b, level in enumerate(qs):
            out[a, b] = _invert(ys, cw, w, order, level, cfg.h2, tol, max_iter)
    if np.ndim(q) == 0:
        out = out[:, 0]
    if np.ndim(x) == 0:
        out = out[0]
    return float(out) if np.ndim(out) == 0 else out


def single_point_quantile(y1, q, h2):
    """Closed form for n = 1: ``y_1 + h2 * Phi^{-1}(q)``."""
    return y1 + h2 * float(ndtri(check_level(q)))


def lcv_terms(sample, cfg):
    """Leave-one-out log densities ``ln f^(-j)(y_j | x_j)`` for every j."""
    n = sample.n
    if n < 2:
        raise DomainError("leave-one-out CV needs at least 2 points")
    logk = _log_kernel(sample, sample.x, cfg.h1)     # row j: kernel around x_j
    np.fill_diagonal(logk, -np.inf)
    logw = logk - logsumexp(logk, axis=1, keepdims=True)
    z = (sample.y[:, None] - sample.y[None, :]) / cfg.h2
    with np.errstate(over="ignore"):
        logphi = -0.5 * z * z - LOG_SQRT_2PI - np.log(cfg.h2)
    np.fill_diagonal(logphi, 0.0)
    terms = logsumexp(logw + logphi, axis=1)
    return terms


def lcv_log_likelihood(sample, cfg):
    """Sum of leave-one-out log predictive densities (larger is better).

    Returns ``-inf`` if some held-out density is exactly zero; the first such
    index is reported in a warning.
    """
    terms = lcv_terms(sample, cfg)
    bad = np.flatnonzero(~np.isfinite(terms))
    if bad.size:
        warnings.warn(f"leave-one-out density is zero at index {int(bad[0])}", RuntimeWarning,
                      stacklevel=2)
        return -np.inf
    return float(np.sum(terms))
