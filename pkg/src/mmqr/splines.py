"""Natural-spline transforms of covariates and k-fold CV loss.

A continuous covariate x is replaced by the columns ``1, x, S_1(x), ...,
S_{m-2}(x)`` built from m knots on the covariate scale (same truncated-power
form as the quantile basis). The transformed design is then fitted jointly
over quantile levels with :func:`mmqr.simultaneous.fit_simultaneous`.
"""

import numpy as np

from .basis import natural_spline_columns
from .errors import DomainError, ParseError, SingularMatrixError
from .loss import check_level, check_loss
from .separate import Dataset, FitConfig
from .simultaneous import fit_simultaneous

# Knot set used for the rescaled (0, 1) covariate in the asymmetric examples.
ASYM7 = (0.2, 0.4, 0.5, 0.55, 0.6, 0.7, 0.9)

DEFAULT_VALIDATION_Q = tuple(np.round(np.arange(1, 10) / 10.0, 10))


def equally_spaced_knots(x, m):
    """``m`` equally spaced knots from ``min(x)`` to ``max(x)``."""
    x = np.asarray(x, dtype=float)
    if m < 3:
        raise DomainError(f"natural splines need at least 3 knots, got {m}")
    lo, hi = float(np.min(x)), float(np.max(x))
    if not hi > lo:
        raise SingularMatrixError("covariate is constant; cannot place knots", pivot=1)
    return np.linspace(lo, hi, m)


def parse_knots(text, x=None):
    """Knots from ``"seqH"``, ``"asym7"`` or an explicit ``"k1,k2,..."`` list.

    ``seqH`` means H equally spaced interior knots strictly between the
    observed minimum and maximum of ``x``, which are added as boundary knots
    (H + 2 knots, H + 2 columns after the transform). This is the same
    convention as ``ns:seqH`` for the quantile basis. Explicit lists and
    ``asym7`` are used as the full knot vector.
    """
    text = str(text).strip()
    if text.startswith("seq"):
        try:
            h = int(text[3:])
        except ValueError:
            raise ParseError(f"bad knot count in {text!r}") from None
        if h < 1:
            raise DomainError(f"'seqH' needs at least one interior knot, got {text!r}")
        if x is None:
            raise DomainError("'seqH' knots need the covariate values")
        return equally_spaced_knots(x, h + 2)
    if text == "asym7":
        return np.array(ASYM7)
    try:
        return np.array([float(s) for s in text.split(",") if s.strip()])
    except ValueError:
        raise ParseError(f"bad knot list {text!r}") from None


def transform_covariate(x, knots, check_range=True):
    """Columns ``(1, x, S_1(x), ..., S_{m-2}(x))`` for one covariate.

    Knots must be strictly increasing and at least three. When building a
    training design they must also lie inside the observed range of ``x``;
    pass ``check_range=False`` to evaluate the transform at new points.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    knots = np.asarray(knots, dtype=float).reshape(-1)
    if knots.size < 3:
        raise DomainError(f"natural splines need at least 3 knots, got {knots.size}")
    if not np.all(np.isfinite(x)):
        raise DomainError("covariate contains non-finite values")
    if not check_range:
        return natural_spline_columns(x, knots)
    lo, hi = float(np.min(x)), float(np.max(x))
    if not hi > lo:
        raise SingularMatrixError("covariate is constant; spline columns are collinear",
                                  pivot=1)
    slack = 1e-12 * max(1.0, abs(lo), abs(hi))
    if knots[0] < lo - slack or knots[-1] > hi + slack:
        raise DomainError(f"knots must lie in the observed range [{lo}, {hi}]")
    return natural_spline_columns(x, knots)


def transform_design(covariates, knots):
    """Transform each column of ``covariates`` and join the blocks.

    ``knots`` is one knot spec (array or string) shared by every column or a
    list with one per column. The result has a single leading intercept.
    """
    C = np.asarray(covariates, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    d = C.shape[1]
    if isinstance(knots, str) or all(np.isscalar(k) and not isinstance(k, str) for k in knots):
        knots = [knots] * d
    if len(knots) != d:
        raise DomainError(f"{len(knots)} knot specs for {d} covariates")
    blocks = [np.ones((C.shape[0], 1))]
    for j in range(d):
        kj = parse_knots(knots[j], C[:, j]) if isinstance(knots[j], str) else knots[j]
        blocks.append(transform_covariate(C[:, j], kj)[:, 1:])
    return np.hstack(blocks)


def kfold_split(n, folds=10, seed=0):
    """Random balanced partition of ``range(n)`` into ``folds`` groups."""
    n, folds = int(n), int(folds)
    if folds < 2:
        raise DomainError("need at least 2 folds")
    if n < folds:
        raise DomainError(f"n={n} is smaller than the number of folds {folds}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(g) for g in np.array_split(perm, folds)]


def cv_loss(data, spec, grid=None, folds=None, validation_q=DEFAULT_VALIDATION_Q, cfg=None,
            seed=0):
    """Held-out check loss summed over folds and validation levels.

    For each group G_g the coefficient functions are refitted without it and
    ``rho_q(y_i - x_i' beta(q))`` is summed over i in G_g and each q in
    ``validation_q``. Knots of an already transformed design are fixed.
    """
    if folds is None:
        folds = kfold_split(data.n, 10, seed)
    idx = np.concatenate(folds)
    if idx.size != data.n or np.unique(idx).size != data.n:
        raise DomainError("folds must partition the observations")
    levels = np.array([check_level(q) for q in validation_q])
    cfg = cfg or FitConfig()
    parts = []
    for held in folds:
        mask = np.ones(data.n, dtype=bool)
        mask[held] = False
        train = Dataset(data.y[mask], data.X[mask], data.names)
        fit = fit_simultaneous(train, spec, grid, cfg, check_monotone=False)
        pred = fit.predict(data.X[held], levels)            # (|G_g|, J)
        resid = data.y[held][:, None] - pred
        parts.append(sum(float(np.sum(check_loss(q, resid[:, j])))
                         for j, q in enumerate(levels)))
    return float(sum(parts))
