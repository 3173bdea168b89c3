"""Bases b(q) for quantile coefficient functions beta(q) = A b(q).

Two families are supported: the logistic basis ``(1, ln q, ln(1-q))`` and
natural cubic splines in truncated-power form. The spline builder is also
used on covariates (see :mod:`mmqr.splines`).
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DomainError, ParseError


def _tp3(x):
    return np.maximum(x, 0.0) ** 3


def natural_spline_columns(x, knots):
    """Truncated-power natural cubic spline design, shape ``(len(x), m)``.

    Columns are ``1, x, S_1(x), ..., S_{m-2}(x)`` for ``m`` knots, with

        S_l(x) = (x - k_l)_+^3
                 - (x - k_{m-1})_+^3 (k_m - k_l) / (k_m - k_{m-1})
                 + (x - k_m)_+^3 (k_{m-1} - k_l) / (k_m - k_{m-1}).

    Every S_l is linear beyond the last knot and zero below ``k_l``.
    """
    knots = np.asarray(knots, dtype=float)
    x = np.asarray(x, dtype=float)
    m = knots.shape[0]
    if m < 3:
        raise DomainError(f"natural splines need at least 3 knots, got {m}")
    if np.any(np.diff(knots) <= 0):
        raise DomainError("knots must be strictly increasing")
    k_last, k_prev = knots[-1], knots[-2]
    span = k_last - k_prev
    tail_prev = _tp3(x - k_prev)[..., None]
    tail_last = _tp3(x - k_last)[..., None]
    kl = knots[:-2]
    S = (_tp3(x[..., None] - kl)
         - tail_prev * (k_last - kl) / span
         + tail_last * (k_prev - kl) / span)
    return np.concatenate([np.ones(x.shape + (1,)), x[..., None], S], axis=-1)


@dataclass(frozen=True)
class BasisSpec:
    kind: str = "logistic"
    knots: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "logistic":
            if self.knots:
                raise DomainError("the logistic basis takes no knots")
        elif self.kind == "natural_spline":
            knots = tuple(float(k) for k in self.knots)
            if len(knots) < 3:
                raise DomainError("a natural-spline quantile basis needs at least 3 knots")
            if any(not 0.0 < k < 1.0 for k in knots):
                raise DomainError("quantile-basis knots must lie in (0, 1)")
            if any(b <= a for a, b in zip(knots, knots[1:])):
                raise DomainError("knots must be strictly increasing")
            object.__setattr__(self, "knots", knots)
        else:
            raise DomainError(f"unknown basis kind {self.kind!r}")

    @property
    def dim(self):
        return 3 if self.kind == "logistic" else len(self.knots)

    def __str__(self):
        if self.kind == "logistic":
            return "logistic"
        return "ns:" + ",".join(repr(k) for k in self.knots)


def logistic():
    return BasisSpec("logistic")


def natural_spline(knots):
    return BasisSpec("natural_spline", tuple(knots))


def parse_basis(text):
    """Parse ``"logistic"``, ``"ns:0.1,0.5,0.9"`` or ``"ns:seqH"``.

    ``seqH`` places H equally spaced interior knots in (0, 1), i.e. the
    points ``j / (H + 1)`` for ``j = 1..H``.
    """
    text = text.strip()
    if text == "logistic":
        return logistic()
    if text.startswith("ns:"):
        body = text[3:].strip()
        if body.startswith("seq"):
            try:
                h = int(body[3:])
            except ValueError:
                raise ParseError(f"bad knot count in basis {text!r}") from None
            return natural_spline(np.arange(1, h + 1) / (h + 1))
        try:
            knots = [float(s) for s in body.split(",") if s.strip()]
        except ValueError:
            raise ParseError(f"bad knot list in basis {text!r}") from None
        return natural_spline(knots)
    raise ParseError(f"unrecognized basis {text!r}; use 'logistic' or 'ns:k1,k2,...'")


def _levels(q):
    q = np.asarray(q, dtype=float)
    if np.any(~((q > 0) & (q < 1))):
        raise DomainError("quantile levels must lie strictly inside (0, 1)")
    return q


def eval_basis(spec, q):
    """Evaluate b(q); a scalar ``q`` gives shape ``(h,)``, an array ``(k, h)``."""
    q = _levels(q)
    if spec.kind == "logistic":
        return np.stack([np.ones_like(q), np.log(q), np.log1p(-q)], axis=-1)
    return natural_spline_columns(q, spec.knots)


def basis_matrix(spec, grid):
    """Stack b(q_a) as rows for a grid of distinct levels."""
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if np.unique(grid).size != grid.size:
        raise DomainError("quantile grid contains duplicate levels")
    return eval_basis(spec, grid)


def coefficient_function(A, spec, q):
    """beta(q) = A b(q). Returns ``(p,)`` for scalar q, ``(k, p)`` for arrays."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[1] != spec.dim:
        raise DomainError(f"A has shape {A.shape}; basis needs {spec.dim} columns")
    return eval_basis(spec, q) @ A.T
