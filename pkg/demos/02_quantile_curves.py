"""Coefficient functions over many quantile levels at once.

Data come from Y = 1 + 3X + (1 + 2X) e.  With logistic errors the true
coefficient functions are exact combinations of the logistic basis
(1, ln q, ln(1-q)); with skewed Beta errors they are not, and a natural
spline basis in q does better.
"""
# %%
import numpy as np

from mmqr import Dataset, FitConfig, fit_simultaneous
from mmqr.basis import coefficient_function, logistic, parse_basis
from mmqr.simulation import ErrorDistribution, hetero_coefficients, sample_hetero
from mmqr.simultaneous import default_grid

cfg = FitConfig(max_iter=1000, tol=1e-8, obj_tol=1e-10)
grid = default_grid(99)
levels = np.array([0.1, 0.25, 0.5, 0.75, 0.9])

# %%
dist = ErrorDistribution("logistic")
s = sample_hetero(dist, 1000, seed=1)
data = Dataset.with_intercept(s.y, s.x, ["x"])
fit = fit_simultaneous(data, logistic(), grid, cfg)
print("A (rows: intercept, x; columns: 1, ln q, ln(1-q))")
print(np.round(fit.A, 3))
print("truth is [[1, 1, -1], [3, 2, -2]]")
# The slope row is the noisy one: tail quantiles of (1 + 2x) e are hard to
# pin down, so expect errors of a few tenths in b1 at q = 0.1 with n = 1000.

# %%
print("   q   fitted (b0, b1)   true (b0, b1)")
for q, b, t in zip(levels, fit.coefficients(levels), hetero_coefficients(levels, dist)):
    print(f"{q:5.2f}  {b[0]:7.3f} {b[1]:7.3f}   {t[0]:7.3f} {t[1]:7.3f}")

# %%
# Beta(0.5, 0.5) errors: U-shaped, far from logistic.
dist = ErrorDistribution("beta_shifted", alpha=0.5, beta=0.5)
s = sample_hetero(dist, 500, seed=2)
data = Dataset.with_intercept(s.y, s.x, ["x"])
truth = hetero_coefficients(levels, dist)
for text in ("logistic", "ns:0.1,0.3,0.5,0.7,0.9"):
    spec = parse_basis(text)
    A = fit_simultaneous(data, spec, grid, cfg).A
    err = np.abs(coefficient_function(A, spec, levels) - truth).max()
    print(f"{text:24s} max coefficient error {err:.3f}")
