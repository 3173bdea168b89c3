"""Check loss, its smooth perturbation, and one MM fit, step by step."""
# %%
import numpy as np

from mmqr import FitConfig, Dataset, fit_quantile
from mmqr.loss import check_loss, perturbed_terms, surrogate_value

# The check loss tilts the absolute value: positive residuals cost q, negative 1-q.
r = np.linspace(-2, 2, 9)
print("r           ", r)
print("rho_0.25(r) ", check_loss(0.25, r))

# %%
# The perturbed loss subtracts (eps/2) ln(eps + |r|) so the majorizer below is
# defined even when a residual is exactly zero.  With eps = 1e-10 the gap is
# (eps/2) ln(eps + |r|): invisible at |r| = 1, a few 1e-10 for tiny residuals.
for r0 in (1.0, 1e-3, 0.0):
    print(f"gap at r={r0:<6g}", check_loss(0.25, r0) - perturbed_terms(0.25, r0, 1e-10))

# %%
# A quadratic surrogate anchored at r_prev lies above the loss and touches it
# at the anchor.  Minimizing it is a weighted least squares problem.
r_prev = 0.7
grid = np.linspace(-3, 3, 7)
print("surrogate - loss:", surrogate_value(0.25, grid, r_prev) - perturbed_terms(0.25, grid))
print("at the anchor   :", surrogate_value(0.25, r_prev, r_prev) - perturbed_terms(0.25, r_prev))

# %%
# Fit the median of y = 1 + 2x + noise.  Each MM step lowers the objective.
rng = np.random.default_rng(0)
x = rng.uniform(size=200)
y = 1 + 2 * x + rng.standard_t(3, 200)
data = Dataset.with_intercept(y, x, ["x"])
fit = fit_quantile(data, 0.5, FitConfig(max_iter=500))
print("theta       ", fit.theta)
print("iterations  ", fit.iterations, "converged", fit.converged)
print("first losses", np.round(fit.history[:5], 4))
print("monotone    ", bool(np.all(np.diff(fit.history) <= 1e-12 * np.abs(fit.history[1:]))))
