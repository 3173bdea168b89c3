"""Simulation models, theoretical quantiles and the IMSE metric.

Two generative models are provided:

* the heterogeneous linear model ``Y = 1 + 3X + (1 + 2X) e`` with
  ``X ~ U(0, 1)``, whose conditional q-quantile is
  ``[1 + Q_e(q)] + [3 + 2 Q_e(q)] x``;
* a generalized gamma response whose location, scale and shape depend on x
  through ``mu(x) = a + b x``, ``sigma(x) = exp(c + d x)``, ``k(x) = exp(f + g x)``,
  sampled by the inverse-CDF method.

Replicate l of a scenario draws from its own child of
``numpy.random.SeedSequence(seed)``, so results do not depend on how
replicates are scheduled across threads.
"""

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy import special, stats

from .basis import parse_basis
from .errors import DomainError, NumericError, ParseError
from .kernel import KernelConfig, PointSample, dk_quantile
from .loss import check_level
from .separate import Dataset, FitConfig, fit_quantile
from .simultaneous import default_grid, fit_simultaneous
from .splines import parse_knots, transform_covariate

# --------------------------------------------------------------------------
# error laws for the heterogeneous linear model


@dataclass(frozen=True)
class ErrorDistribution:
    """One of ``normal``, ``student_t``, ``beta_shifted``, ``log_exponential``,
    ``logistic``. ``beta_shifted`` means ``e = 5 (B - 1/2)`` with ``B ~ Beta(alpha, beta)``.
    """

    kind: str
    df: float = 10.0
    alpha: float = 2.0
    beta: float = 2.0

    KINDS = ("normal", "student_t", "beta_shifted", "log_exponential", "logistic")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown error distribution {self.kind!r}")
        if not (self.df > 0 and self.alpha > 0 and self.beta > 0):
            raise DomainError("distribution parameters must be positive")

    def __str__(self):
        if self.kind == "student_t":
            return f"t:{self.df:g}"
        if self.kind == "beta_shifted":
            return f"beta:{self.alpha:g},{self.beta:g}"
        return self.kind

    def quantile(self, q):
        return error_quantile(self, q)

    def sample(self, rng, n):
        if self.kind == "normal":
            return rng.standard_normal(n)
        if self.kind == "student_t":
            return rng.standard_t(self.df, n)
        if self.kind == "beta_shifted":
            return 5.0 * (rng.beta(self.alpha, self.beta, n) - 0.5)
        if self.kind == "log_exponential":
            return np.log(rng.standard_exponential(n))
        return rng.logistic(size=n)

    def cdf(self, e):
        """Error CDF, used to check the quantile functions."""
        e = np.asarray(e, dtype=float)
        if self.kind == "normal":
            return special.ndtr(e)
        if self.kind == "student_t":
            return special.stdtr(self.df, e)
        if self.kind == "beta_shifted":
            return special.betainc(self.alpha, self.beta, np.clip(e / 5.0 + 0.5, 0.0, 1.0))
        if self.kind == "log_exponential":
            return -np.expm1(-np.exp(e))
        return special.expit(e)


def parse_distribution(text):
    """``normal``, ``t`` / ``t:10``, ``beta:0.5,0.5``, ``logexp``, ``logistic``."""
    text = text.strip().lower()
    name, _, arg = text.partition(":")
    try:
        if name == "normal":
            return ErrorDistribution("normal")
        if name in ("t", "student_t"):
            return ErrorDistribution("student_t", df=float(arg) if arg else 10.0)
        if name in ("beta", "beta_shifted"):
            a, b = (float(v) for v in arg.split(","))
            return ErrorDistribution("beta_shifted", alpha=a, beta=b)
        if name in ("logexp", "log_exponential"):
            return ErrorDistribution("log_exponential")
        if name == "logistic":
            return ErrorDistribution("logistic")
    except ValueError:
        raise ParseError(f"bad distribution parameters in {text!r}") from None
    raise ParseError(f"unknown distribution {text!r}")


def error_quantile(dist, q):
    """Exact q-quantile of the error law; vectorized over ``q``."""
    q = np.asarray(q, dtype=float)
    if np.any(~((q > 0) & (q < 1))):
        raise DomainError("quantile levels must lie strictly inside (0, 1)")
    if dist.kind == "normal":
        out = special.ndtri(q)
    elif dist.kind == "student_t":
        out = stats.t.ppf(q, dist.df)
    elif dist.kind == "beta_shifted":
        out = 5.0 * (special.betaincinv(dist.alpha, dist.beta, q) - 0.5)
    elif dist.kind == "log_exponential":
        out = np.log(-np.log1p(-q))
    else:
        out = np.log(q) - np.log1p(-q)
    return float(out) if out.ndim == 0 else out


def theoretical_quantile(x, q, dist):
    """``[1 + Q_e(q)] + [3 + 2 Q_e(q)] x``; broadcasts ``x`` against ``q``."""
    e = error_quantile(dist, q)
    return (1.0 + e) + (3.0 + 2.0 * e) * np.asarray(x, dtype=float)


def hetero_coefficients(q, dist):
    """True (intercept, slope) at level(s) q."""
    e = np.asarray(error_quantile(dist, q))
    return np.stack([1.0 + e, 3.0 + 2.0 * e], axis=-1)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_hetero(dist, n, seed=None):
    """Draw ``n`` pairs from ``Y = 1 + 3X + (1 + 2X) e``, ``X ~ U(0, 1)``."""
    if int(n) < 1:
        raise DomainError("n must be at least 1")
    rng = _rng(seed)
    x = rng.uniform(0.0, 1.0, int(n))
    e = dist.sample(rng, int(n))
    return PointSample(x, 1.0 + 3.0 * x + (1.0 + 2.0 * x) * e)


def imse(predicted, truth):
    """Mean over replicates of the summed squared error at the design points.

    ``predicted`` is (N, n); ``truth`` is (N, n) or (n,) when the design is
    shared. A single replicate may be passed as a 1-D array.
    """
    P = np.atleast_2d(np.asarray(predicted, dtype=float))
    T = np.asarray(truth, dtype=float)
    if T.ndim == 1 and T.shape[0] == P.shape[1]:
        T = np.broadcast_to(T, P.shape)
    if T.shape != P.shape:
        raise DomainError(f"prediction shape {P.shape} and truth shape {T.shape} disagree")
    return float(np.mean(np.sum((T - P) ** 2, axis=1)))


# --------------------------------------------------------------------------
# generalized gamma


def _positive(*vals):
    for v in vals:
        if np.any(~(np.asarray(v, dtype=float) > 0)):
            raise DomainError("generalized gamma parameters must be positive")


def gg_convert(theta, beta, k):
    """(theta, beta, k) -> (mu, sigma, k)."""
    _positive(theta, beta, k)
    mu = np.log(theta) + np.log(k) / beta
    sigma = 1.0 / (beta * np.sqrt(k))
    return mu, sigma, k


def gg_from_mu(mu, sigma, k):
    """(mu, sigma, k) -> (theta, beta, k), the inverse of :func:`gg_convert`."""
    _positive(sigma, k)
    s = sigma * np.sqrt(k)
    return np.exp(mu - s * np.log(k)), 1.0 / s, k


def gg_pdf(y, theta, beta, k):
    """Density ``beta y^(k beta - 1) exp(-(y/theta)^beta) / (theta^(k beta) Gamma(k))``.

    Zero for ``y <= 0``. Evaluated on the log scale.
    """
    _positive(theta, beta, k)
    y = np.asarray(y, dtype=float)
    pos = y > 0
    ys = np.where(pos, y, 1.0)
    logf = (np.log(beta) - k * beta * np.log(theta) - special.gammaln(k)
            + (k * beta - 1.0) * np.log(ys) - (ys / theta) ** beta)
    out = np.where(pos, np.exp(logf), 0.0)
    return float(out) if out.ndim == 0 else out


def _gamma_quantile_log(q, k, tol):
    """Return ``(r, log r)``; log r stays finite where r underflows."""
    q = np.asarray(q, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any(~((q > 0) & (q < 1))):
        raise DomainError("quantile levels must lie strictly inside (0, 1)")
    _positive(k)
    q, k = np.broadcast_arrays(q, k)
    r = special.gammaincinv(k, q)
    tiny = r < 1e-280
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        for _ in range(8):
            err = special.gammainc(k, r) - q
            todo = (np.abs(err) > 0.1 * tol) & ~tiny
            if not np.any(todo):
                break
            logpdf = (k - 1.0) * np.log(r) - r - special.gammaln(k)
            step = np.where(todo, err / np.exp(logpdf), 0.0)
            r = np.where(np.isfinite(step), np.maximum(r - step, 0.5 * r), r)
        err = np.where(tiny, 0.0, np.abs(special.gammainc(k, r) - q))
        # far lower tail: P(k, r) ~ r^k / Gamma(k + 1) with relative error O(r)
        logr = np.where(tiny, (np.log(q) + special.gammaln(k + 1.0)) / k, np.log(r))
    if np.any(~np.isfinite(logr)) or np.any(err > tol):
        raise NumericError(f"gamma quantile did not converge (max error {np.max(err):.3g})")
    return r, logr


def gamma_quantile(q, k, tol=1e-10):
    """Shape-k, unit-scale gamma quantile ``r(q; k)``.

    Starts from :func:`scipy.special.gammaincinv` and applies Newton steps on
    the regularized incomplete gamma until ``|P(k, r) - q| <= tol``. Values
    below ~1e-280 (tiny k, low q) are returned as computed and may be 0.
    """
    r, _ = _gamma_quantile_log(q, k, tol)
    return float(r) if r.ndim == 0 else r


def gg_quantile(q, mu, sigma, k):
    """``exp(mu) (r(q; k) / k)^(sigma sqrt(k))``, computed on the log scale."""
    _positive(sigma, k)
    r, logr = _gamma_quantile_log(q, k, 1e-10)
    k = np.asarray(k, dtype=float)
    # log(r/k) = log1p((r - k)/k) keeps precision when r is close to k (large k)
    with np.errstate(divide="ignore"):
        logratio = np.where(r > 0.5 * k, np.log1p((r - k) / k), logr - np.log(k))
    out = np.exp(mu + sigma * np.sqrt(k) * logratio)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class GGParams:
    a: float
    b: float
    c: float
    d: float
    f: float
    g: float
    x_range: Tuple[float, float] = (0.0, 1.0)

    def mu(self, x):
        return self.a + self.b * np.asarray(x, dtype=float)

    def sigma(self, x):
        return np.exp(self.c + self.d * np.asarray(x, dtype=float))

    def k(self, x):
        return np.exp(self.f + self.g * np.asarray(x, dtype=float))

    def quantile(self, x, q):
        """True conditional quantile(s); ``x`` and ``q`` broadcast."""
        x, q = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(q, dtype=float))
        return gg_quantile(q, self.mu(x), self.sigma(x), self.k(x))


GG_SET_1 = GGParams(1.384, 0.092, -1.021, 0.008, -3.493, 4.766, (0.0, 6.0))
GG_SET_2 = GGParams(-2.0, -0.75, -0.5, -4.0, -0.2, -1.0, (0.0, 1.0))


def gg_sample(params, n, seed=None, x_range=None):
    """Inverse-CDF draws: ``x ~ U(x_range)``, ``y = Q(U | x)`` with ``U ~ U(0, 1)``."""
    if int(n) < 1:
        raise DomainError("n must be at least 1")
    lo, hi = x_range if x_range is not None else params.x_range
    rng = _rng(seed)
    x = rng.uniform(lo, hi, int(n))
    u = rng.uniform(0.0, 1.0, int(n))
    u = np.clip(u, np.finfo(float).tiny, None)
    return PointSample(x, params.quantile(x, u))


# --------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class Estimator:
    """One row of an IMSE table.

    ``method`` is ``separate``, ``joint`` (coefficient functions over a
    quantile basis, optionally on a spline-transformed covariate) or ``dk``.
    """

    method: str
    basis: str = "logistic"
    xknots: str = ""
    h1: float = 0.3
    h2: float = 1e-4

    def label(self):
        if self.method == "separate":
            return "separate"
        if self.method == "dk":
            return f"dk h1={self.h1:g} h2={self.h2:g}"
        tag = f"joint {self.basis}"
        return tag + (f" xknots={self.xknots}" if self.xknots else "")


def parse_estimator(text):
    """``separate``; ``joint <basis> [xknots=seq3]``; ``dk [h1=0.3] [h2=1e-4]``."""
    tokens = text.split()
    if not tokens:
        raise ParseError("empty estimator")
    method, rest = tokens[0], tokens[1:]
    opts = {}
    positional = []
    for tok in rest:
        if "=" in tok:
            key, val = tok.split("=", 1)
            opts[key] = val
        else:
            positional.append(tok)
    try:
        if method == "separate" and not rest:
            return Estimator("separate")
        if method == "joint" and len(positional) <= 1 and set(opts) <= {"xknots"}:
            basis = positional[0] if positional else "logistic"
            parse_basis(basis)
            return Estimator("joint", basis=basis, xknots=opts.get("xknots", ""))
        if method == "dk" and not positional and set(opts) <= {"h1", "h2"}:
            return Estimator("dk", h1=float(opts.get("h1", 0.3)), h2=float(opts.get("h2", 1e-4)))
    except ValueError:
        raise ParseError(f"bad estimator options in {text!r}") from None
    raise ParseError(f"cannot parse estimator {text!r}")


def default_sim_config():
    """Iteration controls for fits inside the simulation harness.

    The objective-change rule stops once further iterations change the
    fitted quantiles by far less than the Monte Carlo error of the IMSE.
    """
    return FitConfig(max_iter=1000, tol=1e-8, obj_tol=1e-10)


@dataclass
class Scenario:
    model: str = "hetero"                  # "hetero" or "gg"
    dist: ErrorDistribution = field(default_factory=lambda: ErrorDistribution("normal"))
    gg: GGParams = GG_SET_1
    n: int = 500
    N: int = 30
    seed: int = 0
    estimators: tuple = (Estimator("separate"), Estimator("joint"))
    quantiles: tuple = (0.1, 0.25, 0.5, 0.75, 0.9)
    grid_size: int = 999
    cfg: FitConfig = field(default_factory=default_sim_config)

    def __post_init__(self):
        if self.model not in ("hetero", "gg"):
            raise DomainError(f"unknown model {self.model!r}")
        if int(self.n) < 2 or int(self.N) < 1:
            raise DomainError("need n >= 2 and N >= 1")
        for q in self.quantiles:
            check_level(q)
        self.n, self.N = int(self.n), int(self.N)
        self.quantiles = tuple(float(q) for q in self.quantiles)
        self.estimators = tuple(self.estimators)

    def draw(self, rng):
        if self.model == "hetero":
            return sample_hetero(self.dist, self.n, rng)
        return gg_sample(self.gg, self.n, rng)

    def truth(self, x):
        """True quantiles, shape (n, len(quantiles))."""
        q = np.asarray(self.quantiles)
        if self.model == "hetero":
            return theoretical_quantile(np.asarray(x)[:, None], q[None, :], self.dist)
        return self.gg.quantile(np.asarray(x)[:, None], q[None, :])

    def manifest(self):
        d = {"model": self.model, "n": self.n, "N": self.N, "seed": self.seed,
             "quantiles": list(self.quantiles), "grid": self.grid_size,
             "estimators": [e.label() for e in self.estimators],
             "max_iter": self.cfg.max_iter, "tol": self.cfg.tol, "obj_tol": self.cfg.obj_tol}
        if self.model == "hetero":
            d["dist"] = str(self.dist)
        else:
            d["gg"] = [self.gg.a, self.gg.b, self.gg.c, self.gg.d, self.gg.f, self.gg.g]
            d["x_range"] = list(self.gg.x_range)
        return d


_GG_SETS = {"1": GG_SET_1, "2": GG_SET_2}


def _scalar_or_list(key, val):
    """Flatten a TOML-style ``[a, b]`` array into the comma / ``;`` form."""
    if val.startswith("[") and val.endswith("]"):
        inner = val[1:-1]
        quoted = re.findall(r'"([^"]*)"|\'([^\']*)\'', inner)
        items = [a or b for a, b in quoted] if quoted else inner.split(",")
        sep = ";" if key == "estimators" else ","
        return sep.join(i.strip() for i in items if i.strip())
    return val.strip("'\"")


def parse_scenario(text):
    """Read a ``key = value`` scenario description.

    Keys: ``model`` (hetero | gg), ``dist`` (see :func:`parse_distribution`),
    ``gg`` (1 | 2 | a,b,c,d,f,g), ``x_range`` (lo,hi), ``n``, ``N``, ``seed``,
    ``quantiles`` (comma list), ``estimators`` (``;``-separated, see
    :func:`parse_estimator`), ``grid``, ``max_iter``, ``tol``, ``obj_tol``.
    Blank lines, ``#`` comments and ``[section]`` headers are ignored; string
    values may be quoted and lists may be written as ``[a, b]`` arrays, so
    simple TOML files are accepted.
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        raw[key] = _scalar_or_list(key, val)
    known = {"model", "dist", "gg", "x_range", "n", "N", "seed", "quantiles", "estimators",
             "grid", "max_iter", "tol", "obj_tol"}
    unknown = set(raw) - known
    if unknown:
        raise ParseError(f"unknown scenario keys {sorted(unknown)}")
    try:
        kw = {}
        if "model" in raw:
            kw["model"] = raw["model"]
        if "dist" in raw:
            kw["dist"] = parse_distribution(raw["dist"])
        if "gg" in raw:
            if raw["gg"] in _GG_SETS:
                gg = _GG_SETS[raw["gg"]]
            else:
                gg = GGParams(*(float(v) for v in raw["gg"].split(",")))
            kw["gg"] = gg
        if "x_range" in raw:
            lo, hi = (float(v) for v in raw["x_range"].split(","))
            kw["gg"] = GGParams(*[getattr(kw.get("gg", GG_SET_1), a) for a in "abcdfg"],
                                x_range=(lo, hi))
        for key in ("n", "N", "seed"):
            if key in raw:
                kw[key] = int(raw[key])
        if "grid" in raw:
            kw["grid_size"] = int(raw["grid"])
        if "quantiles" in raw:
            kw["quantiles"] = tuple(float(v) for v in raw["quantiles"].split(","))
        if "estimators" in raw:
            kw["estimators"] = tuple(parse_estimator(s) for s in raw["estimators"].split(";")
                                     if s.strip())
        base = default_sim_config()
        kw["cfg"] = FitConfig(
            max_iter=int(raw.get("max_iter", base.max_iter)),
            tol=float(raw.get("tol", base.tol)),
            obj_tol=(None if raw.get("obj_tol") == "none"
                     else float(raw.get("obj_tol", base.obj_tol))))
    except ValueError as exc:
        raise ParseError(f"bad scenario value: {exc}") from None
    return Scenario(**kw)


def _predict(est, sample, quantiles, grid, cfg):
    """Estimated quantiles at the sample's own x values, shape (n, J)."""
    q = np.asarray(quantiles)
    if est.method == "dk":
        return dk_quantile(sample, sample.x, q, KernelConfig(est.h1, est.h2))
    if est.method == "separate":
        data = Dataset.with_intercept(sample.y, sample.x)
        return np.column_stack([data.X @ fit_quantile(data, level, cfg).theta for level in q])
    if est.xknots:
        X = transform_covariate(sample.x, parse_knots(est.xknots, sample.x))
    else:
        X = np.column_stack([np.ones(sample.n), sample.x])
    data = Dataset(sample.y, X)
    fit = fit_simultaneous(data, parse_basis(est.basis), grid, cfg, check_monotone=False)
    return fit.predict(X, q)


def replicate_rng(scenario, l):
    """Generator for replicate ``l`` (independent of how replicates are scheduled)."""
    return np.random.default_rng(np.random.SeedSequence(scenario.seed).spawn(scenario.N)[l])


def run_replicate(scenario, l):
    """Squared-error sums for replicate ``l``: array (estimators, quantiles)."""
    return _run_child(scenario, replicate_rng(scenario, l))


@dataclass
class ImseTable:
    methods: list
    quantiles: list
    values: np.ndarray                       # (methods, quantiles)
    per_replicate: np.ndarray = field(repr=False, default=None)

    def get(self, method, q):
        return float(self.values[self.methods.index(method), self.quantiles.index(q)])

    def to_csv(self, fmt="{:.15g}"):
        lines = ["method," + ",".join(f"{q:g}" for q in self.quantiles)]
        for m, row in zip(self.methods, self.values):
            lines.append(m + "," + ",".join(fmt.format(v) for v in row))
        return "\n".join(lines) + "\n"


def run_scenario(scenario, threads=1):
    """IMSE for every estimator and quantile level of ``scenario``.

    Replicates run on up to ``threads`` worker threads; the reduction is in
    replicate order, so the table does not depend on ``threads``.
    """
    threads = max(1, int(threads))
    children = np.random.SeedSequence(scenario.seed).spawn(scenario.N)

    def one(l):
        return _run_child(scenario, np.random.default_rng(children[l]))

    if threads == 1:
        parts = [one(l) for l in range(scenario.N)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, range(scenario.N)))
    per = np.stack(parts)                              # (N, methods, quantiles)
    values = np.zeros(per.shape[1:])
    for part in per:                                   # fixed-order reduction
        values += part
    values /= scenario.N
    return ImseTable([e.label() for e in scenario.estimators], list(scenario.quantiles),
                     values, per)


def _run_child(scenario, rng):
    sample = scenario.draw(rng)
    truth = scenario.truth(sample.x)
    grid = default_grid(scenario.grid_size)
    out = np.empty((len(scenario.estimators), len(scenario.quantiles)))
    for e, est in enumerate(scenario.estimators):
        pred = _predict(est, sample, scenario.quantiles, grid, scenario.cfg)
        out[e] = np.sum((truth - pred) ** 2, axis=0)
    return out
