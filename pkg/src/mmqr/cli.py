"""Command-line front end: ``python -m mmqr <subcommand> ...``.

Every subcommand writes one CSV plus a JSON manifest (``<name>.manifest.json``)
into ``--out``. Numbers are printed with 15 significant digits and the
manifest carries no timestamps, so identical inputs give identical bytes.
Failures print ``error: <category>: <message>`` on one line and exit nonzero.
"""

import argparse
import csv
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .basis import parse_basis
from .errors import MMQRError, ParseError
from .kernel import KernelConfig, PointSample, dk_quantile, lcv_log_likelihood
from .penalized import PenaltyConfig, default_lambda_grid, select_lambda
from .separate import Dataset, FitConfig, fit_quantile
from .simulation import imse, parse_scenario, run_scenario
from .simultaneous import default_grid, fit_simultaneous
from .splines import kfold_split, cv_loss, parse_knots, transform_covariate

EXIT_CODES = {"usage": 2, "io": 3, "parse": 4, "domain": 5, "singular": 6, "degenerate": 7,
              "numeric": 8, "error": 1}


def fmt(v):
    return format(float(v), ".15g")


class UsageError(MMQRError):
    category = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --------------------------------------------------------------------------
# input


def read_table(path):
    """Header names and a float matrix; cells must all be numeric."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc.strerror}") from None
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    body = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:]):
        line = i + 2
        if len(row) != len(header):
            raise ParseError(f"{path}: line {line}: expected {len(header)} cells, got {len(row)}")
        for j, cell in enumerate(row):
            try:
                body[i, j] = float(cell)
            except ValueError:
                raise ParseError(f"{path}: line {line}, column {j + 1} ({header[j]!r}): "
                                 f"not a number: {cell.strip()!r}") from None
            if not np.isfinite(body[i, j]):
                raise ParseError(f"{path}: line {line}, column {j + 1} ({header[j]!r}): "
                                 f"non-finite value")
    return header, body


def _column(header, name, path):
    if name not in header:
        raise ParseError(f"{path}: no column named {name!r} (have {header})")
    return header.index(name)


def load_csv(path, response_column):
    """Dataset with ``response_column`` as y and an intercept plus all other columns as X."""
    header, body = read_table(path)
    j = _column(header, response_column, path)
    names = [h for i, h in enumerate(header) if i != j]
    return Dataset.with_intercept(body[:, j], np.delete(body, j, axis=1), names)


def digest(path):
    if path is None:
        return None
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


# --------------------------------------------------------------------------
# output


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(r if isinstance(r, str) else fmt(r) for r in row) + "\n")


def write_manifest(args, name, extra=None):
    opts = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    manifest = {"subcommand": args.command, "options": opts, "seed": getattr(args, "seed", None),
                "version": __version__, "input_sha256": digest(getattr(args, "data", None)
                                                               or getattr(args, "scenario", None))}
    if extra:
        manifest["results"] = extra
    path = os.path.join(args.out, name + ".manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _levels(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ParseError(f"bad list of numbers {text!r}") from None


def _fit_config(args):
    return FitConfig(epsilon=args.epsilon, max_iter=args.max_iter, tol=args.tol,
                     obj_tol=args.obj_tol)


def _grid(args):
    if args.quantile_grid:
        return np.array(_levels(args.quantile_grid))
    return default_grid(args.grid)


def _lambda_grid(text):
    """``geom:lo,hi,count`` or an explicit comma list."""
    if text is None:
        return default_lambda_grid()
    if text.startswith("geom:"):
        parts = _levels(text[5:])
        if len(parts) != 3:
            raise ParseError("use geom:lo,hi,count")
        return np.geomspace(parts[0], parts[1], int(parts[2]))
    return np.array(_levels(text))


# --------------------------------------------------------------------------
# subcommands


def cmd_fit(args):
    data = load_csv(args.data, args.response)
    cfg = _fit_config(args)
    rows, info = [], []
    for q in _levels(args.q):
        fit = fit_quantile(data, q, cfg)
        rows.append([q, *fit.theta])
        info.append({"q": q, "iterations": fit.iterations, "converged": fit.converged,
                     "perturbed_loss": fit.final_perturbed_loss})
    write_csv(os.path.join(args.out, "fit.csv"), ["q", *data.names], rows)
    write_manifest(args, "fit", info)


def cmd_curves(args):
    data = load_csv(args.data, args.response)
    spec = parse_basis(args.basis)
    grid = _grid(args)
    fit = fit_simultaneous(data, spec, grid, _fit_config(args))
    beta = fit.coefficients(grid)
    write_csv(os.path.join(args.out, "curves.csv"), ["q", *data.names],
              [[q, *b] for q, b in zip(grid, beta)])
    write_csv(os.path.join(args.out, "params.csv"), ["term", *[f"b{l + 1}" for l in range(spec.dim)]],
              [[name, *row] for name, row in zip(data.names, fit.A)])
    write_manifest(args, "curves", {"basis": str(spec), "iterations": fit.iterations,
                                    "converged": fit.converged})


def cmd_lasso(args):
    data = load_csv(args.data, args.response)
    pcfg = PenaltyConfig(lambda_grid=_lambda_grid(args.lambda_grid), epsilon_l=args.epsilon_l)
    cfg = _fit_config(args)
    rows, path_rows, info = [], [], []
    for q in _levels(args.q):
        tilde = fit_quantile(data, q, cfg).theta
        fit, lam, path = select_lambda(data, q, pcfg, cfg, beta_tilde=tilde, return_path=True)
        # intercept first, then slopes by decreasing |beta|
        order = [0] + sorted(range(1, data.p), key=lambda j: (-abs(fit.beta[j]), j))
        for j in order:
            rows.append([fmt(q), data.names[j], tilde[j], fit.beta[j]])
        path_rows += [[q, p.lam, p.bic, len(p.active_set)] for p in path]
        info.append({"q": q, "lambda": lam, "bic": fit.bic,
                     "active": [data.names[j] for j in fit.active_set]})
    write_csv(os.path.join(args.out, "lasso.csv"), ["q", "term", "unpenalized", "penalized"], rows)
    write_csv(os.path.join(args.out, "lasso_path.csv"), ["q", "lambda", "bic", "active_size"],
              path_rows)
    write_manifest(args, "lasso", info)


def _covariates(args):
    header, body = read_table(args.data)
    j = _column(header, args.response, args.data)
    cols = args.columns.split(",") if args.columns else [h for h in header if h != args.response]
    idx = [_column(header, c, args.data) for c in cols]
    return body[:, j], body[:, idx], cols


def _spline_design(C, cols, knot_text):
    blocks, names = [np.ones((C.shape[0], 1))], ["intercept"]
    for c, name in enumerate(cols):
        T = transform_covariate(C[:, c], parse_knots(knot_text, C[:, c]))[:, 1:]
        blocks.append(T)
        names += [name] + [f"{name}_s{l + 1}" for l in range(T.shape[1] - 1)]
    return np.hstack(blocks), names


def cmd_transform(args):
    y, C, cols = _covariates(args)
    X, names = _spline_design(C, cols, args.knots)
    Dataset(y, X, names)                       # full-rank check
    write_csv(os.path.join(args.out, "transform.csv"), [args.response, *names[1:]],
              [[yi, *row[1:]] for yi, row in zip(y, X)])
    write_manifest(args, "transform")


def cmd_cv(args):
    y, C, cols = _covariates(args)
    grid = _grid(args)
    folds = kfold_split(len(y), args.folds, args.seed)
    rows = []
    for knot_text in [s.strip() for s in args.knots.split(";") if s.strip()]:
        X, names = _spline_design(C, cols, knot_text)
        data = Dataset(y, X, names)
        for basis in [s.strip() for s in args.basis.split(";") if s.strip()]:
            loss = cv_loss(data, parse_basis(basis), grid, folds, cfg=_fit_config(args))
            rows.append([knot_text, basis, loss])
    write_csv(os.path.join(args.out, "cv.csv"), ["xknots", "qbasis", "cv_loss"],
              [[f'"{k}"', f'"{b}"', v] for k, b, v in rows])
    write_manifest(args, "cv")


def _point_sample(args):
    header, body = read_table(args.data)
    return PointSample(body[:, _column(header, args.x, args.data)],
                       body[:, _column(header, args.response, args.data)])


def cmd_dk(args):
    sample = _point_sample(args)
    cfg = KernelConfig(args.h1, args.h2)
    if args.at:
        xs = np.array(_levels(args.at))
    else:
        xs = np.linspace(sample.x.min(), sample.x.max(), args.points)
    qs = _levels(args.quantiles)
    Q = dk_quantile(sample, xs, qs, cfg)
    rows = [[x, q, Q[a, b]] for a, x in enumerate(xs) for b, q in enumerate(qs)]
    write_csv(os.path.join(args.out, "dk.csv"), ["x", "q", "yhat"], rows)
    write_manifest(args, "dk")


def cmd_lcv(args):
    sample = _point_sample(args)
    rows = [[h1, h2, lcv_log_likelihood(sample, KernelConfig(h1, h2))]
            for h1 in _levels(args.h1) for h2 in _levels(args.h2)]
    write_csv(os.path.join(args.out, "lcv.csv"), ["h1", "h2", "log_likelihood"], rows)
    write_manifest(args, "lcv")


def cmd_simulate(args):
    try:
        with open(args.scenario) as fh:
            text = fh.read()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {args.scenario}: {exc.strerror}") from None
    scenario = parse_scenario(text)
    if args.seed is not None:
        scenario.seed = args.seed
    if args.replicates is not None:
        scenario.N = args.replicates
    table = run_scenario(scenario, threads=args.threads)
    with open(os.path.join(args.out, "imse.csv"), "w") as fh:
        fh.write(table.to_csv())
    write_manifest(args, "simulate", scenario.manifest())


def cmd_imse(args):
    _, P = read_table(args.predicted)
    _, T = read_table(args.truth)
    if args.by_column:
        P, T = P.T, T.T
    value = imse(P, T[0] if T.shape[0] == 1 else T)
    write_csv(os.path.join(args.out, "imse.csv"), ["imse"], [[value]])
    write_manifest(args, "imse", {"imse": value})


# --------------------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="mmqr", description="Quantile regression by majorize-minimize.")
    parser.add_argument("--version", action="version", version=f"mmqr {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, data=True):
        if data:
            p.add_argument("data", help="CSV file with a header row")
            p.add_argument("--response", default="y", help="name of the response column")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=None)

    def iteration(p):
        p.add_argument("--epsilon", type=float, default=1e-10)
        p.add_argument("--max-iter", type=int, default=10_000)
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--obj-tol", type=float, default=None,
                       help="also stop when the relative objective decrease falls below this")

    def grid(p):
        p.add_argument("--grid", type=int, default=999, help="number of equally spaced levels")
        p.add_argument("--quantile-grid", default=None, help="explicit comma list of levels")

    p = sub.add_parser("fit", help="separate linear quantile regression")
    common(p), iteration(p)
    p.add_argument("--q", default="0.5", help="comma list of quantile levels")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("curves", help="coefficient functions over a quantile basis")
    common(p), iteration(p), grid(p)
    p.add_argument("--basis", default="logistic", help="logistic | ns:k1,k2,... | ns:seqH")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("lasso", help="adaptive-lasso fit with BIC choice of lambda")
    common(p), iteration(p)
    p.add_argument("--q", default="0.5")
    p.add_argument("--lambda-grid", default=None, help="geom:lo,hi,count or comma list")
    p.add_argument("--epsilon-l", type=float, default=1e-10)
    p.set_defaults(func=cmd_lasso)

    p = sub.add_parser("transform", help="natural-spline transform of covariates")
    common(p)
    p.add_argument("--knots", default="seq3", help="seqH | asym7 | k1,k2,...")
    p.add_argument("--columns", default=None, help="covariates to transform (default: all)")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("cv", help="10-fold CV loss over knot and basis choices")
    common(p), iteration(p), grid(p)
    p.add_argument("--knots", default="seq3", help="';'-separated knot specs")
    p.add_argument("--basis", default="logistic", help="';'-separated quantile bases")
    p.add_argument("--columns", default=None)
    p.add_argument("--folds", type=int, default=10)
    p.set_defaults(func=cmd_cv, seed=0)

    p = sub.add_parser("dk", help="double-kernel quantile curves")
    common(p)
    p.add_argument("--x", default="x", help="covariate column")
    p.add_argument("--h1", type=float, required=True)
    p.add_argument("--h2", type=float, default=1e-4)
    p.add_argument("--quantiles", default="0.05,0.1,0.25,0.5,0.75,0.9,0.95")
    p.add_argument("--at", default=None, help="comma list of x values")
    p.add_argument("--points", type=int, default=101, help="x grid size when --at is absent")
    p.set_defaults(func=cmd_dk)

    p = sub.add_parser("lcv", help="leave-one-out likelihood over bandwidths")
    common(p)
    p.add_argument("--x", default="x")
    p.add_argument("--h1", required=True, help="comma list")
    p.add_argument("--h2", default="1e-4", help="comma list")
    p.set_defaults(func=cmd_lcv)

    p = sub.add_parser("simulate", help="IMSE table for a scenario file")
    common(p, data=False)
    p.add_argument("--scenario", required=True)
    p.add_argument("--replicates", type=int, default=None, help="override N")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("imse", help="IMSE of predictions against true quantiles")
    common(p, data=False)
    p.add_argument("--predicted", required=True, help="CSV, one replicate per row")
    p.add_argument("--truth", required=True, help="CSV, one row or one per replicate")
    p.add_argument("--by-column", action="store_true", help="replicates are columns")
    p.set_defaults(func=cmd_imse)
    return parser


def run(argv=None):
    """Entry point; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand")
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        os.makedirs(args.out, exist_ok=True)
        args.func(args)
    except MMQRError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_CODES["io"]
    return 0


def main():
    sys.exit(run())
