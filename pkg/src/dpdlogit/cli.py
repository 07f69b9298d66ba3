"""Command-line front end: fit, predict, diagnose and simulate.

Exit codes: 0 success, 2 malformed input or flags, 3 fit did not converge
(report still written), 4 singular design.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from types import SimpleNamespace

import numpy as np

from . import __version__
from .basis import BSplineBasis, default_dimension, grid_from_points, make_basis, make_uniform_grid
from .diagnostics import anscombe_residuals
from .divergence import Link
from .model import (
    FitConfig,
    FunctionalDataset,
    NearSingularWarning,
    SingularDesignError,
    build_design,
    fit_design,
    predict,
)
from .selection import SelectionConfig, SelectionError, aic, select_kappa, select_lambda
from .simulation import ESTIMATORS, StudyConfig, run_study

SCHEMA = "dpdlogit.fit/1"

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NONCONVERGED = 3
EXIT_SINGULAR = 4

ESTIMATOR_ALIASES = {
    "ml": "ML",
    "dpd(1)": "DPD(1)",
    "dpd1": "DPD(1)",
    "dpd(2)": "DPD(2)",
    "dpd2": "DPD(2)",
    "dpd(kappa_hat)": "DPD(kappa_hat)",
    "dpd(k)": "DPD(kappa_hat)",
    "adaptive": "DPD(kappa_hat)",
}


class InputError(Exception):
    pass


def read_curve_csv(path, grid_path=None):
    """Read wide-format curves: columns id, y, then one column per grid point.

    Grid abscissae come from `grid_path` (one value per line or comma separated)
    if given, else from numeric column headers, else a uniform grid on [0, 1].
    Returns (ids, labels or None, curves, grid).
    """
    if not os.path.isfile(path):
        raise InputError(f"cannot read curve file {path!r}: no such file")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise InputError(f"{path}: need a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    if len(header) < 4 or header[0].lower() != "id" or header[1].lower() != "y":
        raise InputError(f"{path}: header must start with 'id,y' followed by at least two curve columns")
    m = len(header) - 2
    ids, labels, curves = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise InputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        ids.append(row[0].strip())
        yv = row[1].strip()
        if yv == "":
            labels.append(None)
        elif yv in ("0", "1", "0.0", "1.0"):
            labels.append(float(yv))
        else:
            raise InputError(f"{path}:{lineno}: label {yv!r} is not 0 or 1")
        try:
            curves.append([float(v) for v in row[2:]])
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: non-numeric curve value ({exc})") from None
    X = np.asarray(curves, dtype=float)
    if not np.all(np.isfinite(X)):
        raise InputError(f"{path}: curve values must be finite")

    if grid_path:
        if not os.path.isfile(grid_path):
            raise InputError(f"cannot read grid file {grid_path!r}: no such file")
        with open(grid_path) as fh:
            text = fh.read().replace(",", " ").split()
        try:
            points = np.array([float(v) for v in text])
        except ValueError:
            raise InputError(f"{grid_path}: grid values must be numeric") from None
    else:
        try:
            points = np.array([float(h) for h in header[2:]])
        except ValueError:
            points = None
    try:
        grid = make_uniform_grid(m) if points is None else grid_from_points(points)
    except ValueError as exc:
        raise InputError(f"invalid grid: {exc}") from None
    if len(grid) != m:
        raise InputError(f"grid has {len(grid)} points but the curves have {m} columns")
    y = None if any(v is None for v in labels) else np.asarray(labels)
    return ids, y, X, grid


def _parse_tuning(value, word, name):
    if value.lower() == word:
        return None
    try:
        v = float(value)
    except ValueError:
        raise InputError(f"--{name} must be a number or '{word}', got {value!r}") from None
    if not math.isfinite(v) or v < 0:
        raise InputError(f"--{name} must be finite and nonnegative")
    return v


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_fit(args) -> int:
    ids, y, X, grid = read_curve_csv(args.input, args.grid)
    if y is None:
        raise InputError(f"{args.input}: every row needs a 0/1 label for fitting")
    kappa = _parse_tuning(args.kappa, "adaptive", "kappa")
    lam = _parse_tuning(args.lam, "aic", "lambda")
    order = args.order
    K = args.basis_dim or default_dimension(len(y), order)
    try:
        basis = make_basis(K, order)
        data = FunctionalDataset(X, y, grid)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    link = Link(args.link)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearSingularWarning)
        design = build_design(data, basis, args.penalty_order)
        lambda_grid = np.logspace(-8, 2, 30) if lam is None else np.array([lam])
        if kappa is None:
            sel = select_kappa(design, y, SelectionConfig(lambda_grid=lambda_grid, link=link))
            res, kappa_hat, lambda_hat = sel.fit, sel.kappa_hat, sel.lambda_hat
            extra = {
                "kappa_trace": [s.kappa_min for s in sel.trace],
                "kappa_converged": sel.converged,
                "kappa_cycled": sel.cycled,
            }
        elif lam is None:
            sel = select_lambda(design, y, kappa, lambda_grid, link=link)
            res, kappa_hat, lambda_hat = sel.fit, kappa, sel.lambda_hat
            extra = {"aic_table": [[row[0], row[1]] for row in sel.table]}
        else:
            res = fit_design(design, y, FitConfig(kappa, lam, link))
            kappa_hat, lambda_hat, extra = kappa, lam, {}
    if res.cov is None:
        raise SingularDesignError("sandwich bread matrix is singular at the fitted coefficients")
    beta = res.beta(basis, grid)
    Phi = basis.evaluate(grid.points)
    se = np.sqrt(np.clip(np.einsum("ij,jk,ik->i", Phi, res.cov[1:, 1:], Phi), 0, None))
    report = anscombe_residuals(y, res, args.threshold)
    out = {
        "schema": SCHEMA,
        "version": __version__,
        "alpha": res.alpha,
        "theta": res.theta.tolist(),
        "beta_on_grid": beta.tolist(),
        "grid": grid.points.tolist(),
        "basis": {
            "order": basis.order,
            "interior_knots": basis.interior_knots.tolist(),
            "penalty_order": args.penalty_order,
        },
        "link": link.kind,
        "kappa_hat": kappa_hat,
        "lambda_hat": lambda_hat,
        "edf": res.edf,
        "aic": aic(y, res, design),
        "objective": res.objective,
        "converged": res.converged,
        "iterations": res.iterations,
        "cov": res.cov.ravel().tolist(),
        "ids": ids,
        "probs": res.probs.tolist(),
        "residuals": report.residuals.tolist(),
        "flagged_outliers": [ids[i] for i in report.flagged],
        "config": {
            "input": args.input,
            "kappa": args.kappa,
            "lambda": args.lam,
            "basis_dim": K,
            "order": order,
            "penalty_order": args.penalty_order,
            "link": link.kind,
            "threshold": args.threshold,
            "seed": args.seed,
        },
        **extra,
    }
    _write_json(out, args.out)
    if args.beta_out:
        with open(args.beta_out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "beta", "lower", "upper"])
            for t, b, s in zip(grid.points, beta, se):
                w.writerow([repr(float(t)), repr(float(b)), repr(float(b - 2 * s)), repr(float(b + 2 * s))])
    if not res.converged:
        print(f"warning: fit did not converge after {res.iterations} iterations", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def load_model(path):
    """Read a model written by `fit`; returns (model dict, basis, link)."""
    try:
        with open(path) as fh:
            model = json.load(fh)
        if model.get("schema") != SCHEMA:
            raise InputError(f"{path}: not a {SCHEMA} model file")
        basis = BSplineBasis(int(model["basis"]["order"]), np.asarray(model["basis"]["interior_knots"], float))
        theta = np.asarray(model["theta"], float)
        if theta.size != basis.dimension:
            raise InputError(f"{path}: theta length does not match the basis")
        link = Link(model["link"])
        float(model["alpha"])
        np.asarray(model["grid"], float)
    except InputError:
        raise
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot load model {path!r}: {exc}") from None
    return model, basis, link


def _model_probs(model, basis, link, X, grid):
    model_grid = np.asarray(model["grid"], float)
    if model_grid.shape != grid.points.shape or not np.array_equal(model_grid, grid.points):
        raise InputError("curve grid does not match the grid the model was fitted on")

    fitted = SimpleNamespace(
        alpha=float(model["alpha"]), theta=np.asarray(model["theta"], float), link=link
    )
    return predict(fitted, basis, X, grid)


def cmd_predict(args) -> int:
    model, basis, link = load_model(args.model)
    ids, _, X, grid = read_curve_csv(args.input, args.grid)
    probs = _model_probs(model, basis, link, X, grid)
    fh = open(args.out, "w", newline="") if args.out not in (None, "-") else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "prob"])
        for i, p in zip(ids, probs):
            w.writerow([i, repr(float(p))])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_diagnose(args) -> int:
    model, basis, link = load_model(args.model)
    ids, y, X, grid = read_curve_csv(args.input, args.grid)
    if y is None:
        raise InputError(f"{args.input}: diagnostics need 0/1 labels on every row")
    probs = _model_probs(model, basis, link, X, grid)
    report = anscombe_residuals(y, probs, args.threshold)
    flagged = set(report.flagged.tolist())
    fh = open(args.out, "w", newline="") if args.out not in (None, "-") else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "anscombe_residual", "flagged"])
        for k, (i, r) in enumerate(zip(ids, report.residuals)):
            w.writerow([i, repr(float(r)), int(k in flagged)])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def _parse_estimators(text):
    out = []
    for item in text.split(","):
        key = item.strip()
        name = ESTIMATOR_ALIASES.get(key.lower(), key)
        if name not in ESTIMATORS:
            raise InputError(f"unknown estimator {key!r}; choose from {', '.join(ESTIMATORS)}")
        if name not in out:
            out.append(name)
    return tuple(out)


def cmd_simulate(args) -> int:
    reps, boot = args.reps, args.bootstrap
    if args.full_scale:
        reps, boot = 1000, 10000
    try:
        config = StudyConfig(
            beta_index=args.beta,
            epsilon=args.eps,
            n=args.n,
            replications=reps,
            grid_size=args.grid_size,
            estimators=_parse_estimators(args.estimators),
            seed=args.seed,
            bootstrap_resamples=boot,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    report = run_study(config, workers=args.workers)
    report.write(args.out)
    header = "beta  eps   " + "  ".join(f"{e:>22s}" for e in config.estimators)
    cells = [f"{e_med:10.3f} ({e_se:.3f})" for e_med, e_se in
             ((report.median_mse[e], report.bootstrap_se[e]) for e in config.estimators)]
    print(header)
    print(f"b{config.beta_index:<4d} {config.epsilon:<5g} " + "  ".join(f"{c:>22s}" for c in cells))
    if report.failures:
        print(f"{report.failures} replicate(s) failed; see report.json", file=sys.stderr)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="dpdlogit", description="Robust functional logistic regression")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit a model to a curve CSV")
    f.add_argument("input")
    f.add_argument("--kappa", default="adaptive", help="tuning parameter or 'adaptive'")
    f.add_argument("--lambda", dest="lam", default="aic", help="penalty or 'aic'")
    f.add_argument("--basis-dim", type=int, default=0, help="default floor(min(30, n/4))")
    f.add_argument("--order", type=int, default=4)
    f.add_argument("--penalty-order", type=int, default=2)
    f.add_argument("--link", choices=["logit", "probit", "cloglog"], default="logit")
    f.add_argument("--grid", help="file with grid abscissae")
    f.add_argument("--threshold", type=float, default=2.0)
    f.add_argument("--seed", type=int, default=0, help="accepted for interface stability; fitting is deterministic")
    f.add_argument("--out", default="-")
    f.add_argument("--beta-out", help="CSV of t, beta, beta -/+ 2 SE")
    f.set_defaults(func=cmd_fit)

    for name, func, helptext in (
        ("predict", cmd_predict, "predicted probabilities for new curves"),
        ("diagnose", cmd_diagnose, "Anscombe residuals and outlier flags"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("model")
        s.add_argument("input")
        s.add_argument("--grid")
        s.add_argument("--out", default="-")
        if name == "diagnose":
            s.add_argument("--threshold", type=float, default=2.0)
        s.set_defaults(func=func)

    s = sub.add_parser("simulate", help="Monte Carlo study")
    s.add_argument("--beta", type=int, choices=[1, 2, 3], default=1)
    s.add_argument("--eps", type=float, default=0.0)
    s.add_argument("--n", type=int, default=400)
    s.add_argument("--reps", type=int, default=100)
    s.add_argument("--estimators", default=",".join(ESTIMATORS))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--grid-size", type=int, default=200)
    s.add_argument("--bootstrap", type=int, default=2000)
    s.add_argument("--workers", type=int, default=None, help="default $DPDLOGIT_WORKERS or 1")
    s.add_argument("--full-scale", action="store_true", help="1000 replicates, 10000 bootstrap resamples")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SelectionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except SingularDesignError as exc:
        print(f"error: singular design: {exc}", file=sys.stderr)
        return EXIT_SINGULAR


if __name__ == "__main__":
    sys.exit(main())
