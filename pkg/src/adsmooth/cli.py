"""Command-line interface: ``simulate``, ``table``, ``fit`` and ``predict``.

Exit codes: 0 success, 1 runtime or numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace

import numpy as np

from .dgp import DgpConfig
from .engine import AdsConfig, ads_fit, naive_fit
from .errors import AdsError, ValidationError
from .estimators import LassoConfig, fit_individual
from .harness import ESTIMATORS, PAPER_TABLES, paper_table, run_suite, SimConfig
from .panel import CoefficientSet, MseReport, WeightMatrix, mse_against, predict
from .panel_io import (
    ModelBundle,
    chronological_split,
    load_model,
    read_long_csv,
    read_long_rows,
    render_report,
    save_model,
    write_report,
)

log = logging.getLogger("adsmooth")

# real-data fits standardize covariates; simulated designs are already unit variance
REAL_DATA_LASSO = LassoConfig(standardize=True)


class UsageError(Exception):
    pass


def _gamma(text):
    if text == "median":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"gamma must be a number or 'median', got {text!r}") from None


def _estimator_list(text):
    names = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in names if s not in ESTIMATORS]
    if not names or bad:
        raise argparse.ArgumentTypeError(f"estimators must be a comma list drawn from {','.join(ESTIMATORS)}")
    return tuple(dict.fromkeys(names))


def _add_ads_flags(p):
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--gamma", type=_gamma, default="median")
    p.add_argument("--refine", type=int, default=0, help="weight refinement iterations")


def _add_output_flags(p, out_required=False):
    p.add_argument("--out", required=out_required)
    p.add_argument("--format", choices=("csv", "markdown"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adsmooth", description="Adaptive discrete smoothing for panel regressions.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one simulation cell")
    sim.add_argument("--dgp", type=int, choices=(1, 2, 3, 4), required=True)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--t", type=int, required=True)
    sim.add_argument("--p", type=int, required=True)
    sim.add_argument("--s", type=int)
    sim.add_argument("--cor", type=float)
    sim.add_argument("--design", choices=("iid", "toeplitz"), required=True)
    sim.add_argument("--noise-sd", type=float, default=1.0)
    sim.add_argument("--reps", type=int, required=True)
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--estimators", type=_estimator_list, required=True)
    sim.add_argument("--jobs", type=int, default=1)
    _add_ads_flags(sim)
    _add_output_flags(sim)

    tab = sub.add_parser("table", help="run a published simulation grid")
    tab.add_argument("--name", choices=PAPER_TABLES, required=True)
    tab.add_argument("--reps", type=int, default=500)
    tab.add_argument("--seed", type=int, required=True)
    tab.add_argument("--jobs", type=int, default=1)
    _add_ads_flags(tab)
    _add_output_flags(tab, out_required=True)

    fit = sub.add_parser("fit", help="fit an estimator on a long-format CSV")
    fit.add_argument("--data", required=True)
    fit.add_argument("--y", required=True)
    fit.add_argument("--id", required=True)
    fit.add_argument("--time", required=True)
    fit.add_argument("--estimator", choices=ESTIMATORS, required=True)
    fit.add_argument("--test-fraction", type=float, default=0.2)
    fit.add_argument("--model-out")
    _add_ads_flags(fit)

    pred = sub.add_parser("predict", help="apply a saved model to a long-format CSV")
    pred.add_argument("--model", required=True)
    pred.add_argument("--data", required=True)
    pred.add_argument("--out", required=True)
    return parser


def _ads_config(args, estimator="ols", lasso_cfg=LassoConfig()) -> AdsConfig:
    try:
        return AdsConfig(
            delta=args.delta, gamma=args.gamma, estimator=estimator, lasso_cfg=lasso_cfg, refine_iterations=args.refine
        )
    except ValidationError as exc:
        raise UsageError(str(exc)) from None


def _emit(report: MseReport, args) -> None:
    if args.out:
        write_report(report, args.out, args.format)
    else:
        sys.stdout.write(render_report(report, args.format))


def cmd_simulate(args) -> int:
    if args.s is not None and args.dgp in (1, 2):
        raise UsageError(f"--s does not apply to --dgp {args.dgp}")
    if args.s is None and args.dgp in (3, 4):
        raise UsageError(f"--dgp {args.dgp} requires --s")
    if args.cor is not None and args.dgp in (2, 3):
        raise UsageError(f"--cor does not apply to --dgp {args.dgp}")
    if args.cor is None and args.dgp in (1, 4):
        raise UsageError(f"--dgp {args.dgp} requires --cor")
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    try:
        cell = DgpConfig(
            dgp=args.dgp, n=args.n, t=args.t, p=args.p, s=args.s, beta_cor=args.cor,
            design=args.design, noise_sd=args.noise_sd,
        )
        cfg = SimConfig(cells=[cell], estimators=args.estimators, ads=_ads_config(args), reps=args.reps, master_seed=args.seed)
    except ValidationError as exc:
        raise UsageError(str(exc)) from None
    report = run_suite(cfg, jobs=args.jobs)
    _emit(report, args)
    return 1 if report.failed else 0


def cmd_table(args) -> int:
    if args.reps < 1 or args.jobs < 1:
        raise UsageError("--reps and --jobs must be >= 1")
    base = paper_table(args.name, reps=args.reps, master_seed=args.seed)
    cfg = replace(base, ads=replace(_ads_config(args), estimator=base.ads.estimator))
    report = run_suite(cfg, jobs=args.jobs)
    _emit(report, args)
    return 1 if report.failed else 0


def _fit_model(train, estimator, ads):
    n = train.n_individuals
    identity = WeightMatrix(w=np.eye(n), delta=1.0)
    if estimator == "naive":
        return naive_fit(train), identity
    if estimator in ("ols", "lasso"):
        coefs = np.vstack([fit_individual(train, i, estimator, ads.lasso_cfg) for i in range(n)])
        return CoefficientSet(coefs), identity
    result = ads_fit(train, replace(ads, estimator=estimator.removeprefix("ads-")))
    return result.final, result.weights


def cmd_fit(args) -> int:
    if not 0.0 < args.test_fraction < 1.0:
        raise UsageError("--test-fraction must lie in (0, 1)")
    ads = _ads_config(args, lasso_cfg=REAL_DATA_LASSO)
    data = read_long_csv(args.data, args.y, args.id, args.time)
    train, test = chronological_split(data, args.test_fraction)
    coefs, weights = _fit_model(train, args.estimator, ads)
    print(f"estimator,{args.estimator}")
    print(f"n,{train.n_individuals}")
    print(f"t_train,{train.n_periods}")
    print(f"t_test,{test.n_periods}")
    print(f"train_mse,{mse_against(predict(train, coefs), train.response):.10g}")
    print(f"test_mse,{mse_against(predict(test, coefs), test.response):.10g}")
    if args.model_out:
        meta = {
            "estimator": args.estimator,
            "y_column": args.y,
            "id_column": args.id,
            "time_column": args.time,
            "test_fraction": repr(args.test_fraction),
            "refine": str(args.refine),
        }
        save_model(
            ModelBundle(ids=train.ids, coefs=coefs, weights=weights, covariate_names=train.covariate_names, meta=meta),
            args.model_out,
        )
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    id_col = model.meta.get("id_column", "id")
    time_col = model.meta.get("time_column", "time")
    rows = read_long_rows(args.data, id_col, time_col, covariates=list(model.covariate_names))
    index = {ident: k for k, ident in enumerate(model.ids)}
    unknown = sorted({ident for ident in rows.ids if ident not in index})
    if unknown:
        raise ValidationError(f"unknown individual ids in {args.data}: {', '.join(unknown)}")
    coefs = model.coefs.coefs[[index[i] for i in rows.ids]] if rows.ids else np.zeros((0, model.coefs.coefs.shape[1]))
    yhat = coefs[:, 0] + np.einsum("rk,rk->r", rows.x, coefs[:, 1:])
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([id_col, time_col, "prediction"])
        for ident, when, v in zip(rows.ids, rows.times, yhat):
            w.writerow([ident, int(when), repr(float(v))])
    return 0


def _log_to_stderr():
    for h in list(log.handlers):
        if getattr(h, "_adsmooth_cli", False):
            log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    handler._adsmooth_cli = True
    log.addHandler(handler)
    log.setLevel(logging.INFO)


COMMANDS = {"simulate": cmd_simulate, "table": cmd_table, "fit": cmd_fit, "predict": cmd_predict}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _log_to_stderr()
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"adsmooth {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (AdsError, OSError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"adsmooth {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
