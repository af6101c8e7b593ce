"""Command-line entry point.

Subcommands:
    experiment run --config <json> --out <dir> [--plot] [--workers N]
    bounds eval --inputs <json>
    diagnose margin --dist <json> --m <int> --seed <int> [--out <csv>]
    rates fit <results.csv> [--aggregation median|mean]
    distribution sample --dist <json> --n <int> --seed <int> --out <csv>

Exit codes: 0 on success, 1 on usage or config errors, 2 on runtime failures.
The worker count falls back to the MRL_WORKERS environment variable.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np


class UsageError(Exception):
    """Bad arguments or inputs: exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; the contract is 1
        raise UsageError(message)


def _json_safe(obj):
    """Replace non-finite floats with strings so output stays standard JSON."""
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise UsageError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {path}: {exc}") from exc


def _emit(doc):
    print(json.dumps(_json_safe(doc), indent=2))


def _workers(args) -> int:
    if args.workers is not None:
        return args.workers
    env = os.environ.get("MRL_WORKERS")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"MRL_WORKERS must be an integer, got {env!r}") from exc
    return 1


def _cmd_experiment_run(args) -> int:
    from .experiment import emit_report, run_experiment, validate_config

    config = validate_config(args.config)
    base_dir = os.path.dirname(os.path.abspath(args.config))
    rows = run_experiment(config, workers=_workers(args), base_dir=base_dir)
    paths = emit_report(
        rows,
        args.out,
        bound_overlay=config.bound_overlay,
        plot=args.plot,
        aggregation=args.aggregation,
    )
    _emit({"cells": len(rows), "outputs": paths})
    return 0


def _cmd_bounds_eval(args) -> int:
    from .bounds import (
        BoundInputs,
        SizingInputs,
        excess_risk_bound,
        sizing_for_rate,
        well_specified_bound,
    )
    from .nets import Architecture

    doc = _load_json(args.inputs)
    kind = doc.get("kind")
    if kind == "generic":
        regime = doc.get("regime")
        inputs = BoundInputs.from_json_dict(doc)
        _emit(excess_risk_bound(inputs, regime).to_json_dict())
    elif kind == "sizing":
        sizing = sizing_for_rate(SizingInputs.from_json_dict(doc))
        _emit(sizing.to_json_dict(n_grid=doc.get("n_grid", ())))
    elif kind == "ideal":
        report = well_specified_bound(
            arch=Architecture(tuple(doc["widths"])),
            bound=float(doc["R"]),
            margin=float(doc["margin"]),
            separation_const=float(doc["separation_const"]),
            separation_power=float(doc["separation_power"]),
            p=float(doc.get("p", 2.0)),
            sample_size=int(doc["sample_size"]),
        )
        _emit(report.to_json_dict())
    else:
        raise UsageError(f"inputs file needs kind 'generic', 'sizing', or 'ideal', got {kind!r}")
    return 0


def _cmd_diagnose_margin(args) -> int:
    from .distributions import distribution_from_descriptor
    from .metrics import ExponentUndefinedError, fit_noise_exponent, margin_curve

    doc = _load_json(args.dist)
    dist = distribution_from_descriptor(doc, base_dir=os.path.dirname(os.path.abspath(args.dist)))
    if args.thresholds:
        thresholds = [float(t) for t in args.thresholds.split(",")]
    else:
        thresholds = [round(0.1 * k, 10) for k in range(1, 10)]
    curve = margin_curve(dist, thresholds, args.m, args.seed)
    out = {
        "m": curve.m,
        "curve": [
            {"t": t, "prob": p, "stderr": s}
            for t, p, s in zip(curve.thresholds, curve.probs, curve.stderrs)
        ],
    }
    try:
        fit = fit_noise_exponent(curve)
        out["fit"] = {
            "exponent": fit.exponent,
            "scale": fit.scale,
            "stderr": fit.std_error,
            "points_used": fit.points_used,
        }
    except ExponentUndefinedError as exc:
        out["fit"] = {"outcome": "exponent-undefined", "reason": str(exc)}
    if args.out:
        curve.write_csv(args.out)
        out["csv"] = args.out
    _emit(out)
    return 0


def _cmd_rates_fit(args) -> int:
    from .experiment import fit_rate, read_results_csv

    rows = read_results_csv(args.results)
    if not rows:
        raise UsageError(f"no rows in {args.results}")
    _emit(fit_rate(rows, aggregation=args.aggregation).to_json_dict())
    return 0


def _cmd_distribution_sample(args) -> int:
    from .distributions import distribution_from_descriptor, sample, save_dataset

    doc = _load_json(args.dist)
    dist = distribution_from_descriptor(doc, base_dir=os.path.dirname(os.path.abspath(args.dist)))
    data = sample(dist, args.n, args.seed)
    save_dataset(args.out, data, kind=doc.get("kind", "unknown"))
    _emit({"n": len(data), "labels_positive": int(np.sum(data.labels == 1)), "out": args.out})
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="mrl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    experiment = sub.add_parser("experiment", help="run rate experiments")
    exp_sub = experiment.add_subparsers(dest="subcommand", required=True)
    run = exp_sub.add_parser("run", help="execute an experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--plot", action="store_true")
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--aggregation", choices=("median", "mean"), default="median")
    run.set_defaults(handler=_cmd_experiment_run)

    bounds = sub.add_parser("bounds", help="evaluate closed-form bounds")
    bounds_sub = bounds.add_subparsers(dest="subcommand", required=True)
    beval = bounds_sub.add_parser("eval", help="evaluate a bound-inputs file")
    beval.add_argument("--inputs", required=True)
    beval.set_defaults(handler=_cmd_bounds_eval)

    diagnose = sub.add_parser("diagnose", help="distribution diagnostics")
    diag_sub = diagnose.add_subparsers(dest="subcommand", required=True)
    margin = diag_sub.add_parser("margin", help="margin curve and noise-exponent fit")
    margin.add_argument("--dist", required=True)
    margin.add_argument("--m", type=int, required=True)
    margin.add_argument("--seed", type=int, required=True)
    margin.add_argument("--thresholds", default=None)
    margin.add_argument("--out", default=None)
    margin.set_defaults(handler=_cmd_diagnose_margin)

    rates = sub.add_parser("rates", help="rate fitting")
    rates_sub = rates.add_subparsers(dest="subcommand", required=True)
    fit = rates_sub.add_parser("fit", help="fit a decay exponent to a results CSV")
    fit.add_argument("results")
    fit.add_argument("--aggregation", choices=("median", "mean"), default="median")
    fit.set_defaults(handler=_cmd_rates_fit)

    dist = sub.add_parser("distribution", help="synthetic distributions")
    dist_sub = dist.add_subparsers(dest="subcommand", required=True)
    samp = dist_sub.add_parser("sample", help="sample a dataset to CSV")
    samp.add_argument("--dist", required=True)
    samp.add_argument("--n", type=int, required=True)
    samp.add_argument("--seed", type=int, required=True)
    samp.add_argument("--out", required=True)
    samp.set_defaults(handler=_cmd_distribution_sample)

    return parser


def main(argv=None) -> int:
    from .experiment import ConfigValidationError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigValidationError as exc:
        print("config error:", file=sys.stderr)
        for path, msg in exc.violations:
            print(f"  {path}: {msg}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
