"""Sample-size sweep orchestration: train, evaluate excess risk, fit rates.

A run is a grid over (sample size n, replicate).  Each cell derives its own
dataset, trainer, and evaluation seeds from the master seed, so the full
results table is a pure function of the config regardless of how many
workers execute the cells.  Rows are canonicalized by (n, replicate) before
anything is written.

Wall-clock times are recorded per cell but written to a separate
``timings.csv``: the results CSV must be byte-identical across reruns and
worker counts, which a timing column would break.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .bounds import (
    BoundInputs,
    SizingInputs,
    excess_risk_bound,
    sizing_for_rate,
    well_specified_bound,
)
from .distributions import distribution_from_descriptor
from .metrics import excess_risk, induced_classifier
from .nets import Architecture, ClipSpec, forward_clipped
from .seeding import derive_seed
from .training import TrainConfig, TrainingDivergedError, solve_lambda_erm
from .distributions import bayes_risk as bayes_risk_estimate
from .distributions import sample

RESULT_COLUMNS = (
    "n",
    "replicate",
    "seed",
    "lambda",
    "train_objective",
    "grad_norm",
    "excess_risk",
    "excess_stderr",
    "bayes_risk",
)

_PHASE_DATASET, _PHASE_TRAINER, _PHASE_EVAL, _PHASE_BAYES = 0, 1, 2, 3


class ConfigValidationError(ValueError):
    """Carries every violated config invariant, with JSON paths."""

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = violations
        lines = "; ".join(f"{path}: {msg}" for path, msg in violations)
        super().__init__(f"invalid experiment config ({lines})")


@dataclass(frozen=True)
class ResultRow:
    """One experiment cell.  The paired excess estimator may dip slightly
    below zero from noise, but never below its 3-sigma floor."""

    n: int
    replicate: int
    seed: int
    lam: float
    train_objective: float
    grad_norm: float
    excess_risk: float
    excess_stderr: float
    bayes_risk: float
    wall_time_seconds: float

    def __post_init__(self):
        if math.isfinite(self.excess_risk):
            if self.excess_risk < -3.0 * self.excess_stderr:
                raise ValueError(
                    f"excess estimate {self.excess_risk} below the noise floor "
                    f"-3 * {self.excess_stderr}"
                )
        if self.wall_time_seconds < 0:
            raise ValueError("wall time must be >= 0")

    def csv_values(self) -> list:
        return [
            self.n,
            self.replicate,
            self.seed,
            repr(float(self.lam)),
            repr(float(self.train_objective)),
            repr(float(self.grad_norm)),
            repr(float(self.excess_risk)),
            repr(float(self.excess_stderr)),
            repr(float(self.bayes_risk)),
        ]


@dataclass(frozen=True)
class ExperimentConfig:
    distribution: dict
    train: TrainConfig
    n_grid: tuple[int, ...]
    eval_m: int
    replicates: int
    master_seed: int
    widths: tuple[int, ...] | None = None
    sizing: SizingInputs | None = None
    bound_overlay: dict | None = None

    def to_json_dict(self) -> dict:
        doc = {
            "distribution": self.distribution,
            "train": self.train.to_json_dict(),
            "n_grid": list(self.n_grid),
            "eval_m": self.eval_m,
            "replicates": self.replicates,
            "master_seed": self.master_seed,
        }
        if self.widths is not None:
            doc["architecture"] = {"widths": list(self.widths)}
        else:
            doc["architecture"] = {"sizing": vars(self.sizing).copy()}
        if self.bound_overlay is not None:
            doc["bound_inputs"] = self.bound_overlay
        return doc


def parse_config_dict(doc: dict) -> ExperimentConfig:
    """Parse and validate a config document, collecting every violation."""
    violations: list[tuple[str, str]] = []

    def bad(path, msg):
        violations.append((path, msg))

    if not isinstance(doc, dict):
        raise ConfigValidationError([(".", "config must be a JSON object")])

    distribution = doc.get("distribution")
    if not isinstance(distribution, dict) or "kind" not in distribution:
        bad(".distribution", "must be an object with a 'kind' field")
        distribution = {}

    arch_doc = doc.get("architecture")
    widths = sizing = None
    if not isinstance(arch_doc, dict):
        bad(".architecture", "must be an object with 'widths' or 'sizing'")
    elif "widths" in arch_doc:
        try:
            widths = tuple(int(w) for w in arch_doc["widths"])
            Architecture(widths)
        except (TypeError, ValueError) as exc:
            bad(".architecture.widths", str(exc))
            widths = None
    elif "sizing" in arch_doc:
        try:
            sizing = SizingInputs.from_json_dict(arch_doc["sizing"])
        except (TypeError, KeyError, ValueError) as exc:
            bad(".architecture.sizing", str(exc))
    else:
        bad(".architecture", "needs either 'widths' or 'sizing'")

    train = None
    try:
        train = TrainConfig.from_json_dict(doc.get("train", {}))
    except (TypeError, ValueError) as exc:
        bad(".train", str(exc))

    n_grid = doc.get("n_grid")
    grid: tuple[int, ...] = ()
    if not isinstance(n_grid, list) or len(n_grid) < 3:
        bad(".n_grid", "must be a list of length >= 3")
    else:
        try:
            grid = tuple(int(n) for n in n_grid)
        except (TypeError, ValueError):
            bad(".n_grid", "entries must be integers")
        else:
            if any(n < 1 for n in grid):
                bad(".n_grid", "entries must be positive")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                bad(".n_grid", "must be strictly increasing")

    eval_m = doc.get("eval_m", 0)
    if not isinstance(eval_m, int) or eval_m < 100:
        bad(".eval_m", "must be an integer >= 100")

    replicates = doc.get("replicates", 0)
    if not isinstance(replicates, int) or replicates < 1:
        bad(".replicates", "must be an integer >= 1")

    master_seed = doc.get("master_seed")
    if not isinstance(master_seed, int):
        bad(".master_seed", "must be an integer")
        master_seed = 0

    overlay = doc.get("bound_inputs")
    if overlay is not None:
        if not isinstance(overlay, dict):
            bad(".bound_inputs", "must be an object")
            overlay = None
        else:
            try:
                BoundInputs.from_json_dict({**overlay, "sample_size": 1})
            except (TypeError, KeyError, ValueError) as exc:
                bad(".bound_inputs", str(exc))

    if violations:
        raise ConfigValidationError(violations)
    return ExperimentConfig(
        distribution=distribution,
        train=train,
        n_grid=grid,
        eval_m=eval_m,
        replicates=replicates,
        master_seed=master_seed,
        widths=widths,
        sizing=sizing,
        bound_overlay=overlay,
    )


def validate_config(path) -> ExperimentConfig:
    """Load a config file; raises with every violation listed, not just the first."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigValidationError([(".", f"malformed JSON: {exc}")]) from exc
    return parse_config_dict(doc)


def _cell_architecture(config: ExperimentConfig, dim: int, n: int):
    """Widths, weight box, and regularization for one cell."""
    if config.widths is not None:
        return config.widths, config.train.bound, config.train.lam
    sizing = sizing_for_rate(config.sizing)
    width = sizing.width(n)
    hidden = [width] * (sizing.depth - 1)
    return (dim, *hidden, 1), sizing.weight_bound(n), sizing.lambda_ceiling(n)


def _run_cell(doc: dict, base_dir: str, n: int, replicate: int) -> ResultRow:
    config = parse_config_dict(doc)
    dist = distribution_from_descriptor(config.distribution, base_dir=base_dir)
    dataset_seed = derive_seed(config.master_seed, n, replicate, _PHASE_DATASET)
    trainer_seed = derive_seed(config.master_seed, n, replicate, _PHASE_TRAINER)
    eval_seed = derive_seed(config.master_seed, n, replicate, _PHASE_EVAL)
    bayes_seed = derive_seed(config.master_seed, n, replicate, _PHASE_BAYES)

    data = sample(dist, n, dataset_seed)
    widths, bound, lam = _cell_architecture(config, dist.dim, n)
    train_cfg = replace(config.train, lam=lam, bound=bound, seed=trainer_seed)
    clip = ClipSpec(1.0)

    start = time.perf_counter()
    try:
        result = solve_lambda_erm(Architecture(widths), clip, data, train_cfg)
    except TrainingDivergedError:
        wall = time.perf_counter() - start
        return ResultRow(
            n=n,
            replicate=replicate,
            seed=dataset_seed,
            lam=lam,
            train_objective=math.nan,
            grad_norm=math.nan,
            excess_risk=math.nan,
            excess_stderr=math.nan,
            bayes_risk=math.nan,
            wall_time_seconds=wall,
        )
    wall = time.perf_counter() - start

    classifier = induced_classifier(lambda X: forward_clipped(result.params, clip, X))
    excess = excess_risk(classifier, dist, config.eval_m, eval_seed)
    optimal = bayes_risk_estimate(dist, config.eval_m, bayes_seed)
    return ResultRow(
        n=n,
        replicate=replicate,
        seed=dataset_seed,
        lam=lam,
        train_objective=result.objective,
        grad_norm=result.grad_norm,
        excess_risk=excess.value,
        excess_stderr=excess.std_error,
        bayes_risk=optimal.value,
        wall_time_seconds=wall,
    )


def run_experiment(
    config: ExperimentConfig, workers: int = 1, base_dir: str = "."
) -> list[ResultRow]:
    """Execute every (n, replicate) cell; output is independent of scheduling."""
    doc = config.to_json_dict()
    cells = [(n, rep) for n in config.n_grid for rep in range(config.replicates)]
    if workers <= 1:
        rows = [_run_cell(doc, base_dir, n, rep) for n, rep in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, doc, base_dir, n, rep) for n, rep in cells]
            rows = [f.result() for f in futures]
    return sorted(rows, key=lambda r: (r.n, r.replicate))


# --- rate fitting -------------------------------------------------------------


@dataclass(frozen=True)
class RatePoint:
    n: int
    excess: float
    stderr: float
    censored: bool

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "excess": self.excess,
            "stderr": self.stderr,
            "censored": self.censored,
        }


@dataclass(frozen=True)
class RateFit:
    """Fitted decay exponent of excess risk against sample size.

    ``outcome`` is "fit" when at least three aggregated points sit above the
    noise floor, and "floor" when the sweep decayed below measurement
    precision (itself evidence of fast rates); ``floor_n`` is the smallest
    censored sample size, if any.
    """

    outcome: str
    alpha_hat: float | None
    std_error: float | None
    aggregation: str
    points: tuple[RatePoint, ...]
    floor_n: int | None

    def to_json_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "alpha_hat": self.alpha_hat,
            "stderr": self.std_error,
            "aggregation": self.aggregation,
            "points": [p.to_json_dict() for p in self.points],
            "floor_n": self.floor_n,
        }


def fit_rate(rows: list[ResultRow], aggregation: str = "median") -> RateFit:
    """Least-squares slope of log(aggregated excess) against log(n).

    Aggregated points with excess at or below twice their standard error are
    censored (noise floor) and never enter the regression.  Failed cells
    (NaN excess) are dropped before aggregation.
    """
    if aggregation not in ("median", "mean"):
        raise ValueError(f"aggregation must be 'median' or 'mean', got {aggregation!r}")
    by_n: dict[int, list[ResultRow]] = {}
    for row in rows:
        if math.isfinite(row.excess_risk):
            by_n.setdefault(row.n, []).append(row)
    if not by_n:
        raise ValueError("no finite excess-risk rows to fit")
    points = []
    for n in sorted(by_n):
        group = by_n[n]
        values = np.array([r.excess_risk for r in group])
        stderrs = np.array([r.excess_stderr for r in group])
        agg = float(np.median(values) if aggregation == "median" else np.mean(values))
        # replicate averaging shrinks the per-replicate variance by the count
        se = float(math.sqrt(np.mean(stderrs**2) / len(group)))
        points.append(RatePoint(n=n, excess=agg, stderr=se, censored=agg <= 2.0 * se))
    usable = [p for p in points if not p.censored]
    censored = [p for p in points if p.censored]
    floor_n = min((p.n for p in censored), default=None)
    if len(usable) < 3:
        return RateFit(
            outcome="floor",
            alpha_hat=None,
            std_error=None,
            aggregation=aggregation,
            points=tuple(points),
            floor_n=floor_n,
        )
    x = np.log([p.n for p in usable])
    y = np.log([p.excess for p in usable])
    x_bar, y_bar = x.mean(), y.mean()
    sxx = float(np.sum((x - x_bar) ** 2))
    slope = float(np.sum((x - x_bar) * (y - y_bar)) / sxx)
    k = len(usable)
    resid = y - (y_bar + slope * (x - x_bar))
    variance = float(np.sum(resid**2) / (k - 2)) if k > 2 else 0.0
    return RateFit(
        outcome="fit",
        alpha_hat=-slope,
        std_error=math.sqrt(variance / sxx),
        aggregation=aggregation,
        points=tuple(points),
        floor_n=floor_n,
    )


# --- report emission ----------------------------------------------------------


def write_results_csv(path, rows: list[ResultRow]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in sorted(rows, key=lambda r: (r.n, r.replicate)):
            writer.writerow(row.csv_values())


def read_results_csv(path) -> list[ResultRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(
                ResultRow(
                    n=int(rec["n"]),
                    replicate=int(rec["replicate"]),
                    seed=int(rec["seed"]),
                    lam=float(rec["lambda"]),
                    train_objective=float(rec["train_objective"]),
                    grad_norm=float(rec["grad_norm"]),
                    excess_risk=float(rec["excess_risk"]),
                    excess_stderr=float(rec["excess_stderr"]),
                    bayes_risk=float(rec["bayes_risk"]),
                    wall_time_seconds=0.0,
                )
            )
    return rows


def _write_bounds_csv(path, overlay: dict, n_grid):
    regime = overlay.get("regime", "hard-margin")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["n", "generic_total", "generic_total_log", "well_specified_total", "well_specified_total_log"]
        )
        for n in n_grid:
            inputs = BoundInputs.from_json_dict({**overlay, "sample_size": int(n)})
            generic = excess_risk_bound(inputs, regime)
            ideal = well_specified_bound(
                arch=inputs.arch,
                bound=inputs.bound,
                margin=inputs.margin,
                separation_const=inputs.separation_const,
                separation_power=inputs.separation_power,
                p=inputs.p,
                sample_size=int(n),
            )
            writer.writerow(
                [
                    int(n),
                    repr(generic.total.value),
                    repr(generic.total.log_value),
                    repr(ideal.total.value),
                    repr(ideal.total.log_value),
                ]
            )


def _write_plot(path, fit: RateFit, bounds_csv):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    kept = [p for p in fit.points if not p.censored]
    floored = [p for p in fit.points if p.censored]
    if kept:
        ax.errorbar(
            [p.n for p in kept],
            [p.excess for p in kept],
            yerr=[p.stderr for p in kept],
            fmt="o",
            label="measured excess risk",
        )
    if floored:
        ax.plot(
            [p.n for p in floored],
            [max(p.stderr * 2.0, 1e-12) for p in floored],
            "v",
            label="noise floor (censored)",
        )
    if fit.outcome == "fit" and kept:
        ns = np.array([p.n for p in kept], dtype=float)
        anchor = kept[0]
        curve = anchor.excess * (ns / anchor.n) ** (-fit.alpha_hat)
        ax.plot(ns, curve, "--", label=f"fit: n^-{fit.alpha_hat:.3g}")
    if bounds_csv and os.path.exists(bounds_csv):
        ns, totals = [], []
        with open(bounds_csv, newline="") as fh:
            for rec in csv.DictReader(fh):
                total = float(rec["generic_total"])
                if math.isfinite(total):
                    ns.append(int(rec["n"]))
                    totals.append(total)
        if ns:
            ax.plot(ns, totals, ":", label="theory bound")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("excess risk")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def emit_report(
    rows: list[ResultRow],
    out_dir,
    bound_overlay: dict | None = None,
    plot: bool = False,
    aggregation: str = "median",
) -> dict:
    """Write results.csv, timings.csv, rates.json and optional extras.

    Only results.csv, rates.json, and bounds.csv are deterministic artifacts;
    timings.csv varies run to run by nature.
    """
    if not rows:
        raise ValueError("no result rows to report")
    os.makedirs(out_dir, exist_ok=True)
    paths = {"results": os.path.join(out_dir, "results.csv")}
    write_results_csv(paths["results"], rows)

    paths["timings"] = os.path.join(out_dir, "timings.csv")
    with open(paths["timings"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "replicate", "wall_time_seconds"])
        for row in sorted(rows, key=lambda r: (r.n, r.replicate)):
            writer.writerow([row.n, row.replicate, repr(float(row.wall_time_seconds))])

    fit = fit_rate(rows, aggregation=aggregation)
    paths["rates"] = os.path.join(out_dir, "rates.json")
    with open(paths["rates"], "w") as fh:
        json.dump(fit.to_json_dict(), fh, indent=2)

    if bound_overlay is not None:
        paths["bounds"] = os.path.join(out_dir, "bounds.csv")
        n_grid = sorted({row.n for row in rows})
        _write_bounds_csv(paths["bounds"], bound_overlay, n_grid)

    if plot:
        paths["plot"] = os.path.join(out_dir, "plot.svg")
        _write_plot(paths["plot"], fit, paths.get("bounds"))
    return paths
