"""Monte-Carlo risk estimators and margin diagnostics.

Excess risk is estimated with a paired (common-random-numbers) design: the
candidate classifier and the optimal one are scored on the same sample, so
their error indicators cancel where they agree and excess risks near zero
stay measurable.  A paired estimate can dip slightly below zero from noise.

Inequality checks between population quantities are declared violated only
when the estimated gap exceeds three combined standard errors.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import (
    SyntheticDistribution,
    bayes_signs,
    regression_values,
    sample,
    strict_sign,
)
from .nets import sup_distance


class ExponentUndefinedError(ValueError):
    """The margin curve is degenerate (hard-margin-like): no log-linear fit."""


@dataclass(frozen=True)
class RiskEstimate:
    """A risk (or paired risk-difference) estimate with its standard error."""

    value: float
    std_error: float
    m: int
    seed: int

    def __post_init__(self):
        if not -1.0 <= self.value <= 1.0:
            raise ValueError(f"estimate {self.value} outside [-1, 1]")
        if self.std_error < 0:
            raise ValueError(f"negative standard error {self.std_error}")
        if self.std_error > 3.0 * 0.5 / math.sqrt(self.m):
            raise ValueError(
                f"standard error {self.std_error} exceeds the Bernoulli bound at m={self.m}"
            )


@dataclass(frozen=True)
class MarginCurve:
    """Empirical curve t -> P(|E[Y|X]| <= t), estimated on one shared sample."""

    thresholds: tuple[float, ...]
    probs: tuple[float, ...]
    stderrs: tuple[float, ...]
    m: int

    def __post_init__(self):
        probs = self.probs
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("probabilities must lie in [0, 1]")
        if any(b < a for a, b in zip(probs, probs[1:])):
            raise ValueError("curve must be nondecreasing in t")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "prob", "stderr"])
            for t, p, s in zip(self.thresholds, self.probs, self.stderrs):
                writer.writerow([repr(float(t)), repr(float(p)), repr(float(s))])


def induced_classifier(fn):
    """Turn a real-valued batch function into a {-1, 0, +1} classifier."""

    def classifier(X):
        return strict_sign(fn(X))

    return classifier


def _binomial_se(p: float, m: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / m)


def misclass_risk(classifier, dist: SyntheticDistribution, m: int, seed: int) -> RiskEstimate:
    """Fraction of m fresh samples the classifier gets wrong (0 counts as wrong)."""
    if m < 100:
        raise ValueError(f"need m >= 100, got {m}")
    data = sample(dist, m, seed)
    preds = np.asarray(classifier(data.inputs))
    wrong = preds != data.labels
    value = float(np.mean(wrong))
    return RiskEstimate(value=value, std_error=_binomial_se(value, m), m=m, seed=seed)


def excess_risk(classifier, dist: SyntheticDistribution, m: int, seed: int) -> RiskEstimate:
    """Paired estimate of risk(classifier) - risk(optimal) on one shared sample."""
    if m < 100:
        raise ValueError(f"need m >= 100, got {m}")
    data = sample(dist, m, seed)
    preds = np.asarray(classifier(data.inputs))
    optimal = bayes_signs(dist, data.inputs)
    diffs = (preds != data.labels).astype(float) - (optimal != data.labels)
    value = float(np.mean(diffs))
    stderr = float(np.std(diffs, ddof=1) / math.sqrt(m))
    return RiskEstimate(value=value, std_error=stderr, m=m, seed=seed)


def l2_distance(fn, dist: SyntheticDistribution, m: int, seed: int) -> float:
    """Monte-Carlo estimate of the L2(marginal) distance from fn to E[Y|X]."""
    if m < 100:
        raise ValueError(f"need m >= 100, got {m}")
    rng = np.random.default_rng(seed)
    X = dist.marginal.draw(m, rng)
    gap = np.asarray(fn(X), dtype=float) - regression_values(dist, X)
    return float(np.sqrt(np.mean(gap**2)))


def margin_curve(
    dist: SyntheticDistribution, thresholds, m: int, seed: int
) -> MarginCurve:
    """Estimate P(|E[Y|X]| <= t) on one sample shared across thresholds."""
    ts = tuple(float(t) for t in thresholds)
    if any(b <= a for a, b in zip(ts, ts[1:])) or not ts:
        raise ValueError("thresholds must be strictly increasing")
    if ts[0] <= 0 or ts[-1] > 1:
        raise ValueError("thresholds must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    X = dist.marginal.draw(m, rng)
    magnitude = np.abs(regression_values(dist, X))
    probs, stderrs = [], []
    for t in ts:
        p = float(np.mean(magnitude <= t))
        probs.append(p)
        stderrs.append(_binomial_se(p, m))
    return MarginCurve(thresholds=ts, probs=tuple(probs), stderrs=tuple(stderrs), m=m)


@dataclass(frozen=True)
class NoiseExponentFit:
    """Least-squares fit of log P(|E[Y|X]| <= t) = log(scale) + exponent * log(t)."""

    exponent: float
    scale: float
    std_error: float
    points_used: int


def fit_noise_exponent(curve: MarginCurve) -> NoiseExponentFit:
    """Fit the low-noise exponent from a margin curve.

    Thresholds whose empirical probability is exactly 0 or 1 carry no
    log-linear information and are censored; fewer than three usable points
    signals a hard-margin-like curve.
    """
    pts = [(t, p) for t, p in zip(curve.thresholds, curve.probs) if 0.0 < p < 1.0]
    if len(pts) < 3:
        raise ExponentUndefinedError(
            f"only {len(pts)} thresholds have probabilities strictly inside (0,1); "
            "curve is hard-margin-like, exponent undefined"
        )
    x = np.log([t for t, _ in pts])
    y = np.log([p for _, p in pts])
    k = len(pts)
    x_bar, y_bar = x.mean(), y.mean()
    sxx = float(np.sum((x - x_bar) ** 2))
    slope = float(np.sum((x - x_bar) * (y - y_bar)) / sxx)
    intercept = y_bar - slope * x_bar
    resid = y - (intercept + slope * x)
    variance = float(np.sum(resid**2) / (k - 2)) if k > 2 else 0.0
    return NoiseExponentFit(
        exponent=slope,
        scale=float(np.exp(intercept)),
        std_error=math.sqrt(variance / sxx),
        points_used=k,
    )


def check_hard_margin(dist: SyntheticDistribution, delta: float, m: int, seed: int) -> int:
    """Count samples with |E[Y|X]| <= delta; 0 certifies the margin at level m."""
    if not 0 < delta <= 1:
        raise ValueError(f"delta must be in (0, 1], got {delta}")
    rng = np.random.default_rng(seed)
    X = dist.marginal.draw(m, rng)
    return int(np.sum(np.abs(regression_values(dist, X)) <= delta))


# --- inequality report -------------------------------------------------------


@dataclass(frozen=True)
class InequalityCheck:
    name: str
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    violated: bool

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "lhs_se": self.lhs_se,
            "rhs": self.rhs,
            "rhs_se": self.rhs_se,
            "violated": self.violated,
        }


@dataclass(frozen=True)
class InequalityReport:
    checks: tuple[InequalityCheck, ...]
    m: int
    seed: int
    sup_norm_note: str = field(
        default="sup norms use the deterministic grid surrogate (50 points per axis "
        "for d <= 3, 1e5 Halton points above)"
    )

    @property
    def any_violation(self) -> bool:
        return any(c.violated for c in self.checks)

    def to_json_dict(self) -> dict:
        return {
            "m": self.m,
            "seed": self.seed,
            "sup_norm_note": self.sup_norm_note,
            "checks": [c.to_json_dict() for c in self.checks],
        }


def _check(name, lhs, lhs_se, rhs, rhs_se) -> InequalityCheck:
    violated = lhs - rhs > 3.0 * math.sqrt(lhs_se**2 + rhs_se**2)
    return InequalityCheck(name, float(lhs), float(lhs_se), float(rhs), float(rhs_se), violated)


def risk_inequality_report(
    f,
    g,
    dist: SyntheticDistribution,
    m: int,
    seed: int,
    level: float | None = None,
) -> InequalityReport:
    """Estimate both sides of three population inequalities on one shared sample.

    - ``risk-diff-vs-sup``: |risk(sign f) - risk(sign g)| is at most the
      probability that the sup distance between f and g reaches |f(X)|.
    - ``excess-vs-l2``: the excess risk of sign f is at most the L2 distance
      from f to the regression function.
    - ``near-zero-mass`` (hard-margin families only): P(|f(X)| <= level) is at
      most the squared L2 distance divided by (margin - level)^2.

    Violations are flagged beyond three combined standard errors.
    """
    data = sample(dist, m, seed)
    X, Y = data.inputs, data.labels
    fX = np.asarray(f(X), dtype=float)
    gX = np.asarray(g(X), dtype=float)
    reg = regression_values(dist, X)

    wrong_f = (strict_sign(fX) != Y).astype(float)
    wrong_g = (strict_sign(gX) != Y).astype(float)
    wrong_opt = (strict_sign(reg) != Y).astype(float)

    checks = []

    diff_fg = wrong_f - wrong_g
    lhs1 = abs(float(np.mean(diff_fg)))
    se1 = float(np.std(diff_fg, ddof=1) / math.sqrt(m))
    gap = sup_distance(f, g, dist.dim)
    hit = gap >= np.abs(fX)
    rhs1 = float(np.mean(hit))
    checks.append(_check("risk-diff-vs-sup", lhs1, se1, rhs1, _binomial_se(rhs1, m)))

    diff_fo = wrong_f - wrong_opt
    lhs2 = float(np.mean(diff_fo))
    se2 = float(np.std(diff_fo, ddof=1) / math.sqrt(m))
    sq = (fX - reg) ** 2
    mean_sq = float(np.mean(sq))
    se_mean_sq = float(np.std(sq, ddof=1) / math.sqrt(m))
    rhs2 = math.sqrt(mean_sq)
    rhs2_se = se_mean_sq / (2.0 * rhs2) if rhs2 > 0 else 0.0
    checks.append(_check("excess-vs-l2", lhs2, se2, rhs2, rhs2_se))

    if dist.hard_margin is not None:
        margin = dist.hard_margin
        lv = margin / 2.0 if level is None else float(level)
        if not 0 < lv < margin:
            raise ValueError(f"level must lie in (0, {margin}), got {lv}")
        below = np.abs(fX) <= lv
        lhs3 = float(np.mean(below))
        denom = (margin - lv) ** 2
        checks.append(
            _check(
                "near-zero-mass",
                lhs3,
                _binomial_se(lhs3, m),
                mean_sq / denom,
                se_mean_sq / denom,
            )
        )

    return InequalityReport(checks=tuple(checks), m=m, seed=seed)
