"""Closed-form complexity and excess-risk bound calculators.

Everything here is a pure function of value inputs.  Quantities that can
exceed double range (covering numbers, their products with exponentials)
are computed in log space and reported in both linear and log form; an
``overflowed`` flag marks linear values that saturated to infinity, so no
overflow ever passes silently.

The well-separation constants (growth scale and power) and the hard margin
are user inputs throughout: the solver cannot estimate them, and no
estimator is fabricated here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nets import Architecture

_LOG_MAX_DOUBLE = math.log(np.finfo(float).max)  # ~709.78


class BoundPreconditionError(ValueError):
    """An input violates an explicit precondition of the bound."""


def lipschitz_bound(arch: Architecture, bound: float) -> float:
    """Upper bound 2 L^2 R^(L-1) W^L on the parameters-to-function Lipschitz
    constant over the box, in sup norms on both sides."""
    if not bound > 0:
        raise ValueError(f"parameter bound must be positive, got {bound}")
    L, W = arch.depth, arch.width
    return 2.0 * L**2 * bound ** (L - 1) * float(W) ** L


def log_lipschitz_bound(arch: Architecture, bound: float) -> float:
    L, W = arch.depth, arch.width
    return math.log(2.0) + 2.0 * math.log(L) + (L - 1) * math.log(bound) + L * math.log(W)


@dataclass(frozen=True)
class TermValue:
    """A nonnegative quantity carried in linear and natural-log form."""

    value: float
    log_value: float

    @property
    def overflowed(self) -> bool:
        return math.isinf(self.value) and math.isfinite(self.log_value)

    def to_json_dict(self) -> dict:
        return {"value": self.value, "log": self.log_value}


def _term_from_log(log_value: float) -> TermValue:
    value = math.exp(log_value) if log_value <= _LOG_MAX_DOUBLE else math.inf
    return TermValue(value=value, log_value=log_value)


def _term_from_value(value: float) -> TermValue:
    return TermValue(value=value, log_value=math.log(value) if value > 0 else -math.inf)


def covering_bound(arch: Architecture, bound: float, radius: float) -> TermValue:
    """Sup-norm covering-number bound (1 + 2 R Lip / radius)^P for the box.

    The log form is always finite; the linear value saturates to inf (with
    the ``overflowed`` flag set) beyond double range.
    """
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    log_ratio = math.log(2.0 * bound) + log_lipschitz_bound(arch, bound) - math.log(radius)
    return _covering_from_log_ratio(arch.param_count(), log_ratio)


def _covering_from_log_ratio(params: int, log_ratio: float) -> TermValue:
    log_value = params * float(np.logaddexp(0.0, log_ratio))
    if log_value > _LOG_MAX_DOUBLE:
        return TermValue(value=math.inf, log_value=log_value)
    if log_ratio > _LOG_MAX_DOUBLE:
        return _term_from_log(log_value)
    value = (1.0 + math.exp(log_ratio)) ** params
    return TermValue(value=value, log_value=log_value)


@dataclass(frozen=True)
class BoundInputs:
    """Constants feeding the generic excess-risk bound.

    ``separation_const`` and ``separation_power`` quantify how fast the
    population objective grows away from its minimizers; ``margin`` is the
    (assumed) margin level and ``level`` the probe threshold below it.
    ``noise_exponent`` / ``noise_const`` are only read in the low-noise
    regime.
    """

    arch: Architecture
    bound: float
    approx_error: float
    lam: float
    p: float
    separation_const: float
    separation_power: float
    margin: float
    level: float
    sample_size: int
    noise_exponent: float | None = None
    noise_const: float | None = None

    def __post_init__(self):
        if not self.bound > 0:
            raise ValueError("R must be positive")
        if self.approx_error < 0:
            raise ValueError("approximation error must be >= 0")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not self.p > 0:
            raise ValueError("p must be positive")
        if not self.separation_const > 0:
            raise ValueError("separation constant must be positive")
        if not self.separation_power > 1:
            raise ValueError("separation power must exceed 1")
        if not 0 < self.level < self.margin:
            raise BoundPreconditionError(
                f"need 0 < level < margin, got level={self.level}, margin={self.margin}"
            )
        if self.sample_size < 1:
            raise ValueError("sample size must be >= 1")

    @classmethod
    def from_json_dict(cls, doc: dict) -> "BoundInputs":
        return cls(
            arch=Architecture(tuple(doc["widths"])),
            bound=float(doc["R"]),
            approx_error=float(doc.get("approx_error", 0.0)),
            lam=float(doc.get("lambda", 0.0)),
            p=float(doc.get("p", 2.0)),
            separation_const=float(doc["separation_const"]),
            separation_power=float(doc["separation_power"]),
            margin=float(doc["margin"]),
            level=float(doc["level"]),
            sample_size=int(doc["sample_size"]),
            noise_exponent=(
                float(doc["noise_exponent"]) if "noise_exponent" in doc else None
            ),
            noise_const=float(doc["noise_const"]) if "noise_const" in doc else None,
        )


@dataclass(frozen=True)
class BoundReport:
    """Term-by-term evaluation of the generic excess-risk bound."""

    regime: str
    approximation: TermValue
    noise: TermValue | None
    margin_ratio: TermValue
    statistical: TermValue
    total: TermValue

    @property
    def overflowed(self) -> bool:
        return self.statistical.overflowed or self.total.overflowed

    def to_json_dict(self) -> dict:
        terms = {
            "approximation": self.approximation.to_json_dict(),
            "margin_ratio": self.margin_ratio.to_json_dict(),
            "statistical": self.statistical.to_json_dict(),
        }
        if self.noise is not None:
            terms["noise"] = self.noise.to_json_dict()
        return {
            "regime": self.regime,
            "terms": terms,
            "total": self.total.to_json_dict(),
            "overflowed": self.overflowed,
        }


REGIMES = ("low-noise", "hard-margin")


def excess_risk_bound(inputs: BoundInputs, regime: str) -> BoundReport:
    """Evaluate the generic excess-risk bound, summand by summand.

    Terms: approximation error inflated by the regularization budget, the
    noise mass below the margin (low-noise regime only), the squared ratio
    of the inflated approximation error to the margin gap, and the
    covering-number concentration term, which decays exponentially in the
    sample size.
    """
    if regime not in REGIMES:
        raise ValueError(f"regime must be one of {REGIMES}, got {regime!r}")
    arch, R, p = inputs.arch, inputs.bound, inputs.p
    P = arch.param_count()
    if inputs.margin <= inputs.approx_error:
        raise BoundPreconditionError(
            f"need margin > approximation error, got margin={inputs.margin}, "
            f"approx_error={inputs.approx_error}"
        )
    lam_ceiling = 2.0 ** (p - 1) * (inputs.margin - inputs.approx_error) ** 2 / (P * R**p)
    if not inputs.lam < lam_ceiling:
        raise BoundPreconditionError(
            f"need lambda < 2^(p-1) (margin - approx_error)^2 / (P R^p) = {lam_ceiling}, "
            f"got lambda={inputs.lam}"
        )
    if regime == "low-noise" and (inputs.noise_exponent is None or inputs.noise_const is None):
        raise ValueError("low-noise regime requires noise_exponent and noise_const")

    approx = inputs.approx_error + math.sqrt(2.0 ** (1.0 - p) * inputs.lam * P * R**p)
    approximation = _term_from_value(approx)

    noise = None
    if regime == "low-noise":
        noise = _term_from_value(inputs.noise_const * inputs.margin**inputs.noise_exponent)

    margin_ratio = _term_from_value(approx**2 / (inputs.margin - inputs.level) ** 2)

    K, r, L = inputs.separation_const, inputs.separation_power, arch.depth
    log_lip = log_lipschitz_bound(arch, R)
    log_shrunk_level = (1.0 - L) * math.log(2.0) + math.log(inputs.level)
    log_radius = math.log(K) + r * log_shrunk_level - math.log(24.0) - (1.0 + r) * log_lip
    covering = _covering_from_log_ratio(
        P, math.log(2.0 * R) + log_lip - log_radius
    )
    log_decay_scale = (
        2.0 * math.log(K) + 2.0 * r * log_shrunk_level - math.log(288.0) - 2.0 * r * log_lip
    )
    exponent = -math.exp(math.log(inputs.sample_size) + log_decay_scale)
    statistical = _term_from_log(math.log(4.0) + covering.log_value + exponent)

    term_logs = [approximation.log_value, margin_ratio.log_value, statistical.log_value]
    if noise is not None:
        term_logs.append(noise.log_value)
    log_total = float(np.logaddexp.reduce(term_logs))
    linear_terms = [approximation.value, margin_ratio.value, statistical.value]
    if noise is not None:
        linear_terms.append(noise.value)
    total = TermValue(value=float(sum(linear_terms)), log_value=log_total)
    return BoundReport(
        regime=regime,
        approximation=approximation,
        noise=noise,
        margin_ratio=margin_ratio,
        statistical=statistical,
        total=total,
    )


# --- approximation constants and architecture sizing -------------------------


@dataclass(frozen=True)
class ApproxConstants:
    """Constants (width, depth, error) of the smooth-function approximation rate."""

    width_const: float
    depth_const: float
    error_const: float


APPROX_VARIANTS = ("sqrt_depth", "quadratic_depth")


def approx_constants(
    smoothness: float, dim: int, regression_norm: float = 1.0, variant: str = "sqrt_depth"
) -> ApproxConstants:
    """Approximation-rate constants for s-smooth targets.

    ``sqrt_depth`` is the favorable variant whose depth constant grows like
    sqrt(s) and whose error constant absorbs the target's smoothness norm;
    ``quadratic_depth`` is the worst-case variant with depth constant 18 s^2
    (its error constant multiplies the norm separately, so the norm argument
    is not used there).
    """
    s, d = float(smoothness), int(dim)
    if not s > 0 or d < 1:
        raise ValueError(f"need smoothness > 0 and dim >= 1, got {s}, {d}")
    if variant == "sqrt_depth":
        return ApproxConstants(
            width_const=(3.0 * s) ** d * d,
            depth_const=math.sqrt(s),
            error_const=s**d * 8.0**s * regression_norm,
        )
    if variant == "quadratic_depth":
        return ApproxConstants(
            width_const=17.0 * s ** (d + 1) * 3.0**d * d,
            depth_const=18.0 * s**2,
            error_const=85.0 * (s + 1.0) ** d * 8.0**s,
        )
    raise ValueError(f"variant must be one of {APPROX_VARIANTS}, got {variant!r}")


@dataclass(frozen=True)
class SizingInputs:
    """Knobs of the rate-targeting architecture recipe.

    ``target_rate`` is the desired excess-risk exponent; ``depth_factor``
    is the free depth knob (>= 2); ``norm_scale`` bounds the sup norm of
    minimum-norm unregularized solutions; ``regression_norm`` bounds the
    smoothness norm of the regression function.
    """

    target_rate: float
    smoothness: float
    dim: int
    p: float
    depth_factor: int
    separation_power: float
    norm_scale: float
    regression_norm: float

    def __post_init__(self):
        if not self.target_rate > 0:
            raise ValueError("target rate must be positive")
        if not self.smoothness > 0:
            raise ValueError("smoothness must be positive")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not self.p > 0:
            raise ValueError("p must be positive")
        if self.depth_factor < 2:
            raise ValueError("depth factor must be >= 2")
        if not self.separation_power > 1:
            raise ValueError("separation power must exceed 1")
        if not self.norm_scale > 0 or not self.regression_norm > 0:
            raise ValueError("norm scale and regression norm must be positive")

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SizingInputs":
        return cls(
            target_rate=float(doc["target_rate"]),
            smoothness=float(doc["smoothness"]),
            dim=int(doc["dim"]),
            p=float(doc.get("p", 2.0)),
            depth_factor=int(doc.get("depth_factor", 2)),
            separation_power=float(doc["separation_power"]),
            norm_scale=float(doc.get("norm_scale", 1.0)),
            regression_norm=float(doc.get("regression_norm", 1.0)),
        )


def _rate_ceiling_bracket(smoothness: float, dim: int, depth_factor: int) -> float:
    return math.sqrt(smoothness) * depth_factor * math.log2(depth_factor) + 2.0 * dim


def rate_ceiling_hard_margin(smoothness: float, dim: int, p: float, depth_factor: int) -> float:
    """Largest admissible target rate under the hard-margin condition."""
    bracket = _rate_ceiling_bracket(smoothness, dim, depth_factor)
    return smoothness * p / (dim * (bracket * (2.0 + 2.0 * p) + p - 2.0))


def rate_ceiling_low_noise(smoothness: float, dim: int, p: float, depth_factor: int) -> float:
    """Largest admissible target rate under the low-noise condition."""
    bracket = _rate_ceiling_bracket(smoothness, dim, depth_factor)
    return 1.0 / (1.0 + (dim / p) / smoothness * (bracket * (2.0 + 2.0 * p) + p - 2.0))


@dataclass(frozen=True)
class RateSizing:
    """Closed-form architecture recipe for a target convergence rate.

    Depth is constant in n; width, the weight box, and the regularization
    ceiling are functions of the sample size.  Integer outputs round up.
    """

    inputs: SizingInputs
    constants: ApproxConstants
    depth: int
    low_noise_ceiling: float
    hard_margin_ceiling: float
    warnings: tuple[str, ...]

    def base_width(self, n: int) -> float:
        """The pre-logarithm width knob solving the approximation budget."""
        c = self.inputs
        target = n ** (-c.target_rate / c.separation_power)
        return (target / self.constants.error_const) ** (
            -c.dim / (2.0 * c.smoothness)
        ) / c.depth_factor

    def width(self, n: int) -> int:
        w0 = self.base_width(n)
        if w0 <= 1.0:
            return 1
        return max(math.ceil(self.constants.width_const * w0 * math.log2(w0)), 1)

    def param_count_cap(self, n: int) -> int:
        w = self.width(n)
        return self.depth * (w * w + w)

    def weight_bound(self, n: int) -> float:
        return self.inputs.norm_scale * self.param_count_cap(n) ** (1.0 / self.inputs.p)

    def lambda_ceiling(self, n: int) -> float:
        c = self.inputs
        eps_sq = n ** (-2.0 * c.target_rate / c.separation_power)
        return (
            2.0 ** (c.p - 1.0)
            * eps_sq
            / (c.norm_scale**c.p * float(self.param_count_cap(n)) ** 2)
        )

    def evaluate(self, n: int) -> dict:
        w0 = self.base_width(n)
        return {
            "n": n,
            "width": self.width(n),
            "depth": self.depth,
            "param_count_cap": self.param_count_cap(n),
            "weight_bound": self.weight_bound(n),
            "lambda_ceiling": self.lambda_ceiling(n),
            "width_formula_valid": w0 >= 2.0,
        }

    def to_json_dict(self, n_grid=()) -> dict:
        return {
            "depth": self.depth,
            "rate_ceiling_low_noise": self.low_noise_ceiling,
            "rate_ceiling_hard_margin": self.hard_margin_ceiling,
            "warnings": list(self.warnings),
            "per_n": [self.evaluate(int(n)) for n in n_grid],
        }


def sizing_for_rate(inputs: SizingInputs) -> RateSizing:
    """Instantiate the rate-targeting recipe and check rate admissibility.

    A target rate above a regime's ceiling is reported in ``warnings`` rather
    than silently clipped.
    """
    c = approx_constants(inputs.smoothness, inputs.dim, inputs.regression_norm, "sqrt_depth")
    depth = math.ceil(
        c.depth_const * inputs.depth_factor * math.log2(inputs.depth_factor) + 2 * inputs.dim
    )
    low = rate_ceiling_low_noise(inputs.smoothness, inputs.dim, inputs.p, inputs.depth_factor)
    hard = rate_ceiling_hard_margin(inputs.smoothness, inputs.dim, inputs.p, inputs.depth_factor)
    warnings = []
    if inputs.target_rate >= low:
        warnings.append(
            f"target rate {inputs.target_rate} exceeds the low-noise ceiling {low}"
        )
    if inputs.target_rate >= hard:
        warnings.append(
            f"target rate {inputs.target_rate} exceeds the hard-margin ceiling {hard}"
        )
    return RateSizing(
        inputs=inputs,
        constants=c,
        depth=depth,
        low_noise_ceiling=low,
        hard_margin_ceiling=hard,
        warnings=tuple(warnings),
    )


# --- well-specified (regression function representable) bound ----------------


@dataclass(frozen=True)
class WellSpecifiedBound:
    """Evaluation of the exponential bound in the representable case."""

    decay_rate: TermValue  # per-sample rate inside exp(-n * rate)
    prefactor: TermValue  # 1 + 4 * covering number
    lambda_ceiling: float
    total: TermValue

    def to_json_dict(self) -> dict:
        return {
            "decay_rate": self.decay_rate.to_json_dict(),
            "prefactor": self.prefactor.to_json_dict(),
            "lambda_ceiling": self.lambda_ceiling,
            "total": self.total.to_json_dict(),
            "overflowed": self.prefactor.overflowed or self.total.overflowed,
        }


def well_specified_bound(
    arch: Architecture,
    bound: float,
    margin: float,
    separation_const: float,
    separation_power: float,
    p: float,
    sample_size: int,
) -> WellSpecifiedBound:
    """Exponential excess-risk bound when the regression function is realizable.

    Returns the per-sample decay rate, the covering-number prefactor, the
    admissible regularization ceiling, and the two-term total
    prefactor * exp(-n * rate) + (4 / margin^2) * exp(-2 n * rate).
    """
    if not 0 < margin <= 1:
        raise ValueError(f"margin must be in (0, 1], got {margin}")
    if not separation_power > 1:
        raise ValueError(f"separation power must exceed 1, got {separation_power}")
    K, r, L = separation_const, separation_power, arch.depth
    P = arch.param_count()
    log_lip = log_lipschitz_bound(arch, bound)
    log_shrunk = -L * math.log(2.0) + math.log(margin)
    log_rate = 2.0 * math.log(K) + 2.0 * r * log_shrunk - math.log(288.0) - 2.0 * r * log_lip
    decay_rate = _term_from_log(log_rate)
    log_radius = math.log(K) + r * log_shrunk - math.log(24.0) - (1.0 + r) * log_lip
    covering = _covering_from_log_ratio(P, math.log(2.0 * bound) + log_lip - log_radius)
    log_prefactor = float(np.logaddexp(0.0, math.log(4.0) + covering.log_value))
    prefactor = _term_from_log(log_prefactor)
    n_rate = sample_size * decay_rate.value
    lambda_ceiling = 2.0 ** (p - 1.0) / (P * bound**p) * math.exp(-2.0 * n_rate)
    log_total = float(
        np.logaddexp(
            log_prefactor - n_rate,
            math.log(4.0 / margin**2) - 2.0 * n_rate,
        )
    )
    return WellSpecifiedBound(
        decay_rate=decay_rate,
        prefactor=prefactor,
        lambda_ceiling=lambda_ceiling,
        total=_term_from_log(log_total),
    )
