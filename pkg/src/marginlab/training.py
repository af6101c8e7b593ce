"""Square-loss empirical risk with lp penalty and its approximate minimization.

The training objective over a parameter box is

    mean_i (clip_D(f(x_i)) - y_i)^2  +  (lam/2) * sum |entry|^p.

Exact global minimization is intractable for ReLU networks, so the solver
runs projected gradient descent with Armijo backtracking from several seeded
random initializations and returns, among all restarts whose objective ties
the best one up to ``tie_tol``, the parametrization with the smallest
sup-norm (minimum-norm tie-breaking).

For p < 2 the penalty is not differentiable at 0; gradients (and the line
search) use the smoothed surrogate (w^2 + mu^2)^(p/2), which matches the true
penalty to O(mu^p).  Reported objectives always use the exact penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nets import (
    Architecture,
    ClipSpec,
    Parametrization,
    forward,
    linf_norm,
    project_box,
    random_init,
)
from .seeding import derive_seed

ARMIJO_CONSTANT = 1e-4
_MAX_HALVINGS = 60
_MAX_STEP = 1e6


class TrainingDivergedError(RuntimeError):
    """The objective or gradient became non-finite."""


@dataclass(frozen=True)
class Dataset:
    """An i.i.d. sample of (input, +-1 label) pairs with its generation seed."""

    inputs: np.ndarray  # (n, d), coordinates in [0, 1]
    labels: np.ndarray  # (n,), values in {-1, +1}
    seed: int = 0

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.labels, dtype=int)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError(f"inputs must be a nonempty (n, d) array, got {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError(f"labels shape {y.shape} != ({X.shape[0]},)")
        if np.min(X) < 0.0 or np.max(X) > 1.0:
            raise ValueError("input coordinates must lie in [0, 1]")
        if not np.all(np.abs(y) == 1):
            raise ValueError("labels must be -1 or +1")
        X = X.copy()
        y = y.copy()
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "seed", int(self.seed))

    def __len__(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    """Solver settings.  JSON keys: lambda, p, R, restarts, max_iters,
    grad_tol, tie_tol, smoothing_mu, seed."""

    lam: float = 0.0
    p: float = 2.0
    bound: float = 1.0
    restarts: int = 1
    max_iters: int = 500
    grad_tol: float = 1e-5
    tie_tol: float = 1e-6
    smoothing_mu: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not self.p > 0:
            raise ValueError(f"p must be positive, got {self.p}")
        if not self.bound > 0:
            raise ValueError(f"R must be positive, got {self.bound}")
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        for name in ("grad_tol", "tie_tol", "smoothing_mu"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TrainConfig":
        known = {
            "lambda": "lam",
            "p": "p",
            "R": "bound",
            "restarts": "restarts",
            "max_iters": "max_iters",
            "grad_tol": "grad_tol",
            "tie_tol": "tie_tol",
            "smoothing_mu": "smoothing_mu",
            "seed": "seed",
        }
        unknown = set(doc) - set(known)
        if unknown:
            raise ValueError(f"unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**{attr: doc[key] for key, attr in known.items() if key in doc})

    def to_json_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "p": self.p,
            "R": self.bound,
            "restarts": self.restarts,
            "max_iters": self.max_iters,
            "grad_tol": self.grad_tol,
            "tie_tol": self.tie_tol,
            "smoothing_mu": self.smoothing_mu,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TrainResult:
    params: Parametrization
    objective: float  # exact regularized objective at the returned params
    grad_norm: float  # sup norm of the projected gradient at the returned params
    restart_index: int
    iterations: int

    def to_json_dict(self) -> dict:
        from .nets import to_json_dict as params_doc

        return {
            "objective": self.objective,
            "grad_norm": self.grad_norm,
            "restart_index": self.restart_index,
            "iterations": self.iterations,
            "params": params_doc(self.params),
        }


# --- objective and gradient -------------------------------------------------


def empirical_risk(params: Parametrization, clip: ClipSpec, data: Dataset) -> float:
    """Mean squared error of the clipped network against the +-1 labels."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    out = forward(params, data.inputs)
    clipped = np.clip(out, -clip.level, clip.level)
    return float(np.mean((clipped - data.labels) ** 2))


def penalty(params: Parametrization, p: float) -> float:
    """Exact penalty sum |entry|^p (the lp norm raised to the p)."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    return float(sum(np.sum(np.abs(a) ** p) for a in params.entries()))


def smoothed_penalty(params: Parametrization, p: float, mu: float) -> float:
    """Differentiable surrogate: sum (w^2 + mu^2)^(p/2) when p < 2, else exact."""
    if p >= 2:
        return penalty(params, p)
    return float(sum(np.sum((a * a + mu * mu) ** (p / 2)) for a in params.entries()))


def regularized_objective(
    params: Parametrization, clip: ClipSpec, data: Dataset, lam: float, p: float
) -> float:
    """Empirical risk plus (lam/2) times the exact penalty."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    return empirical_risk(params, clip, data) + 0.5 * lam * penalty(params, p)


def _working_objective(
    params: Parametrization, clip: ClipSpec, data: Dataset, lam: float, p: float, mu: float
) -> float:
    """The objective the solver descends: smoothed penalty for p < 2."""
    return empirical_risk(params, clip, data) + 0.5 * lam * smoothed_penalty(params, p, mu)


def _forward_trace(params: Parametrization, X: np.ndarray):
    preacts, acts = [], [X]
    z = X
    for W, B in params.layers[:-1]:
        a = z @ W.T + B
        preacts.append(a)
        z = np.maximum(a, 0.0)
        acts.append(z)
    W, B = params.layers[-1]
    return preacts, acts, (z @ W.T + B)[:, 0]


def objective_gradient(
    params: Parametrization,
    clip: ClipSpec,
    data: Dataset,
    lam: float,
    p: float,
    mu: float,
) -> Parametrization:
    """Reverse-mode gradient of the (smoothed) regularized objective.

    Subgradient conventions: ReLU' at 0 is 0, and the truncation derivative
    at |output| >= D is 0.  The result reuses the Parametrization container
    (same shapes, unbounded) purely as a gradient holder.
    """
    if not mu > 0:
        raise ValueError(f"smoothing scale mu must be positive, got {mu}")
    X = data.inputs
    y = data.labels.astype(float)
    n = len(data)
    preacts, acts, out = _forward_trace(params, X)
    clipped = np.clip(out, -clip.level, clip.level)
    upstream = (2.0 / n) * (clipped - y) * (np.abs(out) < clip.level)
    delta = upstream[:, None]
    depth = len(params.layers)
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * depth  # type: ignore[list-item]
    for l in range(depth - 1, -1, -1):
        W, _ = params.layers[l]
        grads[l] = (delta.T @ acts[l], delta.sum(axis=0))
        if l > 0:
            delta = (delta @ W) * (preacts[l - 1] > 0)
    if lam > 0:
        half_lam = 0.5 * lam
        penalized = []
        for (gW, gB), (W, B) in zip(grads, params.layers):
            if p >= 2:
                pW = p * np.sign(W) * np.abs(W) ** (p - 1)
                pB = p * np.sign(B) * np.abs(B) ** (p - 1)
            else:
                pW = p * W * (W * W + mu * mu) ** (p / 2 - 1)
                pB = p * B * (B * B + mu * mu) ** (p / 2 - 1)
            penalized.append((gW + half_lam * pW, gB + half_lam * pB))
        grads = penalized
    for gW, gB in grads:
        if not (np.all(np.isfinite(gW)) and np.all(np.isfinite(gB))):
            raise TrainingDivergedError("non-finite values encountered in gradient")
    return Parametrization(params.arch, tuple(grads), bound=math.inf)


def _projected_gradient_norm(
    params: Parametrization, grad: Parametrization, bound: float
) -> float:
    """Sup norm of the gradient with components blocked by the box zeroed.

    At an upper-bound entry a negative gradient component (which would push
    the entry further out) is inactive, and symmetrically at the lower bound.
    """
    worst = 0.0
    for (W, B), (gW, gB) in zip(params.layers, grad.layers):
        for val, g in ((W, gW), (B, gB)):
            active = np.where(
                ((val >= bound) & (g < 0)) | ((val <= -bound) & (g > 0)), 0.0, g
            )
            worst = max(worst, float(np.max(np.abs(active), initial=0.0)))
    return worst


def _descend(params: Parametrization, grad: Parametrization, step: float, bound: float):
    layers = tuple(
        (np.clip(W - step * gW, -bound, bound), np.clip(B - step * gB, -bound, bound))
        for (W, B), (gW, gB) in zip(params.layers, grad.layers)
    )
    return Parametrization(params.arch, layers, bound=bound)


def _inner_with_difference(grad: Parametrization, new: Parametrization, old: Parametrization) -> float:
    total = 0.0
    for (gW, gB), (nW, nB), (oW, oB) in zip(grad.layers, new.layers, old.layers):
        total += float(np.vdot(gW, nW - oW) + np.vdot(gB, nB - oB))
    return total


def train_single(
    init: Parametrization,
    clip: ClipSpec,
    data: Dataset,
    config: TrainConfig,
    restart_index: int = 0,
) -> TrainResult:
    """Projected gradient descent with backtracking from one initialization.

    Stops when the projected-gradient sup norm drops to ``grad_tol``, after
    ``max_iters`` accepted steps, or when backtracking stalls at numerical
    precision.  The descended (smoothed) objective is nonincreasing across
    accepted steps and every iterate stays inside the box exactly.
    """
    bound = config.bound
    if linf_norm(init) > bound:
        raise ValueError("initialization lies outside the parameter box")
    theta = project_box(init, bound)

    def working(candidate):
        return _working_objective(candidate, clip, data, config.lam, config.p, config.smoothing_mu)

    obj = working(theta)
    if not math.isfinite(obj):
        raise TrainingDivergedError(f"non-finite objective at initialization: {obj}")
    iterations = 0
    step = 1.0
    while iterations < config.max_iters:
        grad = objective_gradient(theta, clip, data, config.lam, config.p, config.smoothing_mu)
        if _projected_gradient_norm(theta, grad, bound) <= config.grad_tol:
            break
        step = min(step * 2.0, _MAX_STEP)
        # Halve until the Armijo test passes, then keep halving while the
        # candidate strictly improves: the larger first-acceptable step can
        # overshoot into the truncation's zero-gradient plateau, which a
        # smaller step strictly dominates.
        best = best_obj = None
        for _ in range(_MAX_HALVINGS):
            cand = _descend(theta, grad, step, bound)
            cand_obj = working(cand)
            if not math.isfinite(cand_obj):
                raise TrainingDivergedError(f"non-finite objective during line search: {cand_obj}")
            slope = _inner_with_difference(grad, cand, theta)
            if cand_obj <= obj + ARMIJO_CONSTANT * slope and cand_obj < obj:
                if best_obj is not None and cand_obj > best_obj:
                    break
                if best_obj is None or cand_obj < best_obj:
                    best, best_obj, accepted_step = cand, cand_obj, step
            elif best_obj is not None:
                break
            step *= 0.5
        if best is None:
            break
        theta, obj, step = best, best_obj, accepted_step
        iterations += 1
    final_grad = objective_gradient(theta, clip, data, config.lam, config.p, config.smoothing_mu)
    return TrainResult(
        params=theta,
        objective=regularized_objective(theta, clip, data, config.lam, config.p),
        grad_norm=_projected_gradient_norm(theta, final_grad, bound),
        restart_index=restart_index,
        iterations=iterations,
    )


def solve_lambda_erm(
    arch: Architecture,
    clip: ClipSpec,
    data: Dataset,
    config: TrainConfig,
    restart_seeds: list[int] | None = None,
) -> TrainResult:
    """Multi-restart approximate ERM with minimum-norm tie-breaking.

    Restart initializations are seeded by splitting ``config.seed`` (or by
    the explicit ``restart_seeds``, which may repeat).  Among all restarts
    whose objective is within ``tie_tol`` (relative plus absolute) of the
    best one, the result with the smallest parameter sup-norm wins; remaining
    ties go to the lowest restart index, so the output is deterministic.
    """
    if restart_seeds is None:
        seeds = [derive_seed(config.seed, k) for k in range(config.restarts)]
    else:
        seeds = [int(s) for s in restart_seeds]
        if not seeds:
            raise ValueError("restart_seeds must be nonempty")
    results: list[TrainResult] = []
    failures: list[str] = []
    for k, seed in enumerate(seeds):
        init = random_init(arch, config.bound, seed)
        try:
            results.append(train_single(init, clip, data, config, restart_index=k))
        except TrainingDivergedError as exc:
            failures.append(f"restart {k} (seed {seed}): {exc}")
    if not results:
        raise TrainingDivergedError(
            "all restarts produced non-finite objectives: " + "; ".join(failures)
        )
    best = min(r.objective for r in results)
    cutoff = best * (1.0 + config.tie_tol) + config.tie_tol
    tied = [r for r in results if r.objective <= cutoff]
    return min(tied, key=lambda r: (linf_norm(r.params), r.restart_index))
