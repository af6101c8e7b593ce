"""Fully-connected ReLU networks as explicit weight/bias tuples.

A network is a list of affine layers (W_l, B_l) applied with elementwise
ReLU between them and no activation on the last layer.  Outputs can be
truncated to [-D, D]; the truncation is itself realizable by a fixed
4-neuron ReLU block whose parameters are frozen: they never count toward
the free-parameter total, the lp penalty, or gradients.

All types are immutable after construction and all operations are pure,
so concurrent evaluation is safe.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np


class ShapeMismatchError(ValueError):
    """Operands describe incompatible network shapes."""


@dataclass(frozen=True)
class Architecture:
    """Layer-width vector (a_0, ..., a_L): input width first, output last.

    a_0 is the input dimension, a_L must equal 1.  Depth L is the number of
    affine layers; width is the largest entry of the vector.
    """

    widths: tuple[int, ...]

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        object.__setattr__(self, "widths", widths)
        if len(widths) < 2:
            raise ValueError(f"need at least input and output widths, got {widths}")
        if any(w < 1 for w in widths):
            raise ValueError(f"all widths must be >= 1, got {widths}")
        if widths[-1] != 1:
            raise ValueError(f"output width must be 1, got {widths[-1]}")

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def depth(self) -> int:
        return len(self.widths) - 1

    @property
    def width(self) -> int:
        return max(self.widths)

    def param_count(self) -> int:
        """Number of free parameters: sum of a_l * a_{l-1} + a_l over layers."""
        return sum(o * i + o for i, o in zip(self.widths[:-1], self.widths[1:]))

    def layer_shapes(self) -> list[tuple[tuple[int, int], tuple[int]]]:
        return [((o, i), (o,)) for i, o in zip(self.widths[:-1], self.widths[1:])]


def param_count(arch: Architecture) -> int:
    return arch.param_count()


def _frozen_array(a, shape) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(shape)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Parametrization:
    """Weights and biases of one network, optionally confined to a box.

    ``layers[l] = (W, B)`` with W of shape (a_l, a_{l-1}) and B of shape
    (a_l,).  If ``bound`` is finite every entry must lie in [-bound, bound].
    Arrays are copied and marked read-only.
    """

    arch: Architecture
    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    bound: float = math.inf

    def __post_init__(self):
        shapes = self.arch.layer_shapes()
        if len(self.layers) != len(shapes):
            raise ShapeMismatchError(
                f"expected {len(shapes)} layers, got {len(self.layers)}"
            )
        frozen = []
        for (W, B), (w_shape, b_shape) in zip(self.layers, shapes):
            W = np.asarray(W, dtype=float)
            B = np.asarray(B, dtype=float)
            if W.shape != w_shape:
                raise ShapeMismatchError(f"weight shape {W.shape} != {w_shape}")
            if B.shape != b_shape:
                raise ShapeMismatchError(f"bias shape {B.shape} != {b_shape}")
            frozen.append((_frozen_array(W, w_shape), _frozen_array(B, b_shape)))
        object.__setattr__(self, "layers", tuple(frozen))
        bound = float(self.bound)
        object.__setattr__(self, "bound", bound)
        if not bound > 0:
            raise ValueError(f"parameter bound must be positive, got {bound}")
        if math.isfinite(bound):
            worst = linf_norm(self)
            if worst > bound:
                raise ValueError(
                    f"entry magnitude {worst} exceeds parameter bound {bound}"
                )

    def entries(self):
        """Iterate over all weight/bias arrays."""
        for W, B in self.layers:
            yield W
            yield B


@dataclass(frozen=True)
class ClipSpec:
    """Output-truncation constant D > 0 (default 1, matching labels in [-1,1])."""

    level: float = 1.0

    def __post_init__(self):
        if not self.level > 0:
            raise ValueError(f"clip level must be positive, got {self.level}")


def forward(params: Parametrization, x) -> float | np.ndarray:
    """Evaluate the network: affine, ReLU, ..., ReLU, affine (no final activation).

    Accepts a single input vector of length a_0 or a batch of shape (m, a_0);
    returns a float or an array of shape (m,) accordingly.
    """
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    batch = arr[None, :] if single else arr
    if batch.ndim != 2 or batch.shape[1] != params.arch.input_dim:
        raise ShapeMismatchError(
            f"input dimension {arr.shape} incompatible with a_0={params.arch.input_dim}"
        )
    z = batch
    for W, B in params.layers[:-1]:
        z = np.maximum(z @ W.T + B, 0.0)
    W, B = params.layers[-1]
    out = (z @ W.T + B)[:, 0]
    return float(out[0]) if single else out


def clip_network(spec: ClipSpec) -> Parametrization:
    """The fixed 4-neuron depth-2 network realizing truncation to [-D, D].

    Realization: relu(x) - relu(-x) - relu(x-D) + relu(-x-D).  Its
    parameters are frozen by convention: callers must not include them in
    penalties, parameter counts, or training.
    """
    D = spec.level
    W1 = [[1.0], [-1.0], [1.0], [-1.0]]
    B1 = [0.0, 0.0, -D, -D]
    W2 = [[1.0, -1.0, -1.0, 1.0]]
    B2 = [0.0]
    return Parametrization(Architecture((1, 4, 1)), ((W1, B1), (W2, B2)))


def clip_values(spec: ClipSpec, values):
    """Pointwise truncation to [-D, D] (exact, unlike the ReLU realization)."""
    return np.clip(values, -spec.level, spec.level)


def forward_clipped(params: Parametrization, spec: ClipSpec, x) -> float | np.ndarray:
    """Network output truncated to [-D, D]; always within the box exactly."""
    out = forward(params, x)
    if isinstance(out, float):
        return float(np.clip(out, -spec.level, spec.level))
    return np.clip(out, -spec.level, spec.level)


def lp_norm_p(params: Parametrization, p: float) -> float:
    """The penalty quantity: sum of |entry|^p over all weights and biases.

    Note this is the p-th power of the lp norm, matching how the penalty
    enters the training objective.
    """
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    return float(sum(np.sum(np.abs(a) ** p) for a in params.entries()))


def linf_norm(params: Parametrization) -> float:
    return float(max(np.max(np.abs(a), initial=0.0) for a in params.entries()))


def linf_dist(a: Parametrization, b: Parametrization) -> float:
    """Max absolute entrywise difference; requires identical architectures."""
    if a.arch.widths != b.arch.widths:
        raise ShapeMismatchError(f"architectures differ: {a.arch.widths} vs {b.arch.widths}")
    return float(
        max(
            np.max(np.abs(ax - bx), initial=0.0)
            for ax, bx in zip(a.entries(), b.entries())
        )
    )


def random_init(arch: Architecture, bound: float, seed: int) -> Parametrization:
    """Training initialization: i.i.d. uniform entries on [-c, c].

    The scale c = min(bound, 1/width) keeps initial outputs O(1) while
    respecting the box.
    """
    if not bound > 0:
        raise ValueError(f"bound must be positive, got {bound}")
    rng = np.random.default_rng(seed)
    scale = min(bound, 1.0 / arch.width)
    layers = [
        (rng.uniform(-scale, scale, size=ws), rng.uniform(-scale, scale, size=bs))
        for ws, bs in arch.layer_shapes()
    ]
    return Parametrization(arch, tuple(layers), bound=bound)


def uniform_parametrization(arch: Architecture, bound: float, seed: int) -> Parametrization:
    """I.i.d. uniform entries over the full box [-bound, bound] (teacher draws)."""
    if not bound > 0:
        raise ValueError(f"bound must be positive, got {bound}")
    rng = np.random.default_rng(seed)
    layers = [
        (rng.uniform(-bound, bound, size=ws), rng.uniform(-bound, bound, size=bs))
        for ws, bs in arch.layer_shapes()
    ]
    return Parametrization(arch, tuple(layers), bound=bound)


def project_box(params: Parametrization, bound: float) -> Parametrization:
    """Clamp each entry to [-bound, bound]; idempotent."""
    if not bound > 0:
        raise ValueError(f"bound must be positive, got {bound}")
    layers = tuple(
        (np.clip(W, -bound, bound), np.clip(B, -bound, bound))
        for W, B in params.layers
    )
    return Parametrization(params.arch, layers, bound=bound)


# --- function-distance surrogate -------------------------------------------
#
# Exact sup norms over the cube are not computable; the documented surrogate
# is a deterministic 50-points-per-axis grid for dimension <= 3 and 1e5
# quasi-random (Halton) points above that.

GRID_POINTS_PER_AXIS = 50
QUASI_RANDOM_POINTS = 100_000


def evaluation_grid(dim: int) -> np.ndarray:
    """Deterministic probe points in [0,1]^dim for sup-norm estimation."""
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    if dim <= 3:
        axes = [np.linspace(0.0, 1.0, GRID_POINTS_PER_AXIS)] * dim
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)
    from scipy.stats import qmc

    return qmc.Halton(d=dim, scramble=False).random(QUASI_RANDOM_POINTS)


def sup_distance(f, g, dim: int, grid: np.ndarray | None = None) -> float:
    """Grid-estimated sup norm of f - g over the unit cube.

    f and g must accept batches of shape (m, dim).
    """
    pts = evaluation_grid(dim) if grid is None else grid
    return float(np.max(np.abs(np.asarray(f(pts)) - np.asarray(g(pts)))))


def realization_distance(
    a: Parametrization, b: Parametrization, grid: np.ndarray | None = None
) -> float:
    """Grid-estimated sup norm of the two (unclipped) realizations' difference."""
    if a.arch.widths != b.arch.widths:
        raise ShapeMismatchError(f"architectures differ: {a.arch.widths} vs {b.arch.widths}")
    pts = evaluation_grid(a.arch.input_dim) if grid is None else grid
    return float(np.max(np.abs(forward(a, pts) - forward(b, pts))))


# --- serialization ----------------------------------------------------------


def to_json_dict(params: Parametrization, clip: ClipSpec | None = None) -> dict:
    """JSON document for a parametrization; floats round-trip bit-faithfully."""
    doc = {
        "widths": list(params.arch.widths),
        "layers": [
            {"W": [[float(v) for v in row] for row in W], "B": [float(v) for v in B]}
            for W, B in params.layers
        ],
        "R": float(params.bound) if math.isfinite(params.bound) else None,
        "clip_D": float(clip.level) if clip is not None else None,
    }
    return doc


def from_json_dict(doc: dict) -> tuple[Parametrization, ClipSpec | None]:
    arch = Architecture(tuple(doc["widths"]))
    layers = tuple((layer["W"], layer["B"]) for layer in doc["layers"])
    bound = doc.get("R")
    params = Parametrization(arch, layers, bound=math.inf if bound is None else bound)
    clip_level = doc.get("clip_D")
    return params, (ClipSpec(clip_level) if clip_level is not None else None)


def save_parametrization(path, params: Parametrization, clip: ClipSpec | None = None):
    with open(path, "w") as fh:
        json.dump(to_json_dict(params, clip), fh)


def load_parametrization(path) -> tuple[Parametrization, ClipSpec | None]:
    with open(path) as fh:
        return from_json_dict(json.load(fh))
