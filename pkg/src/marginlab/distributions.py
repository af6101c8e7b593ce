"""Synthetic joint laws on [0,1]^d x {-1,+1} with exactly evaluable E[Y|X].

Every family uses the same label mechanism: draw X from the input marginal,
draw U uniform on [-1,1], and set Y = +1 iff U <= r(X), where r is the
family's regression function with values in [-1,1].  This guarantees
E[Y | X = x] = r(x) by construction for all families, including the
teacher-student case where r is itself a clipped network.

Sign convention: sign(0) = 0, and a 0 prediction always counts as a
classification error.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .nets import ClipSpec, Parametrization, forward_clipped, load_parametrization
from .training import Dataset

ANALYTIC_KINDS = ("constant-margin", "affine", "smooth-hard-margin")


def strict_sign(values):
    """Sign with sign(0) = 0, elementwise."""
    return np.sign(np.asarray(values)).astype(int)


@dataclass(frozen=True)
class Marginal:
    """Input marginal on [0,1]^d: uniform, or a product of Beta laws."""

    kind: str = "uniform"
    dim: int = 1
    alphas: tuple[float, ...] | None = None
    betas: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")
        if self.kind == "uniform":
            if self.alphas is not None or self.betas is not None:
                raise ValueError("uniform marginal takes no shape parameters")
        elif self.kind == "beta":
            alphas = tuple(float(a) for a in (self.alphas or ()))
            betas = tuple(float(b) for b in (self.betas or ()))
            if len(alphas) != self.dim or len(betas) != self.dim:
                raise ValueError("beta marginal needs one (alpha, beta) pair per axis")
            if any(a <= 0 for a in alphas) or any(b <= 0 for b in betas):
                raise ValueError("beta shape parameters must be positive")
            object.__setattr__(self, "alphas", alphas)
            object.__setattr__(self, "betas", betas)
        else:
            raise ValueError(f"unknown marginal kind {self.kind!r}")

    def draw(self, m: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "uniform":
            return rng.random((m, self.dim))
        cols = [rng.beta(a, b, size=m) for a, b in zip(self.alphas, self.betas)]
        return np.stack(cols, axis=1)

    def to_json_dict(self) -> dict:
        doc = {"kind": self.kind, "d": self.dim}
        if self.kind == "beta":
            doc["alphas"] = list(self.alphas)
            doc["betas"] = list(self.betas)
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Marginal":
        return cls(
            kind=doc.get("kind", "uniform"),
            dim=int(doc.get("d", 1)),
            alphas=tuple(doc["alphas"]) if "alphas" in doc else None,
            betas=tuple(doc["betas"]) if "betas" in doc else None,
        )


@dataclass(frozen=True)
class SyntheticDistribution:
    """A joint law given by an input marginal and a regression function.

    ``regression`` maps batches (m, d) to values in [-1, 1].  When the family
    keeps every |r(X)| above a known level, ``hard_margin`` records it; when
    the optimal risk has a closed form, ``exact_bayes_risk`` records it.
    """

    marginal: Marginal
    regression: object  # callable (m, d) -> (m,)
    descriptor: dict
    hard_margin: float | None = None
    exact_bayes_risk: float | None = None

    @property
    def dim(self) -> int:
        return self.marginal.dim


@dataclass(frozen=True)
class TeacherSpec:
    """A clipped network together with an input marginal."""

    teacher: Parametrization
    marginal: Marginal
    clip: ClipSpec = ClipSpec(1.0)

    def __post_init__(self):
        if self.teacher.arch.input_dim != self.marginal.dim:
            raise ValueError(
                f"teacher input dim {self.teacher.arch.input_dim} != marginal dim {self.marginal.dim}"
            )


def teacher_student(spec: TeacherSpec) -> SyntheticDistribution:
    """Distribution whose regression function is the clipped teacher network."""
    teacher, clip = spec.teacher, spec.clip

    def regression(X):
        vals = forward_clipped(teacher, clip, np.asarray(X, dtype=float))
        return np.asarray(vals, dtype=float)

    descriptor = {"kind": "teacher", "params": {"marginal": spec.marginal.to_json_dict()}}
    return SyntheticDistribution(spec.marginal, regression, descriptor)


def _halfspace_pattern(X):
    return np.where(X[:, 0] >= 0.5, 1.0, -1.0)


_PATTERNS = {
    "halfspace": _halfspace_pattern,
    "positive": lambda X: np.ones(X.shape[0]),
}


def analytic_family(kind: str, params: dict | None = None) -> SyntheticDistribution:
    """Closed-form regression families with known margin behavior.

    - ``constant-margin``: r(x) = delta * s(x) for a sign pattern s, so
      |r| equals delta everywhere (hard margin at any level below delta).
    - ``affine``: r(x) = 2 x_1 - 1; under the uniform marginal
      P(|r(X)| <= t) = t, i.e. noise exponent 1 with constant 1.
    - ``smooth-hard-margin``: r(x) = delta + (1 - delta) * prod_i sin^2(pi x_i),
      a smooth function with values in [delta, 1].
    """
    params = dict(params or {})
    if kind not in ANALYTIC_KINDS:
        raise ValueError(f"unknown family {kind!r}; expected one of {ANALYTIC_KINDS}")
    dim = int(params.pop("d", 1))
    marginal = Marginal(kind="uniform", dim=dim)

    if kind == "constant-margin":
        delta = float(params.pop("delta"))
        pattern_name = params.pop("pattern", "halfspace")
        if params:
            raise ValueError(f"unexpected parameters {sorted(params)}")
        if not 0 < delta <= 1:
            raise ValueError(f"delta must be in (0, 1], got {delta}")
        if pattern_name not in _PATTERNS:
            raise ValueError(f"unknown sign pattern {pattern_name!r}")
        pattern = _PATTERNS[pattern_name]

        def regression(X):
            return delta * pattern(np.asarray(X, dtype=float))

        descriptor = {
            "kind": kind,
            "params": {"delta": delta, "d": dim, "pattern": pattern_name},
        }
        return SyntheticDistribution(
            marginal,
            regression,
            descriptor,
            hard_margin=delta,
            exact_bayes_risk=(1.0 - delta) / 2.0,
        )

    if kind == "affine":
        if params:
            raise ValueError(f"unexpected parameters {sorted(params)}")

        def regression(X):
            X = np.asarray(X, dtype=float)
            return 2.0 * X[:, 0] - 1.0

        descriptor = {"kind": kind, "params": {"d": dim}}
        return SyntheticDistribution(marginal, regression, descriptor)

    delta = float(params.pop("delta"))
    if params:
        raise ValueError(f"unexpected parameters {sorted(params)}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must be in (0, 1), got {delta}")

    def regression(X):
        X = np.asarray(X, dtype=float)
        smooth = np.prod(np.sin(np.pi * X) ** 2, axis=1)
        return delta + (1.0 - delta) * smooth

    descriptor = {"kind": kind, "params": {"delta": delta, "d": dim}}
    return SyntheticDistribution(marginal, regression, descriptor, hard_margin=delta)


def regression_values(dist: SyntheticDistribution, X) -> np.ndarray:
    """Batch regression values; asserts the [-1, 1] range invariant."""
    vals = np.asarray(dist.regression(np.asarray(X, dtype=float)), dtype=float)
    if vals.size and float(np.max(np.abs(vals))) > 1.0:
        raise AssertionError("regression values left [-1, 1]")
    return vals


def sample(dist: SyntheticDistribution, n: int, seed: int) -> Dataset:
    """n i.i.d. pairs via the uniform-threshold label mechanism."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    X = dist.marginal.draw(n, rng)
    U = rng.uniform(-1.0, 1.0, size=n)
    vals = regression_values(dist, X)
    Y = np.where(U <= vals, 1, -1)
    return Dataset(inputs=X, labels=Y, seed=seed)


def _check_point(dist: SyntheticDistribution, x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (dist.dim,):
        raise ValueError(f"point shape {arr.shape} != ({dist.dim},)")
    if np.min(arr) < 0.0 or np.max(arr) > 1.0:
        raise ValueError(f"point {arr} outside the unit cube")
    return arr


def bayes_regression(dist: SyntheticDistribution, x) -> float:
    """Exact conditional mean E[Y | X = x] at one point of the unit cube."""
    arr = _check_point(dist, x)
    return float(regression_values(dist, arr[None, :])[0])


def bayes_classify(dist: SyntheticDistribution, x) -> int:
    """The optimal classifier sign(E[Y|X=x]), with sign(0) = 0."""
    return int(strict_sign(bayes_regression(dist, x)))


def bayes_signs(dist: SyntheticDistribution, X) -> np.ndarray:
    """Batch optimal-classifier predictions."""
    return strict_sign(regression_values(dist, X))


def bayes_risk(dist: SyntheticDistribution, m: int, seed: int):
    """Optimal misclassification risk, E[(1 - |r(X)|)/2].

    Returns the closed form (zero standard error) when the family has one,
    otherwise a Monte-Carlo estimate.  The identity is validated against a
    brute-force label-frequency oracle in the test suite.
    """
    from .metrics import RiskEstimate

    if m < 1:
        raise ValueError(f"need m >= 1, got {m}")
    if dist.exact_bayes_risk is not None:
        return RiskEstimate(value=float(dist.exact_bayes_risk), std_error=0.0, m=m, seed=seed)
    rng = np.random.default_rng(seed)
    X = dist.marginal.draw(m, rng)
    vals = (1.0 - np.abs(regression_values(dist, X))) / 2.0
    value = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return RiskEstimate(value=value, std_error=stderr, m=m, seed=seed)


# --- descriptors and dataset persistence ------------------------------------


def distribution_from_descriptor(doc: dict, base_dir: str = ".") -> SyntheticDistribution:
    """Rebuild a distribution from its JSON descriptor.

    Teacher descriptors reference the network file via ``teacher_file``
    (resolved against ``base_dir`` when relative).
    """
    kind = doc.get("kind")
    if kind == "teacher":
        path = doc.get("teacher_file")
        if path is None:
            raise ValueError("teacher descriptor requires teacher_file")
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        teacher, clip = load_parametrization(path)
        marginal = Marginal.from_json_dict(doc.get("params", {}).get("marginal", {}))
        spec = TeacherSpec(teacher=teacher, marginal=marginal, clip=clip or ClipSpec(1.0))
        dist = teacher_student(spec)
        descriptor = dict(dist.descriptor)
        descriptor["teacher_file"] = doc["teacher_file"]
        return SyntheticDistribution(
            dist.marginal, dist.regression, descriptor, dist.hard_margin, dist.exact_bayes_risk
        )
    if kind in ANALYTIC_KINDS:
        return analytic_family(kind, doc.get("params", {}))
    raise ValueError(f"unknown distribution kind {kind!r}")


def save_dataset(path, data: Dataset, kind: str = "unknown"):
    """Write a dataset as CSV (header x1..xd,y) with a (seed, kind) sidecar."""
    d = data.inputs.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(d)] + ["y"])
        for row, label in zip(data.inputs, data.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])
    sidecar = os.path.splitext(str(path))[0] + ".json"
    with open(sidecar, "w") as fh:
        json.dump({"seed": data.seed, "kind": kind}, fh)


def load_dataset(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = len(header) - 1
        X, y = [], []
        for row in reader:
            X.append([float(v) for v in row[:d]])
            y.append(int(row[d]))
    sidecar = os.path.splitext(str(path))[0] + ".json"
    seed = 0
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            seed = json.load(fh).get("seed", 0)
    return Dataset(inputs=np.array(X), labels=np.array(y), seed=seed)
