"""Velocity-field oracles.

Deterministic synthetic stand-ins for an expensive learned velocity model,
mapping (state, time, condition) to a velocity vector on t in [0, 1] with
t=1 the noise end and t=0 the data end. Four families are provided, each
isolating one aspect of the dynamics the rest of the pipeline must handle:

* ``constant``         zero acceleration everywhere,
* ``magnitude-decay``  exponential magnitude change along a fixed direction,
  v(x, t) = exp(rate * (1 - t)) * target, so the orthogonal residual of the
  discrete acceleration is identically zero,
* ``rotation``         constant-speed turning of a fixed vector in a 2-plane,
  v(x, t) = R(rate * (1 - t)) * target, so the parallel component vanishes
  as the grid refines,
* ``gaussian-mixture`` the exact marginal velocity transporting a standard
  normal onto an isotropic Gaussian mixture along straight interpolation
  paths (coupled magnitude and direction dynamics).

Evaluation is a pure function of its arguments; the only mutable observable
is a thread-safe call counter used for evaluation accounting.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

KIND_CONSTANT = "constant"
KIND_MAGNITUDE_DECAY = "magnitude-decay"
KIND_ROTATION = "rotation"
KIND_GAUSSIAN_MIXTURE = "gaussian-mixture"
FIELD_KINDS = (KIND_CONSTANT, KIND_MAGNITUDE_DECAY, KIND_ROTATION, KIND_GAUSSIAN_MIXTURE)

_WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Condition:
    """Conditioning information for one sample.

    The seed drives the per-sample noise initialization; ``params`` is a flat
    list of real hooks reserved for conditional field variants. Identical
    (seed, params) pairs produce bitwise-identical behavior everywhere.
    """

    seed: int
    params: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidArgumentError(f"condition seed must be a 64-bit unsigned integer, got {self.seed}")


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean: tuple[float, ...]
    scale: float


@dataclass(frozen=True)
class FieldSpec:
    """Declarative description of one synthetic velocity field."""

    kind: str
    dimension: int
    target: tuple[float, ...] | None = None
    rate: float = 0.0
    plane: tuple[int, int] = (0, 1)
    components: tuple[MixtureComponent, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.kind not in FIELD_KINDS:
            raise InvalidArgumentError(f"unknown field kind {self.kind!r}")
        if self.dimension < 1:
            raise InvalidArgumentError(f"dimension must be >= 1, got {self.dimension}")
        if self.kind in (KIND_CONSTANT, KIND_MAGNITUDE_DECAY, KIND_ROTATION):
            if self.target is None or len(self.target) != self.dimension:
                raise InvalidArgumentError(f"{self.kind} field needs a target vector of length {self.dimension}")
        if self.kind == KIND_ROTATION:
            i, j = self.plane
            if self.dimension < 2 or i == j or not (0 <= i < self.dimension and 0 <= j < self.dimension):
                raise InvalidArgumentError(f"rotation plane {self.plane} invalid for dimension {self.dimension}")
        if self.kind == KIND_GAUSSIAN_MIXTURE:
            if not self.components:
                raise InvalidArgumentError("gaussian-mixture field needs at least one component")
            total = math.fsum(c.weight for c in self.components)
            if any(c.weight <= 0 for c in self.components):
                raise InvalidArgumentError("mixture weights must be positive")
            if abs(total - 1.0) > _WEIGHT_SUM_TOL:
                raise InvalidArgumentError(f"mixture weights must sum to 1 within {_WEIGHT_SUM_TOL}, got {total!r}")
            if any(c.scale <= 0 for c in self.components):
                raise InvalidArgumentError("mixture component scales must be positive")
            if any(len(c.mean) != self.dimension for c in self.components):
                raise InvalidArgumentError("mixture component means must match the field dimension")

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "dimension": self.dimension}
        if self.kind in (KIND_CONSTANT, KIND_MAGNITUDE_DECAY, KIND_ROTATION):
            out["target"] = [float(v) for v in self.target]  # type: ignore[union-attr]
        if self.kind in (KIND_MAGNITUDE_DECAY, KIND_ROTATION):
            out["rate"] = float(self.rate)
        if self.kind == KIND_ROTATION:
            out["plane"] = [int(self.plane[0]), int(self.plane[1])]
        if self.kind == KIND_GAUSSIAN_MIXTURE:
            out["components"] = [
                {"weight": float(c.weight), "mean": [float(m) for m in c.mean], "scale": float(c.scale)}
                for c in self.components
            ]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FieldSpec":
        try:
            kind = data["kind"]
            dimension = int(data["dimension"])
        except KeyError as exc:
            raise InvalidArgumentError(f"field spec missing key {exc.args[0]!r}") from None
        kwargs: dict = {}
        if "target" in data:
            kwargs["target"] = tuple(float(v) for v in data["target"])
        if "rate" in data:
            kwargs["rate"] = float(data["rate"])
        if "plane" in data:
            kwargs["plane"] = (int(data["plane"][0]), int(data["plane"][1]))
        if "components" in data:
            kwargs["components"] = tuple(
                MixtureComponent(float(c["weight"]), tuple(float(m) for m in c["mean"]), float(c["scale"]))
                for c in data["components"]
            )
        return cls(kind=kind, dimension=dimension, **kwargs)


def field_digest(spec: FieldSpec) -> str:
    """Stable content hash of a field spec, used as bundle provenance."""
    canon = json.dumps(spec.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def initial_state(condition: Condition, dimension: int) -> np.ndarray:
    """Standard-normal noise initialization derived from the condition seed."""
    rng = np.random.default_rng(condition.seed)
    return rng.standard_normal(dimension)


def gaussian_mixture_velocity(
    x: np.ndarray,
    t: float,
    components: list[tuple[float, np.ndarray, float]],
) -> np.ndarray:
    """Exact marginal velocity for straight-path transport onto a Gaussian mixture.

    For the interpolation X_t = t * X1 + (1 - t) * X0 with X1 standard normal
    (noise) and X0 drawn from the mixture (data), the marginal velocity is the
    conditional expectation E[X1 - X0 | X_t = x]. Per component i with mean
    mu_i and isotropic variance sigma_i^2, the marginal of X_t is normal with
    mean (1 - t) * mu_i and variance s_i^2(t) = t^2 + (1 - t)^2 * sigma_i^2,
    and the component velocity follows from Gaussian conditioning:

        E[X1 | x, i] = t * z_i / s_i^2
        E[X0 | x, i] = mu_i + (1 - t) * sigma_i^2 * z_i / s_i^2
        z_i = x - (1 - t) * mu_i

    weighted by posterior responsibilities proportional to
    w_i * N(x; (1 - t) * mu_i, s_i^2 I). Responsibilities are evaluated in
    log space so extreme states never underflow to an all-zero posterior.
    At t = 0 the formula is its own analytic limit since s_i^2(0) = sigma_i^2.
    """
    x = np.asarray(x, dtype=float)
    weights = np.array([w for w, _, _ in components], dtype=float)
    means = np.stack([np.asarray(m, dtype=float) for _, m, _ in components])
    scales = np.array([s for _, _, s in components], dtype=float)
    if np.any(weights <= 0) or abs(math.fsum(weights.tolist()) - 1.0) > _WEIGHT_SUM_TOL:
        raise InvalidArgumentError("mixture weights must be positive and sum to 1")
    if np.any(scales <= 0):
        raise InvalidArgumentError("mixture scales must be positive")
    if means.shape[1] != x.shape[0]:
        raise InvalidArgumentError(f"state dimension {x.shape[0]} does not match component means {means.shape[1]}")

    one_t = 1.0 - t
    s2 = t * t + one_t * one_t * scales**2
    z = x[None, :] - one_t * means
    sq = np.einsum("cd,cd->c", z, z)
    log_resp = np.log(weights) - 0.5 * sq / s2 - 0.5 * x.shape[0] * np.log(s2)
    log_resp -= log_resp.max()
    resp = np.exp(log_resp)
    resp /= resp.sum()

    coef = (t - one_t * scales**2) / s2
    component_vel = coef[:, None] * z - means
    return resp @ component_vel


class VelocityField:
    """A synthetic velocity oracle with evaluation accounting.

    The counter equals exactly the number of ``evaluate`` calls since
    construction or the last ``reset_evaluations``, and is safe under
    concurrent increments. All other state is immutable.
    """

    def __init__(self, spec: FieldSpec):
        self.spec = spec
        self._evaluations = 0
        self._lock = threading.Lock()

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def evaluations(self) -> int:
        return self._evaluations

    def reset_evaluations(self) -> None:
        with self._lock:
            self._evaluations = 0

    def evaluate(self, state: np.ndarray, t: float, condition: Condition) -> np.ndarray:
        """Velocity at (state, t). Increments the evaluation counter by one.

        The condition is part of the evaluation contract (determinism is over
        the full argument tuple); the built-in families are unconditional, so
        it does not enter the arithmetic.
        """
        state = np.asarray(state, dtype=float)
        if state.shape != (self.spec.dimension,):
            raise InvalidArgumentError(
                f"state shape {state.shape} does not match field dimension {self.spec.dimension}"
            )
        if not 0.0 <= t <= 1.0:
            raise InvalidArgumentError(f"time must lie in [0, 1], got {t}")
        with self._lock:
            self._evaluations += 1
        return _velocity(self.spec, state, t)


def _velocity(spec: FieldSpec, state: np.ndarray, t: float) -> np.ndarray:
    if spec.kind == KIND_CONSTANT:
        return np.array(spec.target, dtype=float)
    if spec.kind == KIND_MAGNITUDE_DECAY:
        return math.exp(spec.rate * (1.0 - t)) * np.array(spec.target, dtype=float)
    if spec.kind == KIND_ROTATION:
        v = np.array(spec.target, dtype=float)
        angle = spec.rate * (1.0 - t)
        c, s = math.cos(angle), math.sin(angle)
        i, j = spec.plane
        vi, vj = v[i], v[j]
        v[i] = c * vi - s * vj
        v[j] = s * vi + c * vj
        return v
    components = [(c.weight, np.asarray(c.mean, dtype=float), c.scale) for c in spec.components]
    return gaussian_mixture_velocity(state, t, components)
