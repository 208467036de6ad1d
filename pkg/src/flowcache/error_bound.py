"""Per-step error decomposition of the cached velocity update.

Comparing the single-step reconstruction against the oracle component-wise
update (same formula fed with the sample's true scalars and true orthogonal
direction) splits the normalized error into three terms: a magnitude term
C^2 * (k_t - k)^2 with C = dt * exp(max(k_t, k) * dt), an orthogonal
strength term (d_t - d)^2, and an alignment term 2 * d_t * d * (1 - cos
theta). The parallel and orthogonal error components are mutually
orthogonal, so their squares add exactly, and the orthogonal part is an
identity rather than a bound. The verification sweep checks all of this on
random configurations and emits a per-draw audit CSV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateVelocityError, InvalidArgumentError
from .ioutil import write_csv

# |<u, v>| <= ORTHO_TOL * |u| * |v| qualifies as orthogonal input.
ORTHO_TOL = 1e-10
# Gram-Schmidt draws with residual norm below this fraction are redrawn.
REJECT_TOL = 1e-8


@dataclass(frozen=True)
class BoundTerms:
    """One configuration's bound evaluation.

    ``lhs`` is the normalized reconstruction error |v_hat - v_star| / |v|;
    ``rhs`` is the bound sqrt(c_n^2 * mag_err^2 + strength_err^2 +
    2 * d_t * d * (1 - cos_theta)).
    """

    c_n: float
    mag_err: float
    strength_err: float
    cos_theta: float
    lhs: float
    rhs: float


def _check_unit_orthogonal(name: str, u: np.ndarray, v: np.ndarray, v_norm: float) -> None:
    u_norm = float(np.linalg.norm(u))
    if abs(u_norm - 1.0) > 1e-9:
        raise InvalidArgumentError(f"{name} must be a unit vector, norm is {u_norm!r}")
    if abs(float(u @ v)) > ORTHO_TOL * v_norm * u_norm:
        raise InvalidArgumentError(f"{name} is not orthogonal to the velocity")


def oracle_update(v_n: np.ndarray, k: float, d: float, u_perp: np.ndarray, dt: float) -> np.ndarray:
    """Component-wise update with exact scalars and exact orthogonal direction."""
    v_n = np.asarray(v_n, dtype=float)
    u_perp = np.asarray(u_perp, dtype=float)
    v_norm = float(np.linalg.norm(v_n))
    if v_norm == 0.0:
        raise DegenerateVelocityError("oracle update needs a nonzero velocity")
    if d < 0:
        raise InvalidArgumentError(f"orthogonal strength must be non-negative, got {d}")
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    _check_unit_orthogonal("u_perp", u_perp, v_n, v_norm)
    return math.exp(k * dt) * v_n + d * v_norm * u_perp


def bound_terms(
    v_n: np.ndarray,
    k: float,
    d: float,
    u_perp: np.ndarray,
    k_t: float,
    d_t: float,
    u_hat: np.ndarray,
    dt: float,
) -> BoundTerms:
    """Evaluate both updates and the three-term bound for one configuration."""
    v_n = np.asarray(v_n, dtype=float)
    u_perp = np.asarray(u_perp, dtype=float)
    u_hat = np.asarray(u_hat, dtype=float)
    v_norm = float(np.linalg.norm(v_n))
    if v_norm == 0.0:
        raise DegenerateVelocityError("bound evaluation needs a nonzero velocity")
    if d < 0 or d_t < 0:
        raise InvalidArgumentError("orthogonal strengths must be non-negative")
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    _check_unit_orthogonal("u_perp", u_perp, v_n, v_norm)
    _check_unit_orthogonal("u_hat", u_hat, v_n, v_norm)

    v_star = math.exp(k * dt) * v_n + d * v_norm * u_perp
    v_hat = math.exp(k_t * dt) * v_n + d_t * v_norm * u_hat
    lhs = float(np.linalg.norm(v_hat - v_star)) / v_norm

    c_n = dt * math.exp(max(k_t, k) * dt)
    mag_err = abs(k_t - k)
    strength_err = abs(d_t - d)
    cos_theta = float(np.clip(u_hat @ u_perp, -1.0, 1.0))
    rhs = math.sqrt(c_n**2 * mag_err**2 + strength_err**2 + 2.0 * d_t * d * (1.0 - cos_theta))
    return BoundTerms(c_n=c_n, mag_err=mag_err, strength_err=strength_err, cos_theta=cos_theta, lhs=lhs, rhs=rhs)


def unit_orthogonal(rng: np.random.Generator, against: list[np.ndarray]) -> np.ndarray:
    """Random unit vector orthogonal to every vector in ``against``.

    Gaussian draws are Gram-Schmidt projected off the given vectors; draws
    whose residual keeps less than REJECT_TOL of their norm are rejected so
    the output is orthogonal to working precision, as the bound's
    preconditions require.
    """
    if not against:
        raise InvalidArgumentError("need at least one vector to orthogonalize against")
    dim = against[0].shape[0]
    if dim < len(against) + 1:
        raise InvalidArgumentError("not enough dimensions for an orthogonal complement")
    while True:
        g = rng.standard_normal(dim)
        g_norm = float(np.linalg.norm(g))
        for v in against:
            vv = float(v @ v)
            if vv > 0:
                g = g - (float(g @ v) / vv) * v
        norm = float(np.linalg.norm(g))
        if norm > REJECT_TOL * max(g_norm, 1.0):
            return g / norm


@dataclass
class BoundSweepResult:
    """Aggregate of a randomized bound-verification sweep."""

    draws: int
    base_seed: int
    lhs: np.ndarray
    rhs: np.ndarray
    max_bound_violation: float  # max(lhs - rhs), negative when the bound holds strictly
    max_split_error: float  # worst relative error of |P|^2 + |Q|^2 vs the squared error
    max_q_identity_error: float  # worst relative error of the |Q|^2 identity
    min_envelope_violations: int  # draws where the min(k_t, k) envelope fails
    failures: list[str]

    @property
    def passed(self) -> bool:
        return not self.failures


def run_bound_sweep(
    draws: int = 100_000,
    seed: int = 20240,
    dim_range: tuple[int, int] = (2, 64),
    k_range: tuple[float, float] = (-5.0, 5.0),
    d_range: tuple[float, float] = (0.0, 2.0),
    bound_slack: float = 1e-9,
    split_tol: float = 1e-10,
    q_identity_tol: float = 1e-12,
) -> BoundSweepResult:
    """Randomized verification of the bound and its exact decompositions.

    Also checks that weakening the magnitude envelope to min(k_t, k) breaks
    the bound somewhere, confirming the max is necessary.
    """
    rng = np.random.default_rng(seed)
    lhs_all = np.empty(draws)
    rhs_all = np.empty(draws)
    failures: list[str] = []
    max_violation = -math.inf
    max_split = 0.0
    max_qid = 0.0
    envelope_violations = 0

    for i in range(draws):
        dim = int(rng.integers(dim_range[0], dim_range[1] + 1))
        v = rng.standard_normal(dim)
        while float(np.linalg.norm(v)) < 1e-6:
            v = rng.standard_normal(dim)
        u_perp = unit_orthogonal(rng, [v])
        u_hat = unit_orthogonal(rng, [v])
        k, k_t = rng.uniform(k_range[0], k_range[1], size=2)
        d, d_t = rng.uniform(d_range[0], d_range[1], size=2)
        dt = 1.0 - rng.random()  # (0, 1]

        terms = bound_terms(v, k, d, u_perp, k_t, d_t, u_hat, dt)
        lhs_all[i] = terms.lhs
        rhs_all[i] = terms.rhs
        violation = terms.lhs - terms.rhs
        max_violation = max(max_violation, violation)
        if violation > bound_slack:
            failures.append(f"draw {i} (seed {seed}): lhs {terms.lhs!r} exceeds rhs {terms.rhs!r}")

        # parallel/orthogonal split must be additive and the orthogonal
        # part an exact identity
        v_norm = float(np.linalg.norm(v))
        p = (math.exp(k_t * dt) - math.exp(k * dt)) * v
        q = v_norm * (d_t * u_hat - d * u_perp)
        err_sq = (terms.lhs * v_norm) ** 2
        split_sq = float(p @ p) + float(q @ q)
        denom = max(err_sq, split_sq, 1e-300)
        split_err = abs(err_sq - split_sq) / denom
        max_split = max(max_split, split_err)
        if split_err > split_tol:
            failures.append(f"draw {i} (seed {seed}): additive split off by {split_err!r}")

        q_sq = float(q @ q)
        # 2 * (1 - cos) evaluated as |u_hat - u_perp|^2, exact for unit
        # vectors and immune to cancellation near perfect alignment
        dir_gap = u_hat - u_perp
        q_ref = v_norm**2 * ((d_t - d) ** 2 + d_t * d * float(dir_gap @ dir_gap))
        q_denom = max(q_sq, q_ref, 1e-300)
        q_err = abs(q_sq - q_ref) / q_denom
        max_qid = max(max_qid, q_err)
        if q_err > q_identity_tol:
            failures.append(f"draw {i} (seed {seed}): orthogonal identity off by {q_err!r}")

        if k != k_t:
            c_min = dt * math.exp(min(k_t, k) * dt)
            rhs_min = math.sqrt(
                c_min**2 * terms.mag_err**2 + terms.strength_err**2 + 2.0 * d_t * d * (1.0 - terms.cos_theta)
            )
            if terms.lhs > rhs_min + bound_slack:
                envelope_violations += 1

    if envelope_violations == 0:
        failures.append(
            f"seed {seed}: min-envelope bound never violated in {draws} draws; max envelope is not confirmed necessary"
        )
    return BoundSweepResult(
        draws=draws,
        base_seed=seed,
        lhs=lhs_all,
        rhs=rhs_all,
        max_bound_violation=max_violation,
        max_split_error=max_split,
        max_q_identity_error=max_qid,
        min_envelope_violations=envelope_violations,
        failures=failures,
    )


def write_bound_audit_csv(result: BoundSweepResult, path: str | Path) -> None:
    rows = (
        (i, float(result.lhs[i]), float(result.rhs[i]), float(result.rhs[i] - result.lhs[i]))
        for i in range(result.draws)
    )
    write_csv(path, ("draw", "lhs", "rhs", "slack"), rows)
