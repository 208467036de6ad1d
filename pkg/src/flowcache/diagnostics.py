"""Trajectory-level comparison of cached versus full-step sampling runs.

A drift report lines up a cached run against the full-step reference from
the same noise initialization: per-step relative state and velocity drift,
the cached/evaluated split of velocity drift, terminal drift, and the
cosine alignment between the reconstructed turning direction and the oracle
direction recovered from the full record's consecutive velocities. The
experiment runner wires the whole pipeline together (calibrate, schedule,
sample both ways, compare) deterministically from a config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cached_sampler import CompensationToggles, init_direction, reorthogonalize, sample_cached
from .calibration import ScheduleBundle, calibrate
from .decomposition import decompose, discrete_accel
from .errors import (
    DegenerateDirectionError,
    DegenerateVelocityError,
    InvalidArgumentError,
)
from .fields import Condition, FieldSpec, VelocityField, field_digest, initial_state
from .ioutil import write_csv
from .schedule import DEFAULT_H_MAX, DEFAULT_TAU_D, DEFAULT_TAU_K, build_schedule, schedule_coverage
from .solver import TimeGrid, TrajectoryRecord, make_uniform_grid, sample_full

# Reference norms below this are skipped when averaging relative drifts.
NORM_GUARD = 1e-12


@dataclass(frozen=True, eq=False)
class DriftReport:
    """Per-step and terminal drift statistics for one cached/full pair."""

    state_drift: np.ndarray  # one entry per grid node
    velocity_drift: np.ndarray  # one entry per step
    anchors: tuple[int, ...]
    skip_ratio: float
    final_state_drift: float
    cached_vel_drift_mean: float
    evaluated_vel_drift_mean: float
    cos_theta: np.ndarray
    cos_theta_steps: tuple[int, ...]
    cos_theta_mean: float
    cos_theta_positive_fraction: float
    cos_theta_p90: float
    degenerate_direction_count: int


def _relative_norms(diff: np.ndarray, ref: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise |diff| / |ref| with a mask of rows where ref is usable."""
    diff_norm = np.linalg.norm(diff, axis=1)
    ref_norm = np.linalg.norm(ref, axis=1)
    usable = ref_norm > NORM_GUARD
    out = np.zeros_like(diff_norm)
    out[usable] = diff_norm[usable] / ref_norm[usable]
    return out, usable


def _oracle_direction(full: TrajectoryRecord, m: int) -> np.ndarray | None:
    """Unit orthogonal residual direction at step m of the full record."""
    v = full.velocities[m]
    if float(np.linalg.norm(v)) <= NORM_GUARD:
        return None
    accel = discrete_accel(v, full.velocities[m + 1], float(full.grid.dt[m]))
    dec = decompose(v, accel, float(full.grid.dt[m]))
    r_norm = float(np.linalg.norm(dec.r_perp))
    accel_norm = float(np.linalg.norm(accel))
    if r_norm == 0.0 or r_norm < 1e-12 * max(accel_norm, 1.0):
        return None
    return dec.r_perp / r_norm


def compare_trajectories(full: TrajectoryRecord, cached: TrajectoryRecord) -> DriftReport:
    """Drift profile of a cached run against its full-step reference."""
    if not np.array_equal(full.grid.times, cached.grid.times):
        raise InvalidArgumentError("records use different time grids")
    if not np.array_equal(full.states[0], cached.states[0]):
        raise InvalidArgumentError("records start from different initial states")
    if not bool(full.evaluated.all()):
        raise InvalidArgumentError("the reference record must be fully evaluated")

    n_steps = full.grid.n_steps
    state_drift, _ = _relative_norms(cached.states - full.states, full.states)
    velocity_drift, vel_usable = _relative_norms(cached.velocities - full.velocities, full.velocities)

    flags = cached.evaluated
    cached_mask = ~flags & vel_usable
    eval_mask = flags & vel_usable
    cached_mean = float(velocity_drift[cached_mask].mean()) if cached_mask.any() else math.nan
    eval_mean = float(velocity_drift[eval_mask].mean()) if eval_mask.any() else math.nan

    # alignment of the reconstructed turning direction with the oracle
    # direction from the full record, sampled on cached steps
    cos_values: list[float] = []
    cos_steps: list[int] = []
    degenerate = 0
    eval_idx = np.flatnonzero(flags)
    for pos, a in enumerate(eval_idx):
        end = int(eval_idx[pos + 1]) if pos + 1 < eval_idx.size else n_steps
        if end - a <= 1:
            continue  # standard step, nothing cached inside
        anchor: np.ndarray | None = None
        if pos > 0:
            try:
                anchor = init_direction(cached.velocities[int(eval_idx[pos - 1])], cached.velocities[int(a)])
            except DegenerateVelocityError:
                anchor = None
        for m in range(int(a) + 1, end):
            if m > n_steps - 2:
                continue  # no look-ahead velocity to define the oracle direction
            oracle_dir = _oracle_direction(full, m)
            u_hat: np.ndarray | None = None
            if anchor is not None:
                try:
                    u_hat = reorthogonalize(anchor, cached.velocities[m])
                except (DegenerateDirectionError, DegenerateVelocityError):
                    u_hat = None
            if oracle_dir is None or u_hat is None:
                degenerate += 1
                continue
            cos_values.append(float(u_hat @ oracle_dir))
            cos_steps.append(m)

    cos_arr = np.array(cos_values, dtype=float)
    if cos_arr.size:
        cos_mean = float(cos_arr.mean())
        cos_pos = float((cos_arr > 0).mean())
        cos_p90 = float(np.percentile(cos_arr, 90))
    else:
        cos_mean = cos_pos = cos_p90 = math.nan

    return DriftReport(
        state_drift=state_drift,
        velocity_drift=velocity_drift,
        anchors=tuple(int(i) for i in eval_idx),
        skip_ratio=1.0 - cached.nfe / n_steps,
        final_state_drift=float(state_drift[-1]),
        cached_vel_drift_mean=cached_mean,
        evaluated_vel_drift_mean=eval_mean,
        cos_theta=cos_arr,
        cos_theta_steps=tuple(cos_steps),
        cos_theta_mean=cos_mean,
        cos_theta_positive_fraction=cos_pos,
        cos_theta_p90=cos_p90,
        degenerate_direction_count=degenerate,
    )


def count_speedup(full_nfe: int, cached_nfe: int) -> float:
    """Oracle-evaluation ratio; the desk-scale stand-in for wall-clock speedup."""
    if cached_nfe < 1:
        raise InvalidArgumentError(f"cached_nfe must be >= 1, got {cached_nfe}")
    return full_nfe / cached_nfe


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one end-to-end experiment needs, fully seeded."""

    field: FieldSpec
    n_steps: int
    calibration_seeds: tuple[int, ...]
    evaluation_seeds: tuple[int, ...]
    tau_k: float = DEFAULT_TAU_K
    tau_d: float = DEFAULT_TAU_D
    h_max: int = DEFAULT_H_MAX
    use_mi: bool = True
    use_di: bool = True

    def __post_init__(self) -> None:
        if self.n_steps < 1:
            raise InvalidArgumentError("n_steps must be positive")
        if not self.calibration_seeds or not self.evaluation_seeds:
            raise InvalidArgumentError("calibration and evaluation seed lists must be non-empty")
        overlap = set(self.calibration_seeds) & set(self.evaluation_seeds)
        if overlap:
            raise InvalidArgumentError(f"calibration and evaluation seeds must be distinct, both contain {sorted(overlap)}")
        object.__setattr__(self, "calibration_seeds", tuple(int(s) for s in self.calibration_seeds))
        object.__setattr__(self, "evaluation_seeds", tuple(int(s) for s in self.evaluation_seeds))

    @property
    def toggles(self) -> CompensationToggles:
        return CompensationToggles(use_mi=self.use_mi, use_di=self.use_di)

    def to_dict(self) -> dict:
        return {
            "field": self.field.to_dict(),
            "n_steps": self.n_steps,
            "calibration_seeds": list(self.calibration_seeds),
            "evaluation_seeds": list(self.evaluation_seeds),
            "tau_k": float(self.tau_k),
            "tau_d": float(self.tau_d),
            "h_max": int(self.h_max),
            "use_mi": self.use_mi,
            "use_di": self.use_di,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            return cls(
                field=FieldSpec.from_dict(data["field"]),
                n_steps=int(data["n_steps"]),
                calibration_seeds=tuple(int(s) for s in data["calibration_seeds"]),
                evaluation_seeds=tuple(int(s) for s in data["evaluation_seeds"]),
                tau_k=float(data.get("tau_k", DEFAULT_TAU_K)),
                tau_d=float(data.get("tau_d", DEFAULT_TAU_D)),
                h_max=int(data.get("h_max", DEFAULT_H_MAX)),
                use_mi=bool(data.get("use_mi", True)),
                use_di=bool(data.get("use_di", True)),
            )
        except KeyError as exc:
            raise InvalidArgumentError(f"experiment config missing key {exc.args[0]!r}") from None


@dataclass(eq=False)
class ExperimentResult:
    """Bundle plus per-seed reports and cross-seed aggregates."""

    config: ExperimentConfig
    bundle: ScheduleBundle
    reports: tuple[DriftReport, ...]
    cached_nfe: int
    skip_ratio: float
    speedup: float
    mean_final_drift: float
    stderr_final_drift: float
    mean_cached_vel_drift: float
    mean_evaluated_vel_drift: float
    per_seed_rows: list[tuple] = field(default_factory=list)


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return mean, stderr


def make_bundle(config: ExperimentConfig) -> tuple[VelocityField, TimeGrid, ScheduleBundle]:
    """Calibrate and schedule per the config; the offline stage in one call."""
    velocity_field = VelocityField(config.field)
    grid = make_uniform_grid(config.n_steps)
    conditions = [Condition(seed) for seed in config.calibration_seeds]
    indicators = calibrate(velocity_field, grid, conditions)
    schedule = build_schedule(indicators, grid, config.tau_k, config.tau_d, config.h_max)
    bundle = ScheduleBundle(
        grid=grid,
        indicators=indicators,
        schedule=schedule,
        tau_k=config.tau_k,
        tau_d=config.tau_d,
        h_max=config.h_max,
        field_digest=field_digest(config.field),
        seeds=config.calibration_seeds,
    )
    return velocity_field, grid, bundle


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Calibrate, schedule, sample full and cached per seed, and compare."""
    velocity_field, grid, bundle = make_bundle(config)
    skip_ratio, anchors = schedule_coverage(bundle.schedule, grid.n_steps)
    cached_nfe = len(anchors)

    reports: list[DriftReport] = []
    per_seed_rows: list[tuple] = []
    for seed in config.evaluation_seeds:
        condition = Condition(seed)
        x0 = initial_state(condition, velocity_field.dimension)
        full = sample_full(velocity_field, grid, x0, condition)
        cached = sample_cached(velocity_field, bundle, x0, condition, config.toggles)
        report = compare_trajectories(full, cached)
        reports.append(report)
        per_seed_rows.append(
            (seed, report.skip_ratio, report.final_state_drift, cached.nfe, count_speedup(full.nfe, cached.nfe))
        )

    finals = np.array([r.final_state_drift for r in reports])
    mean_final, stderr_final = _mean_stderr(finals)
    cached_means = np.array([r.cached_vel_drift_mean for r in reports])
    eval_means = np.array([r.evaluated_vel_drift_mean for r in reports])
    return ExperimentResult(
        config=config,
        bundle=bundle,
        reports=tuple(reports),
        cached_nfe=cached_nfe,
        skip_ratio=skip_ratio,
        speedup=count_speedup(grid.n_steps, cached_nfe),
        mean_final_drift=mean_final,
        stderr_final_drift=stderr_final,
        mean_cached_vel_drift=float(np.nanmean(cached_means)) if not np.isnan(cached_means).all() else math.nan,
        mean_evaluated_vel_drift=float(np.nanmean(eval_means)) if not np.isnan(eval_means).all() else math.nan,
        per_seed_rows=per_seed_rows,
    )


def truncation_drifts(config: ExperimentConfig, n_truncated: int) -> np.ndarray:
    """Terminal drift of plain step truncation against the full-step reference."""
    if n_truncated < 1:
        raise InvalidArgumentError("truncated step count must be positive")
    velocity_field = VelocityField(config.field)
    grid = make_uniform_grid(config.n_steps)
    short_grid = make_uniform_grid(n_truncated)
    drifts = np.empty(len(config.evaluation_seeds))
    for i, seed in enumerate(config.evaluation_seeds):
        condition = Condition(seed)
        x0 = initial_state(condition, velocity_field.dimension)
        reference = sample_full(velocity_field, grid, x0, condition).final_state
        truncated = sample_full(velocity_field, short_grid, x0, condition).final_state
        ref_norm = float(np.linalg.norm(reference))
        drifts[i] = float(np.linalg.norm(truncated - reference)) / ref_norm if ref_norm > NORM_GUARD else 0.0
    return drifts


# (use_mi, use_di) rows of the toggle ablation, schedule-only baseline first.
ABLATION_ORDER = ((False, False), (True, False), (False, True), (True, True))


def run_toggle_ablation(config: ExperimentConfig) -> list[dict]:
    """Four-way toggle experiment on one shared bundle."""
    velocity_field, grid, bundle = make_bundle(config)
    _, anchors = schedule_coverage(bundle.schedule, grid.n_steps)
    rows: list[dict] = []
    for use_mi, use_di in ABLATION_ORDER:
        toggles = CompensationToggles(use_mi=use_mi, use_di=use_di)
        finals = np.empty(len(config.evaluation_seeds))
        for i, seed in enumerate(config.evaluation_seeds):
            condition = Condition(seed)
            x0 = initial_state(condition, velocity_field.dimension)
            full = sample_full(velocity_field, grid, x0, condition)
            cached = sample_cached(velocity_field, bundle, x0, condition, toggles)
            finals[i] = compare_trajectories(full, cached).final_state_drift
        mean_final, stderr_final = _mean_stderr(finals)
        rows.append(
            {
                "use_mi": use_mi,
                "use_di": use_di,
                "nfe": len(anchors),
                "speedup": count_speedup(grid.n_steps, len(anchors)),
                "mean_final_drift": mean_final,
                "stderr_final_drift": stderr_final,
            }
        )
    return rows


def run_threshold_sweep(config: ExperimentConfig, taus: list[tuple[float, float]]) -> list[dict]:
    """One summary row per (tau_k, tau_d) pair on shared indicators."""
    velocity_field, grid, bundle = make_bundle(config)
    rows: list[dict] = []
    for tau_k, tau_d in taus:
        schedule = build_schedule(bundle.indicators, grid, tau_k, tau_d, config.h_max)
        sweep_bundle = replace(bundle, schedule=schedule, tau_k=tau_k, tau_d=tau_d)
        skip_ratio, anchors = schedule_coverage(schedule, grid.n_steps)
        finals = np.empty(len(config.evaluation_seeds))
        for i, seed in enumerate(config.evaluation_seeds):
            condition = Condition(seed)
            x0 = initial_state(condition, velocity_field.dimension)
            full = sample_full(velocity_field, grid, x0, condition)
            cached = sample_cached(velocity_field, sweep_bundle, x0, condition, config.toggles)
            finals[i] = compare_trajectories(full, cached).final_state_drift
        rows.append(
            {
                "tau_k": tau_k,
                "tau_d": tau_d,
                "cached_nfe": len(anchors),
                "skip_ratio": skip_ratio,
                "final_drift": float(finals.mean()),
            }
        )
    return rows


def write_drift_profile_csv(result: ExperimentResult, path: str | Path) -> None:
    """Mean drift profile across evaluation seeds, one row per grid node.

    The terminal node has no step attached, so its velocity and anchor cells
    are left empty.
    """
    grid = result.bundle.grid
    state = np.stack([r.state_drift for r in result.reports]).mean(axis=0)
    vel = np.stack([r.velocity_drift for r in result.reports]).mean(axis=0)
    anchor_set = set(result.reports[0].anchors)
    rows: list[tuple] = []
    for n in range(grid.n_steps):
        rows.append((n, float(grid.times[n]), float(state[n]), float(vel[n]), n in anchor_set))
    rows.append((grid.n_steps, float(grid.times[-1]), float(state[-1]), None, None))
    write_csv(path, ("n", "t", "state_drift", "vel_drift", "is_anchor"), rows)


def write_seed_summary_csv(result: ExperimentResult, path: str | Path) -> None:
    write_csv(path, ("seed", "skip_ratio", "final_drift", "nfe", "speedup"), result.per_seed_rows)


def write_cos_theta_csv(result: ExperimentResult, path: str | Path) -> None:
    rows: list[tuple] = []
    for seed, report in zip(result.config.evaluation_seeds, result.reports):
        for step, value in zip(report.cos_theta_steps, report.cos_theta):
            rows.append((seed, step, float(value)))
    write_csv(path, ("seed", "n", "cos_theta"), rows)


def write_sweep_csv(rows: list[dict], path: str | Path) -> None:
    write_csv(
        path,
        ("tau_k", "tau_d", "cached_nfe", "final_drift"),
        [(r["tau_k"], r["tau_d"], r["cached_nfe"], r["final_drift"]) for r in rows],
    )


def write_ablation_csv(rows: list[dict], path: str | Path) -> None:
    write_csv(
        path,
        ("use_mi", "use_di", "nfe", "speedup", "mean_final_drift", "stderr_final_drift"),
        [
            (r["use_mi"], r["use_di"], r["nfe"], r["speedup"], r["mean_final_drift"], r["stderr_final_drift"])
            for r in rows
        ],
    )
