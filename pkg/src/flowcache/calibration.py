"""Offline calibration: indicator aggregation and the on-disk bundle.

A calibration run samples full-step trajectories for a set of seeded
conditions, decomposes each one, and averages the per-step magnitude and
direction scalars into indicator curves. Indicators plus the derived skip
schedule, thresholds, and provenance form a bundle that is written once and
reused across every inference call on the same grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .decomposition import decompose_trajectory
from .errors import BundleFormatError, InvalidArgumentError
from .fields import Condition, VelocityField, initial_state
from .ioutil import write_csv
from .solver import TimeGrid, sample_full
from .version import __version__

BUNDLE_FORMAT = "tacache-bundle/1"


@dataclass(frozen=True, eq=False)
class IndicatorTable:
    """Per-step indicator means and spreads over a calibration set.

    All arrays have one entry per grid step. The final step has no look-ahead
    velocity to decompose against, so its entry repeats the previous one
    (hold-last); the schedule's end-of-grid cap makes that entry govern a
    length-1 interval at most.
    """

    k_tilde: np.ndarray
    d_tilde: np.ndarray
    k_std: np.ndarray
    d_std: np.ndarray
    sample_count: int

    def __post_init__(self) -> None:
        arrays = {}
        for name in ("k_tilde", "d_tilde", "k_std", "d_std"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 1 or arr.size != np.asarray(self.k_tilde).shape[0]:
                raise InvalidArgumentError("indicator arrays must be 1-d and equally long")
            arr.flags.writeable = False
            arrays[name] = arr
        if self.sample_count < 1:
            raise InvalidArgumentError("sample_count must be positive")
        if np.any(arrays["d_tilde"] < 0):
            raise InvalidArgumentError("direction indicators must be non-negative")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    @property
    def n_steps(self) -> int:
        return self.k_tilde.size


def calibrate(field: VelocityField, grid: TimeGrid, conditions: list[Condition]) -> IndicatorTable:
    """Average per-sample decomposition scalars into indicator curves."""
    if not conditions:
        raise InvalidArgumentError("calibration needs at least one condition")
    n = grid.n_steps
    k_rows = np.empty((len(conditions), max(n - 1, 0)))
    d_rows = np.empty_like(k_rows)
    for row, condition in enumerate(conditions):
        record = sample_full(field, grid, initial_state(condition, field.dimension), condition)
        decs = decompose_trajectory(record)
        k_rows[row] = [s.k for s in decs]
        d_rows[row] = [s.d for s in decs]

    k_tilde = np.zeros(n)
    d_tilde = np.zeros(n)
    k_std = np.zeros(n)
    d_std = np.zeros(n)
    if n > 1:
        k_tilde[: n - 1] = k_rows.mean(axis=0)
        d_tilde[: n - 1] = d_rows.mean(axis=0)
        if len(conditions) > 1:
            k_std[: n - 1] = k_rows.std(axis=0, ddof=1)
            d_std[: n - 1] = d_rows.std(axis=0, ddof=1)
        # hold-last boundary entry for the final step
        k_tilde[n - 1] = k_tilde[n - 2]
        d_tilde[n - 1] = d_tilde[n - 2]
        k_std[n - 1] = k_std[n - 2]
        d_std[n - 1] = d_std[n - 2]
    return IndicatorTable(k_tilde, d_tilde, k_std, d_std, sample_count=len(conditions))


@dataclass(frozen=True, eq=False)
class ScheduleBundle:
    """The pre-computed calibration artifact: indicators + skip schedule.

    ``schedule[n]`` is the admissible skip interval length at step n, always
    between 1 and min(h_max, N - n). Re-running schedule construction on the
    stored indicators with the stored thresholds reproduces ``schedule``
    exactly; the round-trip tests pin that property.
    """

    grid: TimeGrid
    indicators: IndicatorTable
    schedule: np.ndarray
    tau_k: float
    tau_d: float
    h_max: int
    field_digest: str
    seeds: tuple[int, ...]
    created_by: str = f"flowcache {__version__}"

    def __post_init__(self) -> None:
        n = self.grid.n_steps
        schedule = np.array(self.schedule, dtype=int)
        if self.indicators.n_steps != n:
            raise InvalidArgumentError(f"indicators cover {self.indicators.n_steps} steps, grid has {n}")
        if schedule.shape != (n,):
            raise InvalidArgumentError(f"schedule must have {n} entries")
        if self.tau_k < 0 or self.tau_d < 0:
            raise InvalidArgumentError("thresholds must be non-negative")
        if self.h_max < 1:
            raise InvalidArgumentError("h_max must be positive")
        for i, h in enumerate(schedule):
            if not 1 <= h <= min(self.h_max, n - i):
                raise InvalidArgumentError(f"schedule entry out of range at step {i}: h={h}")
        schedule.flags.writeable = False
        object.__setattr__(self, "schedule", schedule)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))


def write_bundle(bundle: ScheduleBundle, path: str | Path) -> None:
    payload = {
        "format_version": BUNDLE_FORMAT,
        "n_steps": bundle.grid.n_steps,
        "times": [float(t) for t in bundle.grid.times],
        "k_tilde": [float(v) for v in bundle.indicators.k_tilde],
        "d_tilde": [float(v) for v in bundle.indicators.d_tilde],
        "k_std": [float(v) for v in bundle.indicators.k_std],
        "d_std": [float(v) for v in bundle.indicators.d_std],
        "h": [int(v) for v in bundle.schedule],
        "tau_k": float(bundle.tau_k),
        "tau_d": float(bundle.tau_d),
        "h_max": int(bundle.h_max),
        "sample_count": int(bundle.indicators.sample_count),
        "field_digest": bundle.field_digest,
        "seeds": list(bundle.seeds),
        "created_by": bundle.created_by,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _require(data: dict, key: str) -> object:
    if key not in data:
        raise BundleFormatError(key, "missing field")
    return data[key]


def read_bundle(path: str | Path) -> ScheduleBundle:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BundleFormatError("document", f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise BundleFormatError("document", "expected a JSON object")
    version = _require(data, "format_version")
    if version != BUNDLE_FORMAT:
        raise BundleFormatError("format_version", f"expected {BUNDLE_FORMAT!r}, got {version!r}")
    n = int(_require(data, "n_steps"))
    if n < 1:
        raise BundleFormatError("n_steps", f"must be positive, got {n}")

    times = _require(data, "times")
    if len(times) != n + 1:
        raise BundleFormatError("times", f"length mismatch: expected {n + 1} entries, got {len(times)}")
    try:
        grid = TimeGrid(np.array(times, dtype=float))
    except InvalidArgumentError as exc:
        raise BundleFormatError("times", str(exc)) from None

    columns = {}
    for key in ("k_tilde", "d_tilde", "k_std", "d_std", "h"):
        values = _require(data, key)
        if len(values) != n:
            raise BundleFormatError(key, f"length mismatch: expected {n} entries, got {len(values)}")
        columns[key] = values
    if any(v < 0 for v in columns["d_tilde"]):
        raise BundleFormatError("d_tilde", "entries must be non-negative")

    tau_k = float(_require(data, "tau_k"))
    tau_d = float(_require(data, "tau_d"))
    if tau_k < 0 or tau_d < 0:
        raise BundleFormatError("tau_k" if tau_k < 0 else "tau_d", "thresholds must be non-negative")
    h_max = int(_require(data, "h_max"))
    if h_max < 1:
        raise BundleFormatError("h_max", f"must be positive, got {h_max}")
    for i, h in enumerate(columns["h"]):
        if not 1 <= int(h) <= min(h_max, n - i):
            raise BundleFormatError("h", f"schedule entry out of range at step {i}: h={h}")

    sample_count = int(data.get("sample_count", 1))
    indicators = IndicatorTable(
        np.array(columns["k_tilde"], dtype=float),
        np.array(columns["d_tilde"], dtype=float),
        np.array(columns["k_std"], dtype=float),
        np.array(columns["d_std"], dtype=float),
        sample_count=sample_count,
    )
    return ScheduleBundle(
        grid=grid,
        indicators=indicators,
        schedule=np.array(columns["h"], dtype=int),
        tau_k=tau_k,
        tau_d=tau_d,
        h_max=h_max,
        field_digest=str(_require(data, "field_digest")),
        seeds=tuple(int(s) for s in _require(data, "seeds")),
        created_by=str(_require(data, "created_by")),
    )


def with_schedule(bundle: ScheduleBundle, schedule: np.ndarray, tau_k: float, tau_d: float, h_max: int) -> ScheduleBundle:
    """Copy of a bundle with a different schedule/threshold block."""
    return replace(bundle, schedule=schedule, tau_k=tau_k, tau_d=tau_d, h_max=h_max)


def bundles_equal(a: ScheduleBundle, b: ScheduleBundle) -> bool:
    """Field-for-field equality with exact float comparison."""
    return (
        np.array_equal(a.grid.times, b.grid.times)
        and np.array_equal(a.indicators.k_tilde, b.indicators.k_tilde)
        and np.array_equal(a.indicators.d_tilde, b.indicators.d_tilde)
        and np.array_equal(a.indicators.k_std, b.indicators.k_std)
        and np.array_equal(a.indicators.d_std, b.indicators.d_std)
        and a.indicators.sample_count == b.indicators.sample_count
        and np.array_equal(a.schedule, b.schedule)
        and a.tau_k == b.tau_k
        and a.tau_d == b.tau_d
        and a.h_max == b.h_max
        and a.field_digest == b.field_digest
        and a.seeds == b.seeds
        and a.created_by == b.created_by
    )


def write_indicator_csv(grid: TimeGrid, indicators: IndicatorTable, path: str | Path) -> None:
    """Indicator curves for external plotting: one row per step."""
    rows = [
        (
            n,
            float(grid.times[n]),
            float(indicators.k_tilde[n]),
            float(indicators.d_tilde[n]),
            float(indicators.k_std[n]),
            float(indicators.d_std[n]),
        )
        for n in range(grid.n_steps)
    ]
    write_csv(path, ("n", "t", "k_tilde", "d_tilde", "k_std", "d_std"), rows)
