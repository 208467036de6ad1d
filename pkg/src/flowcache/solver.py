"""Time grids and first-order Euler integration.

Sampling runs from t=1 (noise) down to t=0 (data) on a strictly decreasing
grid; each step advances the state by ``state - dt * velocity``. Full-step
runs evaluate the oracle at every step and serve as the reference for every
cached-sampling comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, NumericDomainError
from .fields import Condition, VelocityField
from .ioutil import write_csv


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly decreasing times t_0 = 1 > t_1 > ... > t_N = 0."""

    times: np.ndarray

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise InvalidArgumentError("a time grid needs at least two nodes")
        if times[0] != 1.0 or times[-1] != 0.0:
            raise InvalidArgumentError("grid endpoints must be exactly 1 and 0")
        if not np.all(np.diff(times) < 0.0):
            raise InvalidArgumentError("grid times must be strictly decreasing")
        times.flags.writeable = False
        object.__setattr__(self, "times", times)

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def dt(self) -> np.ndarray:
        """Per-step sizes dt_n = t_n - t_{n+1}, all positive."""
        return self.times[:-1] - self.times[1:]


def make_uniform_grid(n_steps: int) -> TimeGrid:
    if n_steps < 1:
        raise InvalidArgumentError(f"n_steps must be >= 1, got {n_steps}")
    return TimeGrid(np.linspace(1.0, 0.0, n_steps + 1))


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """States, velocities, and evaluation flags from one sampling run.

    ``states`` has N+1 rows (one per grid node); ``velocities`` and
    ``evaluated`` have N entries (one per step). ``evaluated[n]`` is True
    where the oracle was actually called, so ``nfe`` counts true oracle work.
    """

    grid: TimeGrid
    states: np.ndarray
    velocities: np.ndarray
    evaluated: np.ndarray

    def __post_init__(self) -> None:
        n = self.grid.n_steps
        states = np.array(self.states, dtype=float)
        velocities = np.array(self.velocities, dtype=float)
        evaluated = np.array(self.evaluated, dtype=bool)
        if states.shape[0] != n + 1:
            raise InvalidArgumentError(f"expected {n + 1} states, got {states.shape[0]}")
        if velocities.shape[0] != n or evaluated.shape[0] != n:
            raise InvalidArgumentError(f"expected {n} velocities and flags")
        for arr, name in ((states, "states"), (velocities, "velocities"), (evaluated, "evaluated")):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def nfe(self) -> int:
        return int(np.count_nonzero(self.evaluated))

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def euler_step(state: np.ndarray, velocity: np.ndarray, dt: float) -> np.ndarray:
    """One explicit Euler update toward the data end: state - dt * velocity."""
    state = np.asarray(state, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    if state.shape != velocity.shape:
        raise InvalidArgumentError(f"state shape {state.shape} does not match velocity shape {velocity.shape}")
    if not (np.isfinite(state).all() and np.isfinite(velocity).all() and np.isfinite(dt)):
        raise NumericDomainError("euler_step requires finite state, velocity, and dt")
    return state - dt * velocity


def sample_full(field: VelocityField, grid: TimeGrid, x0: np.ndarray, condition: Condition) -> TrajectoryRecord:
    """Reference run: evaluate the oracle at every step of the grid."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (field.dimension,):
        raise InvalidArgumentError(f"x0 shape {x0.shape} does not match field dimension {field.dimension}")
    n = grid.n_steps
    dt = grid.dt
    states = np.empty((n + 1, field.dimension))
    velocities = np.empty((n, field.dimension))
    states[0] = x0
    for i in range(n):
        velocities[i] = field.evaluate(states[i], float(grid.times[i]), condition)
        states[i + 1] = euler_step(states[i], velocities[i], float(dt[i]))
    return TrajectoryRecord(grid, states, velocities, np.ones(n, dtype=bool))


def write_trajectory_csv(record: TrajectoryRecord, path: str | Path) -> None:
    """One row per step: n, t_n, evaluated flag, state norm, velocity norm."""
    rows = []
    for i in range(record.grid.n_steps):
        rows.append(
            (
                i,
                float(record.grid.times[i]),
                bool(record.evaluated[i]),
                float(np.linalg.norm(record.states[i])),
                float(np.linalg.norm(record.velocities[i])),
            )
        )
    write_csv(path, ("n", "t", "evaluated", "state_norm", "velocity_norm"), rows)
