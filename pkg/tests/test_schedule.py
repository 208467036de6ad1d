from __future__ import annotations

import numpy as np
import pytest

from flowcache import (
    DEFAULT_H_MAX,
    DEFAULT_TAU_D,
    DEFAULT_TAU_K,
    InvalidArgumentError,
    VariationSequence,
    build_schedule,
    calibrate,
    max_stable_interval,
    schedule_coverage,
)
from flowcache.calibration import IndicatorTable
from flowcache.fields import Condition, VelocityField
from flowcache.schedule import THRESHOLD_PRESETS
from flowcache.solver import make_uniform_grid
from flowcache.verify import suite_ssc


class TestMaxStableInterval:
    def test_prefix_sum_example(self):
        z = VariationSequence(np.array([0.1, 0.2, 0.3, 0.4]))
        assert max_stable_interval(z, 0, 0.35, 12) == 2

    def test_fallback_to_one(self):
        z = VariationSequence(np.array([0.1, 0.2, 0.3, 0.4]))
        assert max_stable_interval(z, 0, 0.05, 12) == 1

    def test_h_max_cap_binds(self):
        z = VariationSequence(np.zeros(10))
        assert max_stable_interval(z, 0, 0.0, 4) == 4

    def test_end_of_grid_cap(self):
        z = VariationSequence(np.zeros(10))
        assert max_stable_interval(z, 8, 1.0, 12) == 2

    def test_tie_at_threshold_admits(self):
        z = VariationSequence(np.array([0.2, 0.2, 0.2]))
        assert max_stable_interval(z, 0, 0.4, 12) == 2

    def test_index_out_of_range(self):
        z = VariationSequence(np.zeros(3))
        with pytest.raises(InvalidArgumentError):
            max_stable_interval(z, 3, 0.1, 12)

    def test_negative_values_rejected(self):
        with pytest.raises(InvalidArgumentError):
            VariationSequence(np.array([0.1, -0.2]))

    def test_brute_force_equivalence(self):
        result = suite_ssc(cases=2000, seed=13)
        assert result.passed, result.failures[:3]

    def test_monotone_in_tau(self):
        rng = np.random.default_rng(29)
        for _ in range(300):
            size = int(rng.integers(1, 40))
            z = VariationSequence(rng.uniform(0.0, 1.0, size=size))
            n = int(rng.integers(0, size))
            h_max = int(rng.integers(1, 14))
            tau_lo = float(rng.uniform(0.0, 2.0))
            tau_hi = tau_lo + float(rng.uniform(0.0, 2.0))
            assert max_stable_interval(z, n, tau_lo, h_max) <= max_stable_interval(z, n, tau_hi, h_max)

    def test_monotone_under_domination(self):
        rng = np.random.default_rng(31)
        for _ in range(300):
            size = int(rng.integers(1, 40))
            z = rng.uniform(0.0, 1.0, size=size)
            z_small = z * rng.uniform(0.0, 1.0, size=size)
            n = int(rng.integers(0, size))
            h_max = int(rng.integers(1, 14))
            tau = float(rng.uniform(0.0, 3.0))
            assert max_stable_interval(VariationSequence(z_small), n, tau, h_max) >= max_stable_interval(
                VariationSequence(z), n, tau, h_max
            )

    def test_never_runs_past_grid(self):
        rng = np.random.default_rng(37)
        for _ in range(300):
            size = int(rng.integers(1, 40))
            z = VariationSequence(rng.uniform(0.0, 0.1, size=size))
            n = int(rng.integers(0, size))
            h = max_stable_interval(z, n, float(rng.uniform(0, 5)), int(rng.integers(1, 20)))
            assert n + h <= size


class TestBuildSchedule:
    def _indicators(self, k, d):
        k = np.asarray(k, dtype=float)
        return IndicatorTable(k, np.asarray(d, dtype=float), np.zeros_like(k), np.zeros_like(k), 1)

    def test_zero_thresholds_force_single_steps(self):
        grid = make_uniform_grid(6)
        ind = self._indicators(np.full(6, 0.5), np.full(6, 0.2))
        np.testing.assert_array_equal(build_schedule(ind, grid, 0.0, 0.0, 12), np.ones(6, dtype=int))

    def test_zero_indicators_hit_caps(self):
        grid = make_uniform_grid(50)
        ind = self._indicators(np.zeros(50), np.zeros(50))
        h = build_schedule(ind, grid, 0.0, 0.0, 12)
        np.testing.assert_array_equal(h, [min(12, 50 - n) for n in range(50)])

    def test_min_rule(self):
        grid = make_uniform_grid(10)
        # magnitude admits 5 steps from n=0, direction only 2
        k = np.full(10, 1.0)  # K_m = 0.1 per step
        d = np.full(10, 0.3)
        ind = self._indicators(k, d)
        h = build_schedule(ind, grid, 0.5, 0.6, 12)
        assert h[0] == 2
        assert max_stable_interval(VariationSequence(np.abs(k) * grid.dt), 0, 0.5, 12) == 5

    def test_negative_threshold_rejected(self):
        grid = make_uniform_grid(4)
        ind = self._indicators(np.zeros(4), np.zeros(4))
        with pytest.raises(InvalidArgumentError):
            build_schedule(ind, grid, -0.1, 0.0, 12)

    def test_length_mismatch_rejected(self):
        grid = make_uniform_grid(5)
        ind = self._indicators(np.zeros(4), np.zeros(4))
        with pytest.raises(InvalidArgumentError):
            build_schedule(ind, grid, 0.1, 0.1, 12)

    def test_constant_field_schedule(self, constant_spec):
        vf = VelocityField(constant_spec)
        grid = make_uniform_grid(50)
        ind = calibrate(vf, grid, [Condition(s) for s in range(5)])
        h = build_schedule(ind, grid, DEFAULT_TAU_K, DEFAULT_TAU_D, DEFAULT_H_MAX)
        np.testing.assert_array_equal(h, [min(12, 50 - n) for n in range(50)])


class TestScheduleCoverage:
    def test_no_skipping(self):
        ratio, anchors = schedule_coverage(np.ones(8, dtype=int), 8)
        assert ratio == 0.0
        assert anchors == list(range(8))

    def test_constant_field_walk(self):
        schedule = np.array([min(12, 50 - n) for n in range(50)])
        ratio, anchors = schedule_coverage(schedule, 50)
        assert anchors == [0, 1, 13, 25, 37, 49]
        assert ratio == pytest.approx(1.0 - 6 / 50)

    def test_skip_ratio_reported_exactly(self):
        # 49 anchors out of 200 steps: the ratio comes out of the anchor
        # count itself, with no rounding
        schedule = np.ones(200, dtype=int)
        schedule[48] = 152
        ratio, anchors = schedule_coverage(schedule, 200)
        assert len(anchors) == 49
        assert ratio == 0.755

    def test_first_step_forced_single(self):
        schedule = np.full(10, 5, dtype=int)
        schedule[np.arange(10) + 5 > 10] = 1  # keep entries in range
        _, anchors = schedule_coverage(np.minimum(schedule, 10 - np.arange(10)), 10)
        assert anchors[0] == 0 and anchors[1] == 1


def test_default_hyperparameters():
    assert DEFAULT_H_MAX == 12
    assert (DEFAULT_TAU_K, DEFAULT_TAU_D) == (0.06, 0.6)
    assert THRESHOLD_PRESETS == ((0.06, 0.6), (0.04, 0.4), (0.03, 0.3))
