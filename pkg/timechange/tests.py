import math

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase, override_settings, tag
from numpy.testing import assert_allclose, assert_array_equal
from scipy.integrate import trapezoid

from analysis.statistics import ks_two_sample, ode_residual, origin_proximity, realized_qv
from driver.grid import TimeGrid
from driver.sampling import DriverPath, sample_driver
from driver.streams import REFERENCE_DOMAIN, normal_rows
from transform.domain import Alpha, Phase
from transform.maps import abs_power
from .choices import Interpolation, Scheme
from .clock import ClockPath, compose_clock, compute_clock, invert_clock
from .exceptions import HorizonExceededError
from .paths import SolutionPath
from .sampler import build_v, sample_weak_solution

ZERO = Alpha(0.0)
QUARTER = Alpha(-0.25)


class BuildVTests(SimpleTestCase):

    def setUp(self):
        self.grid = TimeGrid.uniform(2.0, 20)
        self.zero = DriverPath.zero(self.grid)

    def test_zero_noise_is_deterministic_part(self):
        phase = Phase(1.5, -0.5)
        v = build_v(phase, QUARTER, self.zero)
        h0 = 1.5**0.5 / 0.5
        assert_allclose(v, h0 - 0.5 * self.grid.times, rtol=1e-14)

    def test_unit_start_at_alpha_zero(self):
        assert_array_equal(build_v(Phase(1.0, 0.0), ZERO, self.zero), np.ones(21))

    def test_start_on_axis(self):
        for alpha in (QUARTER, Alpha(-0.4), ZERO):
            with self.subTest(alpha=alpha):
                assert_array_equal(build_v(Phase(0.0, 1.0), alpha, self.zero), self.grid.times)


class ComputeClockTests(SimpleTestCase):

    def test_identity_at_alpha_zero(self):
        grid = TimeGrid.uniform(3.0, 30)
        v = sample_driver(grid, 1, 1).b
        clock = compute_clock(v, grid, ZERO)
        self.assertTrue(clock.is_identity)
        assert_array_equal(clock.t_values, grid.times)

    def test_quadratic_clock_exact_at_nodes(self):
        grid = TimeGrid.regular(1.0 / 64, 128)
        clock = compute_clock(grid.times, grid, QUARTER)
        assert_allclose(clock.t_values, 0.25 * grid.times**2, rtol=1e-12, atol=1e-15)

    def test_rejects_positive_alpha(self):
        grid = TimeGrid.uniform(1.0, 4)
        with self.assertRaises(ValidationError) as ctx:
            compute_clock(np.ones(5), grid, Alpha(0.5))
        self.assertEqual(ctx.exception.code, 'alpha_range')

    def test_trapezoid_converges_at_second_order(self):
        alpha = Alpha(-0.2)

        def reach(n_steps):
            grid = TimeGrid.uniform(1.0, n_steps)
            return compute_clock(2.0 + np.sin(3.0 * grid.times), grid, alpha).reach

        reference = reach(2**14)
        levels = (16, 32, 64)
        errors = [abs(reach(n) - reference) for n in levels]
        slope = np.polyfit(np.log(1.0 / np.array(levels)), np.log(errors), 1)[0]
        self.assertGreater(slope, 1.8)
        self.assertLess(slope, 2.2)


class InvertClockTests(SimpleTestCase):

    def test_identity(self):
        grid = TimeGrid.uniform(1.0, 10)
        clock = compute_clock(None, grid, ZERO)
        t = np.array([0.0, 0.123, 0.5, 1.0])
        assert_array_equal(invert_clock(clock, t), t)

    def test_quadratic_clock_inverse(self):
        grid = TimeGrid.uniform(4.0, 4096)
        clock = compute_clock(grid.times, grid, QUARTER)
        t = np.linspace(0.0, clock.reach, 41)
        assert_allclose(invert_clock(clock, t), 2.0 * np.sqrt(t), atol=1e-3)

    def test_flat_stretch_is_jumped(self):
        clock = ClockPath(TimeGrid([0.0, 1.0, 2.0, 3.0, 4.0]), [0.0, 1.0, 1.0, 2.0, 3.0])
        s = invert_clock(clock, [1.0 - 1e-9, 1.0, 1.0 + 1e-9, 3.0])
        assert_allclose(s, [1.0, 2.0, 2.0, 4.0], atol=1e-8)
        self.assertEqual(s[1], 2.0)
        self.assertEqual(s[3], 4.0)

    def test_past_the_reach(self):
        grid = TimeGrid.uniform(1.0, 4)
        clock = compute_clock(grid.times, grid, QUARTER)
        with self.assertRaises(HorizonExceededError) as ctx:
            invert_clock(clock, [0.1, 0.3])
        self.assertEqual(ctx.exception.code, 'horizon_exceeded')

    def test_non_decreasing_and_recomposes(self):
        grid = TimeGrid.regular(1e-3, 2000)
        path = sample_driver(grid, 3, 5)
        clock = compute_clock(build_v(Phase(1.0, 0.0), QUARTER, path), grid, QUARTER)
        t = np.linspace(0.0, clock.reach, 500)
        s = invert_clock(clock, t)
        self.assertTrue(np.all(np.diff(s) >= 0.0))
        assert_allclose(compose_clock(clock, s), t, atol=1e-12)


class SolutionPathTests(SimpleTestCase):

    def test_must_start_at_initial_point(self):
        grid = TimeGrid.uniform(1.0, 2)
        with self.assertRaises(ValidationError) as ctx:
            SolutionPath(grid, [0.5, 1.0, 1.0], [0.0, 0.0, 0.0], ZERO, Phase(1.0, 0.0), Scheme.EM)
        self.assertEqual(ctx.exception.code, 'invalid_path')


class SampleWeakSolutionTests(SimpleTestCase):

    def test_alpha_zero_matches_direct_construction_bitwise(self):
        grid = TimeGrid.uniform(2.0, 256)
        phase = Phase(0.7, -1.3)
        path = sample_weak_solution(phase, ZERO, grid, 99, 4)
        driver = sample_driver(grid, 99, 4)
        assert_array_equal(path.x, phase.x + phase.y * grid.times + driver.ib)
        assert_array_equal(path.y, phase.y + driver.b)
        assert_array_equal(path.clock, grid.times)
        self.assertEqual(path.scheme, Scheme.TIMECHANGE)

    def test_zero_noise_constant_solution(self):
        path = sample_weak_solution(Phase(1.0, 0.0), QUARTER, TimeGrid.uniform(1.0, 16), 1, 1, zero_noise=True)
        assert_allclose(path.x, np.ones(17), rtol=1e-14)
        assert_array_equal(path.y, np.zeros(17))

    def test_zero_noise_slow_clock_extends_horizon(self):
        # the clock runs at |x0|^(-2 alpha) = 1/2, so the s-horizon doubles
        grid = TimeGrid.uniform(1.0, 8)
        path = sample_weak_solution(Phase(0.25, 0.0), QUARTER, grid, 1, 1, zero_noise=True)
        assert_allclose(path.x, np.full(9, 0.25), rtol=1e-13)
        assert_allclose(path.clock, 2.0 * grid.times, rtol=1e-12)

    def test_cap_hit_raises(self):
        grid = TimeGrid.uniform(1.0, 8)
        with self.assertRaises(HorizonExceededError):
            sample_weak_solution(Phase(0.25, 0.0), QUARTER, grid, 1, 1, zero_noise=True, max_steps=64)
        with self.assertRaises(HorizonExceededError):
            sample_weak_solution(Phase(1.0, 0.0), QUARTER, grid, 1, 1, max_steps=10)

    @override_settings(SDE_TOOLKIT={
        'MAX_CLOCK_STEPS': 64, 'CLOCK_OVERSAMPLE': 8, 'CLOCK_INTERPOLATION': 'linear',
        'WORKERS': 1, 'GRONWALL_Z': 3.0, 'OUTPUT_DIR': 'runs',
    })
    def test_cap_defaults_from_settings(self):
        with self.assertRaises(HorizonExceededError):
            sample_weak_solution(Phase(0.25, 0.0), QUARTER, TimeGrid.uniform(1.0, 8), 1, 1, zero_noise=True)

    def test_rejects_origin_and_positive_alpha(self):
        grid = TimeGrid.uniform(1.0, 8)
        with self.assertRaises(ValidationError) as ctx:
            sample_weak_solution(Phase(0.0, 0.0), QUARTER, grid, 1, 1)
        self.assertEqual(ctx.exception.code, 'origin')
        with self.assertRaises(ValidationError) as ctx:
            sample_weak_solution(Phase(1.0, 0.0), Alpha(0.5), grid, 1, 1)
        self.assertEqual(ctx.exception.code, 'alpha_range')

    def test_deterministic(self):
        grid = TimeGrid.uniform(1.0, 64)
        first = sample_weak_solution(Phase(1.0, 0.5), QUARTER, grid, 5, 6, interpolation=Interpolation.BRIDGE)
        second = sample_weak_solution(Phase(1.0, 0.5), QUARTER, grid, 5, 6, interpolation=Interpolation.BRIDGE)
        assert_array_equal(first.x, second.x)
        assert_array_equal(first.y, second.y)

    def test_bridge_and_linear_share_the_clock(self):
        grid = TimeGrid.uniform(1.0, 64)
        linear = sample_weak_solution(Phase(1.0, 0.0), QUARTER, grid, 5, 6, interpolation=Interpolation.LINEAR)
        bridge = sample_weak_solution(Phase(1.0, 0.0), QUARTER, grid, 5, 6, interpolation=Interpolation.BRIDGE)
        assert_array_equal(linear.clock, bridge.clock)
        self.assertTrue(np.all(np.diff(bridge.clock) >= 0.0))

    def _qv_gap(self, n_paths, n_steps):
        grid = TimeGrid.uniform(1.0, n_steps)
        realized, integral = [], []
        for k in range(n_paths):
            path = sample_weak_solution(Phase(1.0, 0.0), QUARTER, grid, 2024, k, interpolation=Interpolation.BRIDGE)
            realized.append(realized_qv(path.y, grid)(1.0)[0])
            integral.append(trapezoid(abs_power(path.x, 2 * QUARTER.value), grid.times))
        return abs(np.mean(realized) - np.mean(integral)) / np.mean(integral)

    def test_quadratic_variation_is_the_inverse_clock(self):
        self.assertLess(self._qv_gap(10, 2**12), 0.1)

    @tag("slow")
    def test_quadratic_variation_is_the_inverse_clock_full(self):
        self.assertLess(self._qv_gap(100, 2**14), 0.05)

    def _mean_residual_ratios(self, alpha, n_paths):
        residuals = []
        for n_steps in (128, 256, 512):
            grid = TimeGrid.uniform(1.0, n_steps)
            residuals.append(np.mean([
                ode_residual(sample_weak_solution(Phase(1.0, 0.0), alpha, grid, n_steps, k))
                for k in range(n_paths)
            ]))
        return np.array(residuals[1:]) / np.array(residuals[:-1])

    def test_ode_residual_halves_at_alpha_zero(self):
        ratios = self._mean_residual_ratios(ZERO, 200)
        self.assertTrue(np.all((ratios > 0.4) & (ratios < 0.6)), ratios)

    @tag("slow")
    def test_ode_residual_halves_at_negative_alpha(self):
        ratios = self._mean_residual_ratios(QUARTER, 200)
        self.assertTrue(np.all((ratios >= 0.4) & (ratios <= 0.6)), ratios)

    def _x1_ks_p_value(self, n_paths):
        grid = TimeGrid.uniform(1.0, 32)
        phase = Phase(0.5, 1.0)
        sampled = np.sort([sample_weak_solution(phase, ZERO, grid, 7, k).x[-1] for k in range(n_paths)])
        z = normal_rows(7, 0, 0, n_paths, width=1, domain=REFERENCE_DOMAIN)[:, 0]
        reference = np.sort(phase.x + phase.y + math.sqrt(1.0 / 3.0) * z)
        return ks_two_sample(sampled, reference)[1]

    def test_alpha_zero_marginal_matches_gaussian(self):
        self.assertGreater(self._x1_ks_p_value(1000), 1e-3)

    @tag("slow")
    def test_alpha_zero_marginal_matches_gaussian_full(self):
        self.assertGreater(self._x1_ks_p_value(10_000), 1e-3)

    def _origin_fractions(self, n_paths, horizon, n_steps):
        grid = TimeGrid.uniform(horizon, n_steps)
        paths = [sample_weak_solution(Phase(1.0, 0.0), QUARTER, grid, 77, k) for k in range(n_paths)]
        summary = origin_proximity(paths, [1e-1, 1e-2, 1e-3])
        return [summary.estimates[f"below_{eps:g}"].value for eps in (1e-1, 1e-2, 1e-3)]

    def test_origin_rarely_approached(self):
        fractions = self._origin_fractions(200, 1.0, 256)
        self.assertGreaterEqual(fractions[0], fractions[1])
        self.assertGreaterEqual(fractions[1], fractions[2])
        self.assertLess(fractions[2], 0.05)

    @tag("slow")
    def test_origin_rarely_approached_full(self):
        fractions = self._origin_fractions(10_000, 5.0, 500)
        self.assertGreaterEqual(fractions[0], fractions[1])
        self.assertGreaterEqual(fractions[1], fractions[2])
        self.assertLess(fractions[2], 0.01)
