import math
from unittest import mock

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase, tag
from numpy.testing import assert_allclose, assert_array_equal

from analysis.statistics import sup_rms_difference
from analysis.stopping import tau_n
from driver.grid import TimeGrid
from driver.sampling import DriverPath, refine_driver, sample_driver
from timechange.choices import Scheme
from transform.domain import Alpha, Phase
from .euler import coefficient, euler_maruyama, euler_maruyama_batch, mean_value_violations
from .truncation import TruncationSpec


class TruncationSpecTests(SimpleTestCase):

    def test_radii_are_exact_powers_of_two(self):
        trunc = TruncationSpec(10)
        self.assertEqual(trunc.inner, 2.0**-10)
        self.assertEqual(trunc.outer, 1024.0)
        self.assertLess(trunc.inner, trunc.outer)

    def test_rejects_non_positive_levels(self):
        for n in (0, -3, 1.5):
            with self.subTest(n=n):
                with self.assertRaises(ValidationError) as ctx:
                    TruncationSpec(n)
                self.assertEqual(ctx.exception.code, 'invalid_truncation')

    def test_band_is_open(self):
        trunc = TruncationSpec(1)
        assert_array_equal(trunc.outside(np.array([0.5, 0.6, 1.9, 2.0])), [True, False, False, True])


class CoefficientTests(SimpleTestCase):

    def test_zero_for_positive_alpha_at_origin(self):
        self.assertEqual(coefficient(0.0, Alpha(0.5), 0.0), 0.0)

    def test_one_at_alpha_zero(self):
        assert_array_equal(coefficient(np.array([0.0, -3.0, 1e6]), Alpha(0.0), 0.0), np.ones(3))

    def test_floor_clamps_negative_alpha(self):
        self.assertAlmostEqual(coefficient(0.001, Alpha(-0.25), 0.01), 3.1622776601683795, places=14)
        self.assertAlmostEqual(coefficient(-4.0, Alpha(-0.5 + 1e-9), 0.01), 0.5, places=7)

    def test_unbounded_without_floor(self):
        with self.assertRaises(ValidationError) as ctx:
            coefficient(0.0, Alpha(-0.25), 0.0)
        self.assertEqual(ctx.exception.code, 'unbounded_coefficient')

    def test_negative_floor_rejected(self):
        with self.assertRaises(ValidationError):
            coefficient(1.0, Alpha(0.5), -1.0)


class EulerMaruyamaTests(SimpleTestCase):

    def setUp(self):
        self.grid = TimeGrid.uniform(1.0, 64)

    def test_zero_noise_is_linear_motion(self):
        path = euler_maruyama(Phase(1.0, -2.0), Alpha(0.75), DriverPath.zero(self.grid))
        assert_allclose(path.x, 1.0 - 2.0 * self.grid.times, atol=1e-14)
        assert_array_equal(path.y, np.full(65, -2.0))
        self.assertEqual(path.scheme, Scheme.EM)
        self.assertIsNone(path.clock)

    def test_alpha_zero_accumulates_driver_increments(self):
        driver = sample_driver(self.grid, 6, 1)
        path = euler_maruyama(Phase(0.3, 0.2), Alpha(0.0), driver)
        assert_array_equal(path.y, np.cumsum(np.concatenate(([0.2], driver.increments()))))

    def test_negative_alpha_needs_truncation_or_floor(self):
        driver = sample_driver(self.grid, 6, 1)
        with self.assertRaises(ValidationError) as ctx:
            euler_maruyama(Phase(1.0, 0.0), Alpha(-0.25), driver)
        self.assertEqual(ctx.exception.code, 'unbounded_coefficient')
        euler_maruyama(Phase(1.0, 0.0), Alpha(-0.25), driver, trunc=TruncationSpec(4))
        euler_maruyama(Phase(1.0, 0.0), Alpha(-0.25), driver, floor=1e-3)

    def test_frozen_after_exit(self):
        grid = TimeGrid.uniform(1.0, 4)
        driver = DriverPath(grid, [0.0, 3.0, 3.5, 4.0, 4.5], np.zeros(5))
        path = euler_maruyama(Phase(1.0, 0.0), Alpha(0.0), driver, trunc=TruncationSpec(1))
        # node 1 is the first outside [1/2, 2]; its step is still taken
        assert_array_equal(path.y, [0.0, 3.0, 3.5, 3.5, 3.5])
        assert_allclose(path.x, [1.0, 1.0, 1.75, 2.625, 3.5])

    def test_truncation_is_invisible_without_exit(self):
        alpha = Alpha(0.5)
        trunc = TruncationSpec(6)
        drivers = [sample_driver(self.grid, 12, k) for k in range(50)]
        plain = euler_maruyama_batch(Phase(1.0, 0.0), alpha, drivers)
        truncated = euler_maruyama_batch(Phase(1.0, 0.0), alpha, drivers, trunc=trunc)
        kept = 0
        for free, cut in zip(plain, truncated):
            if math.isinf(tau_n(free, trunc)):
                kept += 1
                assert_array_equal(free.x, cut.x)
                assert_array_equal(free.y, cut.y)
        self.assertGreater(kept, 0)

    def test_batch_matches_single_paths(self):
        drivers = [sample_driver(self.grid, 3, k) for k in range(5)]
        batch = euler_maruyama_batch(Phase(0.0, 1.0), Alpha(0.75), drivers)
        for driver, path in zip(drivers, batch):
            single = euler_maruyama(Phase(0.0, 1.0), Alpha(0.75), driver)
            assert_array_equal(single.x, path.x)
            self.assertEqual(path.stream_id, driver.stream_id)

    def test_coupled_schemes_consume_the_same_increments(self):
        driver = sample_driver(self.grid, 3, 9)
        consumed = []
        original = DriverPath.increments

        def spy(self):
            values = original(self)
            consumed.append(values.copy())
            return values

        with mock.patch.object(DriverPath, 'increments', autospec=True, side_effect=spy):
            euler_maruyama(Phase(1.0, 0.0), Alpha(0.75), driver)
            euler_maruyama(Phase(1.0, 0.0), Alpha(0.75), driver, trunc=TruncationSpec(3))
        self.assertEqual(len(consumed), 2)
        assert_array_equal(consumed[0], consumed[1])

    def test_grid_mismatch(self):
        drivers = [sample_driver(self.grid, 1, 0), sample_driver(TimeGrid.uniform(1.0, 32), 1, 1)]
        with self.assertRaises(ValidationError) as ctx:
            euler_maruyama_batch(Phase(1.0, 0.0), Alpha(0.5), drivers)
        self.assertEqual(ctx.exception.code, 'grid_mismatch')

    def _rms_by_level(self, n_pairs, exponents):
        alpha = Alpha(0.75)
        phase = Phase(1.0, 0.0)
        rms = []
        for e in exponents:
            coarse_grid = TimeGrid.uniform(1.0, 2**e)
            fine_grid = TimeGrid.uniform(1.0, 2**(e + 2))
            coarse = [sample_driver(coarse_grid, 500 + e, k) for k in range(n_pairs)]
            fine = [refine_driver(d, fine_grid, seed=900 + e) for d in coarse]
            rms.append(sup_rms_difference(
                euler_maruyama_batch(phase, alpha, coarse),
                euler_maruyama_batch(phase, alpha, fine),
            ).value)
        return rms

    def test_strong_self_convergence(self):
        rms = self._rms_by_level(200, (4, 6, 8))
        self.assertGreater(rms[0], rms[1])
        self.assertGreater(rms[1], rms[2])

    @tag("slow")
    def test_strong_self_convergence_full(self):
        rms = self._rms_by_level(1000, (6, 8, 10))
        self.assertGreater(rms[0], rms[1])
        self.assertGreater(rms[1], rms[2])


class MeanValueTests(SimpleTestCase):

    def test_no_violations_on_random_pairs(self):
        rng = np.random.default_rng(2024)
        a = rng.uniform(2.0**-10, 8.0, 1_000_000)
        b = a + rng.exponential(1.0, a.size) + 1e-12
        for value in (-0.25, 0.25, 0.75):
            with self.subTest(alpha=value):
                self.assertEqual(mean_value_violations(a, b, Alpha(value)), 0)

    def test_detects_a_wrong_bound(self):
        # convex powers have an increasing derivative and break the bound
        a = np.array([1.0])
        b = np.array([4.0])
        self.assertEqual(mean_value_violations(a, b, Alpha(0.5)), 0)
        self.assertEqual(mean_value_violations(a, b, Alpha(1.5)), 1)

    def test_rejects_unordered_pairs(self):
        with self.assertRaises(ValidationError):
            mean_value_violations([2.0], [1.0], Alpha(0.5))
