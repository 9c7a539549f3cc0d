import math

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from .domain import Alpha, Phase
from .maps import abs_power, clock_integrand, h, h_inv


ROUND_TRIP_ALPHAS = (-0.49, -0.25, 0.0, 0.5, 1.0)
LATTICE = np.array([s * 10.0**k for k in range(-6, 7) for s in (1.0, -1.0)])


class AlphaTests(SimpleTestCase):

    def test_rejects_lower_bound_and_below(self):
        for value in (-0.5, -0.75, float('nan'), float('-inf')):
            with self.subTest(value=value), self.assertRaises(ValidationError) as ctx:
                Alpha(value)
            self.assertEqual(ctx.exception.code, 'alpha_range')

    def test_derived_constants(self):
        a = Alpha(-0.25)
        self.assertEqual(a.exponent_sum, 0.5)
        self.assertEqual(a.clock_exponent, 1.0)
        self.assertAlmostEqual(a.clock_constant, 0.5, places=15)

    def test_clock_exponent_non_negative_on_construction_range(self):
        for value in np.linspace(-0.49, 0.0, 50):
            a = Alpha(value)
            self.assertTrue(a.in_construction_range)
            self.assertGreaterEqual(a.clock_exponent, 0.0)
            self.assertTrue(math.isfinite(a.clock_constant))
            self.assertGreater(a.clock_constant, 0.0)

    def test_positive_alpha_outside_construction_range(self):
        with self.assertRaises(ValidationError):
            Alpha(0.25).require_construction_range()


class PhaseTests(SimpleTestCase):

    def test_norm_is_l_infinity(self):
        self.assertEqual(Phase(-3.0, 2.0).norm, 3.0)
        self.assertEqual(Phase(0.5, -4.0).norm, 4.0)

    def test_origin_flagged(self):
        self.assertTrue(Phase(0, 0).is_origin)
        self.assertFalse(Phase(0, 1).is_origin)
        with self.assertRaises(ValidationError) as ctx:
            Phase(0.0, -0.0).require_off_origin()
        self.assertEqual(ctx.exception.code, 'origin')


class AbsPowerTests(SimpleTestCase):

    def test_zero_exponent_is_one_everywhere(self):
        np.testing.assert_array_equal(abs_power([0.0, 2.0, -3.0], 0), [1.0, 1.0, 1.0])

    def test_scalar_input(self):
        self.assertEqual(float(abs_power(-4.0, 0.5)), 2.0)
        self.assertEqual(float(abs_power(0.0, 0.5)), 0.0)
        self.assertAlmostEqual(float(abs_power(2.0, -1.0)), 0.5, places=15)

    def test_tiny_values(self):
        np.testing.assert_array_equal(abs_power([0.0, 1e-320], 0.5), [0.0, 0.0])
        with self.assertRaises(ValidationError) as ctx:
            abs_power([1.0, 0.0], -0.25)
        self.assertEqual(ctx.exception.code, 'singular_power')


class TransformMapTests(SimpleTestCase):

    def test_h_at_zero(self):
        for value in ROUND_TRIP_ALPHAS:
            self.assertEqual(h(0.0, Alpha(value)), 0.0)
            self.assertEqual(h_inv(0.0, Alpha(value)), 0.0)

    def test_alpha_zero_is_identity_bitwise(self):
        a = Alpha(0.0)
        xs = np.array([-2.5, -1e-7, 0.0, 3.0, 1e9])
        np.testing.assert_array_equal(h(xs, a), xs)
        np.testing.assert_array_equal(h_inv(xs, a), xs)
        np.testing.assert_array_equal(clock_integrand(xs, a), np.ones_like(xs))

    def test_h_direct_evaluation(self):
        self.assertAlmostEqual(h(1.0, Alpha(0.25)), 1.0 / 1.5, places=15)
        self.assertAlmostEqual(h(-2.0, Alpha(1.0)), -8.0 / 3.0, places=13)

    def test_round_trip_lattice(self):
        for value in ROUND_TRIP_ALPHAS:
            a = Alpha(value)
            back = h_inv(h(LATTICE, a), a)
            error = np.abs(back - LATTICE)
            with self.subTest(alpha=value):
                self.assertTrue(np.all(error <= 1e-12 * np.maximum(1.0, np.abs(LATTICE))))

    def test_oddness_exact(self):
        rng = np.random.default_rng(11)
        xs = rng.standard_normal(1000) * 10.0
        for value in ROUND_TRIP_ALPHAS:
            a = Alpha(value)
            np.testing.assert_array_equal(h(-xs, a), -h(xs, a))
            np.testing.assert_array_equal(h_inv(-xs, a), -h_inv(xs, a))

    def test_monotone_over_random_pairs(self):
        rng = np.random.default_rng(12)
        for value in rng.uniform(-0.49, 1.0, size=20):
            a = Alpha(value)
            x1 = rng.uniform(-50.0, 50.0, size=5000)
            x2 = x1 + rng.uniform(1e-3, 10.0, size=5000)
            with self.subTest(alpha=value):
                self.assertTrue(np.all(h(x1, a) < h(x2, a)))

    def test_scalar_in_scalar_out(self):
        self.assertIsInstance(h(2.0, Alpha(-0.25)), float)
        self.assertIsInstance(h_inv(2.0, Alpha(-0.25)), float)
        self.assertIsInstance(clock_integrand(2.0, Alpha(-0.25)), float)


class ClockIntegrandTests(SimpleTestCase):

    def test_vanishes_at_zero_when_exponent_positive(self):
        self.assertEqual(clock_integrand(0.0, Alpha(-0.25)), 0.0)

    def test_known_value(self):
        # p = 1, c = 0.5, so c * 2^p = 1
        self.assertAlmostEqual(clock_integrand(2.0, Alpha(-0.25)), 1.0, places=14)

    def test_is_derivative_of_h_inv(self):
        a = Alpha(-0.3)
        v = np.linspace(0.2, 3.0, 25)
        step = 1e-6
        numeric = (h_inv(v + step, a) - h_inv(v - step, a)) / (2 * step)
        np.testing.assert_allclose(clock_integrand(v, a), numeric, rtol=1e-6)

    def test_rejects_positive_alpha(self):
        with self.assertRaises(ValidationError) as ctx:
            clock_integrand(1.0, Alpha(0.5))
        self.assertEqual(ctx.exception.code, 'alpha_range')
