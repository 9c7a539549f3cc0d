import math

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase, tag
from numpy.testing import assert_allclose, assert_array_equal

from driver.grid import TimeGrid
from driver.sampling import DriverPath, refine_driver, sample_driver
from schemes.euler import euler_maruyama, euler_maruyama_batch
from schemes.truncation import TruncationSpec
from timechange.choices import Scheme
from timechange.paths import SolutionPath
from timechange.sampler import sample_weak_solution
from transform.domain import Alpha, Phase
from .choices import Verdict
from .curves import PathCurve
from .gronwall import gronwall_constant, gronwall_violation_check
from .statistics import (
    d_statistic, gronwall_envelope, ks_two_sample, ode_residual, origin_proximity,
    realized_qv, small_time_slope, sup_rms_difference, v_statistic,
)
from .stopping import eta_time, first_approach, sigma_times, tau_n, tau_n_pair
from .summary import McSummary

ZERO = Alpha(0.0)


def make_path(times, x, y, alpha=ZERO, stream_id=0):
    return SolutionPath(TimeGrid(times), x, y, alpha, Phase(x[0], y[0]), Scheme.EM, stream_id=stream_id)


class McSummaryTests(SimpleTestCase):

    def test_standard_error(self):
        summary = McSummary.from_samples({'a': [1.0, 2.0, 3.0, 4.0]})
        self.assertEqual(summary.estimates['a'].value, 2.5)
        assert_allclose(summary.estimates['a'].stderr, np.std([1, 2, 3, 4], ddof=1) / 2.0)

    def test_single_path_has_no_stderr(self):
        self.assertIsNone(McSummary.from_samples({'a': [1.0]}).estimates['a'].stderr)

    def test_merge_is_commutative_and_pooled(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=40), rng.normal(2.0, 3.0, size=25)
        left = McSummary.from_samples({'m': a}, cdfs=('m',))
        right = McSummary.from_samples({'m': b}, cdfs=('m',))
        ab, ba = left.merge(right), right.merge(left)
        self.assertEqual(ab.estimates, ba.estimates)
        assert_array_equal(ab.empirical_cdfs['m'], ba.empirical_cdfs['m'])
        whole = McSummary.from_samples({'m': np.concatenate((a, b))})
        self.assertEqual(ab.n_paths, 65)
        assert_allclose(ab.estimates['m'].value, whole.estimates['m'].value, rtol=1e-13)
        assert_allclose(ab.estimates['m'].stderr, whole.estimates['m'].stderr, rtol=1e-12)

    def test_rejects_empty_and_ragged(self):
        for samples in ({'a': []}, {'a': [1.0], 'b': [1.0, 2.0]}):
            with self.assertRaises(ValidationError):
                McSummary.from_samples(samples)

    def test_to_dict(self):
        data = McSummary.from_samples({'m': np.arange(101.0)}, cdfs=('m',)).to_dict()
        self.assertEqual(data['n_paths'], 101)
        self.assertEqual(data['quantiles']['m']['0.5'], 50.0)


class PathCurveTests(SimpleTestCase):

    def test_interpolates_value_and_stderr(self):
        curve = PathCurve([0.0, 1.0, 2.0], [0.0, 2.0, 2.0], [0.0, 1.0, 3.0])
        self.assertEqual(curve(0.5), (1.0, 0.5))
        self.assertEqual(curve(1.5), (2.0, 2.0))

    def test_restrict(self):
        curve = PathCurve([0.0, 1.0, 2.0], [0.0, 2.0, 2.0]).restrict(1.0)
        self.assertEqual(len(curve), 2)
        self.assertIsNone(curve(1.0)[1])


class StoppingTimeTests(SimpleTestCase):

    def test_constant_path_never_exits(self):
        path = make_path([0.0, 0.5, 1.0], [1.0, 1.0, 1.0], [0.0, 0.0, 0.0])
        self.assertEqual(tau_n(path, TruncationSpec(1)), math.inf)

    def test_immediate_exit(self):
        t = np.linspace(0.0, 1.0, 11)
        path = make_path(t, 4.0 * t, np.full(11, 4.0))
        self.assertEqual(tau_n(path, TruncationSpec(1)), 0.0)

    def test_band_nesting_on_sampled_paths(self):
        grid = TimeGrid.uniform(3.0, 512)
        for k in range(20):
            path = sample_weak_solution(Phase(1.0, 0.0), Alpha(-0.25), grid, 4, k)
            taus = [tau_n(path, TruncationSpec(n)) for n in (1, 2, 3, 4)]
            self.assertEqual(taus, sorted(taus))

    def test_pairwise_uses_both_paths(self):
        t = [0.0, 1.0, 2.0, 3.0]
        calm = make_path(t, [1.0, 1.0, 1.0, 1.0], [0.0, 0.0, 0.0, 0.0])
        wild = make_path(t, [1.0, 1.0, 0.1, 5.0], [0.0, 0.0, 0.0, 0.0])
        trunc = TruncationSpec(1)
        self.assertEqual(tau_n_pair(calm, wild, trunc), 2.0)
        self.assertEqual(tau_n_pair(wild, calm, trunc), 2.0)

    def test_eta_and_first_approach(self):
        t = [0.0, 1.0, 2.0, 3.0]
        first = make_path(t, [0.0, 0.1, 0.3, 0.6], [1.0, 1.0, 1.0, 1.0])
        second = make_path(t, [0.0, 0.05, 0.2, 0.7], [1.0, 1.0, 1.0, 1.0])
        self.assertEqual(eta_time(first, second, TruncationSpec(2)), 2.0)
        self.assertEqual(first_approach(first, second, 0.01), 0.0)


class SigmaTimesTests(SimpleTestCase):

    def test_single_linear_root(self):
        t = np.linspace(0.0, 2.0, 8)
        assert_allclose(sigma_times(make_path(t, 1.0 - t, np.full(8, -1.0))), [1.0])

    def test_no_sign_change(self):
        t = np.linspace(0.0, 1.0, 5)
        self.assertEqual(sigma_times(make_path(t, 1.0 + t, np.ones(5))).size, 0)

    def test_exact_zero_nodes_count(self):
        t = [0.0, 1.0, 2.0, 3.0]
        crossings = sigma_times(make_path(t, [1.0, 0.0, -1.0, 1.0], [0.0, 0.0, 0.0, 0.0]))
        assert_allclose(crossings, [1.0, 2.5])

    def test_sine_roots(self):
        grid = TimeGrid.uniform(1.0, 2**10)
        x = np.sin(2.0 * np.pi * grid.times)
        path = SolutionPath(grid, x, 2.0 * np.pi * np.cos(2.0 * np.pi * grid.times), ZERO, Phase(0.0, 2.0 * np.pi), Scheme.EM)
        crossings = sigma_times(path, zero_tol=1e-12)
        self.assertEqual(crossings.size, 2)
        assert_allclose(crossings, [0.5, 1.0], atol=2.0**-10)
        self.assertTrue(np.all(np.diff(crossings) > 0))
        self.assertLess(0.0, abs(x[-1]))
        assert_array_equal(sigma_times(path), crossings)


class DStatisticTests(SimpleTestCase):

    def setUp(self):
        self.grid = TimeGrid.uniform(1.0, 64)
        self.drivers = [sample_driver(self.grid, 2, k) for k in range(30)]

    def test_identical_schemes_give_zero(self):
        paths = euler_maruyama_batch(Phase(0.0, 1.0), Alpha(0.75), self.drivers)
        curve = d_statistic(paths, paths)
        assert_array_equal(curve.values, np.zeros(65))

    def test_symmetric(self):
        plain = euler_maruyama_batch(Phase(0.0, 1.0), Alpha(0.75), self.drivers)
        cut = euler_maruyama_batch(Phase(0.0, 1.0), Alpha(0.75), self.drivers, trunc=TruncationSpec(1))
        forward, backward = d_statistic(plain, cut), d_statistic(cut, plain)
        assert_array_equal(forward.values, backward.values)
        assert_array_equal(forward.stderr, backward.stderr)

    def test_requires_coupling(self):
        paths = euler_maruyama_batch(Phase(0.0, 1.0), Alpha(0.75), self.drivers)
        with self.assertRaises(ValidationError) as ctx:
            d_statistic(paths, paths[::-1])
        self.assertEqual(ctx.exception.code, 'not_coupled')

    def test_grid_mismatch(self):
        coarse = euler_maruyama(Phase(0.0, 1.0), Alpha(0.75), self.drivers[0])
        fine = euler_maruyama(Phase(0.0, 1.0), Alpha(0.75), refine_driver(self.drivers[0], TimeGrid.uniform(1.0, 128), 1))
        with self.assertRaises(ValidationError) as ctx:
            d_statistic([coarse], [fine])
        self.assertEqual(ctx.exception.code, 'grid_mismatch')

    def test_coarse_fine_distance_shrinks(self):
        alpha, phase = Alpha(0.75), Phase(0.0, 1.0)
        sups = []
        for e in (4, 6, 8):
            coarse_grid = TimeGrid.uniform(1.0, 2**e)
            drivers = [sample_driver(coarse_grid, 60 + e, k) for k in range(200)]
            fine = [refine_driver(d, TimeGrid.uniform(1.0, 2**(e + 2)), seed=70 + e) for d in drivers]
            coarse_paths = euler_maruyama_batch(phase, alpha, drivers)
            fine_paths = [p.at(coarse_grid) for p in euler_maruyama_batch(phase, alpha, fine)]
            sups.append(d_statistic(coarse_paths, fine_paths).values.max())
        self.assertGreater(sups[0], sups[1])
        self.assertGreater(sups[1], sups[2])

    def test_v_statistic_and_envelope(self):
        t = np.linspace(0.0, 1.0, 5)
        v = v_statistic(PathCurve(t, 3.0 * t**2))
        assert_allclose(v.values, np.full(4, 3.0))
        assert_array_equal(gronwall_envelope(0.0, 5.0, Alpha(0.75), t), np.zeros(5))
        assert_allclose(gronwall_envelope(1.0, 2.5, Alpha(0.75), 1.0), math.exp(1.0))


class SmallTimeSlopeTests(SimpleTestCase):

    def test_zero_noise_slopes(self):
        grid = TimeGrid.uniform(1.0, 16)
        for y0 in (1.0, -2.0):
            path = euler_maruyama(Phase(0.0, y0), Alpha(0.75), DriverPath.zero(grid))
            for at in (None, 0.25, 1.0):
                with self.subTest(y0=y0, at=at):
                    self.assertAlmostEqual(small_time_slope(path, at=at), y0, places=14)

    def _mean_slopes(self, n_paths):
        grid = TimeGrid.uniform(1.0, 2**12)
        paths = euler_maruyama_batch(Phase(0.0, 1.0), Alpha(0.75), [sample_driver(grid, 81, k) for k in range(n_paths)])
        out = []
        for k in (6, 8, 10):
            slopes = np.array([small_time_slope(p, at=2.0**-k) for p in paths])
            out.append((slopes.mean(), slopes.std(ddof=1) / math.sqrt(n_paths)))
        return out

    def test_slope_tends_to_initial_velocity(self):
        for mean, stderr in self._mean_slopes(300):
            self.assertLess(abs(mean - 1.0), 4.0 * stderr)

    @tag("slow")
    def test_slope_tends_to_initial_velocity_full(self):
        for mean, stderr in self._mean_slopes(1000):
            self.assertLess(abs(mean - 1.0), 3.0 * stderr)


class QuadraticVariationTests(SimpleTestCase):

    def test_constant_is_zero(self):
        grid = TimeGrid.uniform(1.0, 8)
        assert_array_equal(realized_qv(np.full(9, 2.5), grid).values, np.zeros(9))

    def test_brownian_qv_is_time(self):
        grid = TimeGrid.uniform(1.0, 2**14)
        qv = realized_qv(sample_driver(grid, 3, 3).b, grid)
        self.assertTrue(np.all(np.diff(qv.values) >= 0))
        self.assertLess(abs(qv(1.0)[0] - 1.0), 0.05)


class KolmogorovSmirnovTests(SimpleTestCase):

    def test_identical_samples(self):
        a = np.sort(np.random.default_rng(0).normal(size=100))
        self.assertEqual(ks_two_sample(a, a), (0.0, 1.0))

    def test_empty_sample_rejected(self):
        with self.assertRaises(ValidationError) as ctx:
            ks_two_sample([], [1.0])
        self.assertEqual(ctx.exception.code, 'empty_sample')

    def test_rank_invariance(self):
        rng = np.random.default_rng(5)
        a, b = rng.normal(size=300), rng.normal(0.2, 1.0, size=200)
        self.assertEqual(ks_two_sample(a, b), ks_two_sample(np.exp(a), np.exp(b)))

    def test_detects_shift(self):
        rng = np.random.default_rng(6)
        _, p_value = ks_two_sample(rng.normal(size=10_000), rng.normal(1.0, 1.0, size=10_000))
        self.assertLess(p_value, 1e-6)

    def test_matches_scipy_statistic(self):
        from scipy.stats import ks_2samp

        rng = np.random.default_rng(8)
        a, b = rng.normal(size=400), rng.standard_t(5, size=300)
        self.assertAlmostEqual(ks_two_sample(a, b)[0], ks_2samp(a, b).statistic, places=12)

    @tag("slow")
    def test_null_calibration(self):
        rng = np.random.default_rng(7)
        passed = sum(
            ks_two_sample(rng.normal(size=10_000), rng.normal(size=10_000))[1] > 1e-3 for _ in range(100)
        )
        self.assertGreaterEqual(passed, 99)


class OriginProximityTests(SimpleTestCase):

    def test_constant_path(self):
        t = np.linspace(0.0, 1.0, 5)
        path = make_path(t, np.ones(5), np.zeros(5))
        summary = origin_proximity([path, path], [0.5, 0.9, 2.0])
        self.assertEqual(summary.estimates['below_0.5'].value, 0.0)
        self.assertEqual(summary.estimates['below_0.9'].value, 0.0)
        self.assertEqual(summary.estimates['below_2'].value, 1.0)
        self.assertEqual(summary.estimates['below_2'].stderr, 0.0)


class GronwallCheckTests(SimpleTestCase):

    def test_zero_curve_holds_with_zero_margin(self):
        t = np.linspace(0.0, 1.0, 33)
        report = gronwall_violation_check(PathCurve(t, np.zeros(33), np.zeros(33)), Alpha(0.75), TruncationSpec(4), z=3.0)
        self.assertEqual(report.verdict, Verdict.HOLDS)
        self.assertEqual(report.margin, 0.0)

    def test_cubic_curve_is_violated(self):
        t = np.linspace(0.0, 1.0, 257)
        report = gronwall_violation_check(PathCurve(t, t**3), Alpha(1.0), TruncationSpec(1), z=3.0)
        self.assertEqual(report.constant, 1.0)
        self.assertEqual(report.verdict, Verdict.VIOLATED)
        self.assertLess(report.margin, 0.0)

    def test_noisy_negative_margin_is_inconclusive(self):
        t = np.linspace(0.0, 1.0, 65)
        report = gronwall_violation_check(PathCurve(t, t**3, np.ones(65)), Alpha(1.0), TruncationSpec(1), z=3.0)
        self.assertEqual(report.verdict, Verdict.INCONCLUSIVE)

    def test_constant(self):
        self.assertEqual(gronwall_constant(Alpha(0.75), TruncationSpec(4)), 0.75 * 2.0)

    def _truncation_gap(self, n_pairs):
        alpha, trunc = Alpha(0.75), TruncationSpec(4)
        grid = TimeGrid.uniform(1.0, 256)
        drivers = [sample_driver(grid, 33, k) for k in range(n_pairs)]
        plain = euler_maruyama_batch(Phase(0.0, 1.0), alpha, drivers)
        cut = euler_maruyama_batch(Phase(0.0, 1.0), alpha, drivers, trunc=trunc)
        stop = min(tau_n_pair(p, c, trunc) for p, c in zip(plain, cut))
        return d_statistic(plain, cut).restrict(min(stop, grid.horizon)).values

    def test_truncated_em_matches_untruncated_before_exit(self):
        gap = self._truncation_gap(100)
        self.assertGreater(gap.size, 1)
        assert_array_equal(gap, 0.0)

    @tag("slow")
    def test_truncated_em_matches_untruncated_before_exit_full(self):
        assert_array_equal(self._truncation_gap(1000), 0.0)

    def test_coarse_fine_pair_is_a_real_comparison(self):
        alpha, trunc = Alpha(0.75), TruncationSpec(4)
        coarse_grid = TimeGrid.uniform(1.0, 64)
        fine_grid = TimeGrid.uniform(1.0, 256)
        drivers = [sample_driver(coarse_grid, 33, k) for k in range(100)]
        coarse = euler_maruyama_batch(Phase(0.0, 1.0), alpha, drivers, trunc=trunc)
        fine = euler_maruyama_batch(Phase(0.0, 1.0), alpha, [refine_driver(d, fine_grid, 33) for d in drivers], trunc=trunc)
        fine = [p.at(coarse_grid) for p in fine]
        stop = min(min(tau_n_pair(c, f, trunc) for c, f in zip(coarse, fine)), 1.0)
        curve = d_statistic(coarse, fine).restrict(stop)
        self.assertGreater(curve.values[-1], 0.0)
        report = gronwall_violation_check(curve, alpha, trunc, z=3.0)
        self.assertIn(report.verdict, tuple(Verdict))
        self.assertLessEqual(report.margin, 0.0)
        self.assertEqual(report.n_points, len(curve))


class ResidualTests(SimpleTestCase):

    def test_identical_pairs_have_zero_distance(self):
        grid = TimeGrid.uniform(1.0, 16)
        paths = euler_maruyama_batch(Phase(1.0, 0.0), Alpha(0.5), [sample_driver(grid, 1, k) for k in range(4)])
        self.assertEqual(sup_rms_difference(paths, paths).value, 0.0)

    def test_linear_motion_has_no_ode_residual(self):
        path = euler_maruyama(Phase(1.0, 2.0), Alpha(0.5), DriverPath.zero(TimeGrid.uniform(1.0, 16)))
        self.assertLess(ode_residual(path), 1e-14)

    def test_euler_residual_halves(self):
        residuals = []
        for n_steps in (128, 256, 512):
            grid = TimeGrid.uniform(1.0, n_steps)
            paths = euler_maruyama_batch(Phase(1.0, 0.0), Alpha(0.75), [sample_driver(grid, n_steps, k) for k in range(200)])
            residuals.append(np.mean([ode_residual(p) for p in paths]))
        ratios = np.array(residuals[1:]) / np.array(residuals[:-1])
        self.assertTrue(np.all((ratios > 0.4) & (ratios < 0.6)), ratios)
