import math

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase, tag
from numpy.testing import assert_allclose, assert_array_equal
from scipy.integrate import cumulative_trapezoid

from analysis.statistics import ks_two_sample
from .grid import TimeGrid
from .sampling import DriverPath, extend_driver, joint_increments, refine_driver, sample_driver
from .streams import BLOCK_ROWS, normal_rows


def _unit_paths(n_paths, seed=11):
    grid = TimeGrid.uniform(1.0, 1)
    return [sample_driver(grid, seed, k) for k in range(n_paths)]


class TimeGridTests(SimpleTestCase):

    def test_rejects_bad_grids(self):
        for times in ([0.0], [0.5, 1.0], [0.0, 1.0, 1.0], [0.0, 2.0, 1.0], [0.0, np.inf]):
            with self.subTest(times=times):
                with self.assertRaises(ValidationError) as ctx:
                    TimeGrid(times)
                self.assertEqual(ctx.exception.code, 'invalid_grid')

    def test_uniform_ends_at_horizon(self):
        grid = TimeGrid.uniform(3.0, 7)
        self.assertEqual(len(grid), 8)
        self.assertEqual(grid.horizon, 3.0)

    def test_regular_grids_extend_exactly(self):
        short = TimeGrid.regular(0.1, 10)
        long = TimeGrid.regular(0.1, 25)
        self.assertTrue(short.is_prefix_of(long))
        self.assertFalse(long.is_prefix_of(short))

    def test_subset(self):
        coarse = TimeGrid.uniform(1.0, 4)
        self.assertTrue(coarse.is_subset_of(TimeGrid.uniform(1.0, 16)))
        self.assertFalse(coarse.is_subset_of(TimeGrid.uniform(1.0, 3)))

    def test_times_are_read_only(self):
        grid = TimeGrid.uniform(1.0, 4)
        with self.assertRaises(ValueError):
            grid.times[1] = 0.3


class StreamTests(SimpleTestCase):

    def test_split_reads_match_one_read(self):
        whole = normal_rows(5, 9, 0, 2 * BLOCK_ROWS + 17)
        first = normal_rows(5, 9, 0, BLOCK_ROWS - 3)
        second = normal_rows(5, 9, BLOCK_ROWS - 3, BLOCK_ROWS + 20)
        assert_array_equal(np.vstack((first, second)), whole)

    def test_streams_differ(self):
        self.assertFalse(np.array_equal(normal_rows(5, 1, 0, 4), normal_rows(5, 2, 0, 4)))

    def test_negative_seed_rejected(self):
        with self.assertRaises(ValidationError) as ctx:
            normal_rows(-1, 0, 0, 1)
        self.assertEqual(ctx.exception.code, 'invalid_seed')


class JointIncrementTests(SimpleTestCase):

    def test_zero_step_gives_zero_pair(self):
        db, rest = joint_increments(np.array([0.0]), np.array([[1.3, -0.7]]))
        self.assertEqual(db[0], 0.0)
        self.assertEqual(rest[0], 0.0)

    def test_factor_reproduces_covariance(self):
        dt = 0.37
        # images of the unit vectors are the columns of the Cholesky factor
        db, rest = joint_increments(np.full(2, dt), np.eye(2))
        factor = np.array([[db[0], db[1]], [rest[0], rest[1]]])
        expected = np.array([[dt, dt**2 / 2], [dt**2 / 2, dt**3 / 3]])
        assert_allclose(factor @ factor.T, expected, rtol=1e-14)


class SampleDriverTests(SimpleTestCase):

    def test_starts_at_zero_and_matches_grid(self):
        grid = TimeGrid.uniform(2.0, 50)
        path = sample_driver(grid, 3, 4)
        self.assertEqual(path.b.shape, (51,))
        self.assertEqual(path.b[0], 0.0)
        self.assertEqual(path.ib[0], 0.0)

    def test_deterministic(self):
        grid = TimeGrid.uniform(1.0, 100)
        first = sample_driver(grid, 42, 7)
        second = sample_driver(grid, 42, 7)
        assert_array_equal(first.b, second.b)
        assert_array_equal(first.ib, second.ib)

    def test_stream_changes_path(self):
        grid = TimeGrid.uniform(1.0, 10)
        self.assertFalse(np.array_equal(sample_driver(grid, 42, 7).b, sample_driver(grid, 42, 8).b))

    def test_zero_driver(self):
        path = DriverPath.zero(TimeGrid.uniform(1.0, 5))
        assert_array_equal(path.increments(), np.zeros(5))
        assert_array_equal(path.ib, np.zeros(6))

    def _assert_unit_covariance(self, n_paths, z):
        paths = _unit_paths(n_paths)
        b = np.array([p.b[-1] for p in paths])
        ib = np.array([p.ib[-1] for p in paths])
        for products, expected in ((b * b, 1.0), (b * ib, 0.5), (ib * ib, 1.0 / 3.0)):
            stderr = products.std(ddof=1) / math.sqrt(n_paths)
            self.assertLess(abs(products.mean() - expected), z * stderr)

    def test_unit_covariance(self):
        self._assert_unit_covariance(4000, z=4.0)

    @tag("slow")
    def test_unit_covariance_full(self):
        self._assert_unit_covariance(100_000, z=3.0)

    def test_covariance_matches_fine_trapezoid(self):
        # closed form against a brute-force integral of finely sampled b
        n_paths = 2000
        grid = TimeGrid.uniform(1.0, 256)
        ib = np.array([cumulative_trapezoid(sample_driver(grid, 5, k).b, grid.times)[-1] for k in range(n_paths)])
        stderr = (ib * ib).std(ddof=1) / math.sqrt(n_paths)
        self.assertLess(abs((ib * ib).mean() - 1.0 / 3.0), 4.0 * stderr)

    def _assert_independent_increments(self, n_paths, z):
        grid = TimeGrid.uniform(1.0, 2)
        inc = np.array([np.diff(sample_driver(grid, 8, k).b) for k in range(n_paths)])
        corr = np.corrcoef(inc[:, 0], inc[:, 1])[0, 1]
        self.assertLess(abs(corr), z / math.sqrt(n_paths))

    def test_disjoint_increments_uncorrelated(self):
        self._assert_independent_increments(4000, z=4.0)

    @tag("slow")
    def test_disjoint_increments_uncorrelated_full(self):
        self._assert_independent_increments(100_000, z=3.0)

    @tag("slow")
    def test_brownian_scaling(self):
        n_paths = 10_000
        base = TimeGrid.uniform(1.0, 8)
        stretched = base.scaled(4.0)
        left = np.sort([2.0 * sample_driver(base, 21, k).b[5] for k in range(n_paths)])
        right = np.sort([sample_driver(stretched, 22, k).b[5] for k in range(n_paths)])
        _, p_value = ks_two_sample(left, right)
        self.assertGreater(p_value, 1e-3)


class ExtendDriverTests(SimpleTestCase):

    def test_extension_equals_full_sample(self):
        full_grid = TimeGrid.regular(1e-3, BLOCK_ROWS + 500)
        short = sample_driver(TimeGrid.regular(1e-3, 700), 13, 2)
        extended = extend_driver(short, full_grid)
        full = sample_driver(full_grid, 13, 2)
        assert_array_equal(extended.b, full.b)
        assert_array_equal(extended.ib, full.ib)

    def test_same_grid_is_noop(self):
        path = sample_driver(TimeGrid.regular(0.5, 4), 1, 1)
        self.assertIs(extend_driver(path, TimeGrid.regular(0.5, 4)), path)

    def test_non_prefix_rejected(self):
        path = sample_driver(TimeGrid.regular(0.5, 4), 1, 1)
        with self.assertRaises(ValidationError) as ctx:
            extend_driver(path, TimeGrid.regular(0.25, 16))
        self.assertEqual(ctx.exception.code, 'not_extension')


class RefineDriverTests(SimpleTestCase):

    def test_same_grid_returns_input(self):
        grid = TimeGrid.uniform(1.0, 8)
        path = sample_driver(grid, 1, 2)
        self.assertIs(refine_driver(path, TimeGrid.uniform(1.0, 8), seed=3), path)

    def test_keeps_old_nodes(self):
        coarse = TimeGrid.uniform(1.0, 8)
        fine = TimeGrid.uniform(1.0, 64)
        path = sample_driver(coarse, 1, 2)
        refined = refine_driver(path, fine, seed=3)
        idx = np.searchsorted(fine.times, coarse.times)
        assert_array_equal(refined.b[idx], path.b)
        assert_array_equal(refined.ib[idx], path.ib)

    def test_not_a_refinement(self):
        path = sample_driver(TimeGrid.uniform(1.0, 4), 1, 2)
        for grid in (TimeGrid.uniform(1.0, 6), TimeGrid.uniform(2.0, 8)):
            with self.subTest(horizon=grid.horizon, n=grid.n_steps):
                with self.assertRaises(ValidationError) as ctx:
                    refine_driver(path, grid, seed=3)
                self.assertEqual(ctx.exception.code, 'not_refinement')

    def _assert_midpoint_law(self, n_paths, z):
        half = TimeGrid([0.0, 0.5, 1.0])
        residual = np.empty(n_paths)
        for k, path in enumerate(_unit_paths(n_paths, seed=17)):
            refined = refine_driver(path, half, seed=23)
            residual[k] = refined.b[1] - 0.5 * (path.b[0] + path.b[-1])
        stderr = residual.std(ddof=1) / math.sqrt(n_paths)
        self.assertLess(abs(residual.mean()), z * stderr)
        squares = residual**2
        self.assertLess(abs(squares.mean() - 0.25), z * squares.std(ddof=1) / math.sqrt(n_paths))

    def test_midpoint_bridge_law(self):
        self._assert_midpoint_law(4000, z=4.0)

    @tag("slow")
    def test_midpoint_bridge_law_full(self):
        self._assert_midpoint_law(100_000, z=3.0)

    def test_refined_increments_have_fine_variance(self):
        n_paths = 3000
        coarse = TimeGrid.uniform(1.0, 2)
        fine = TimeGrid.uniform(1.0, 8)
        first = np.array([refine_driver(sample_driver(coarse, 4, k), fine, seed=9).b[1] for k in range(n_paths)])
        squares = first**2
        stderr = squares.std(ddof=1) / math.sqrt(n_paths)
        self.assertLess(abs(squares.mean() - 0.125), 4.0 * stderr)

    def test_integral_error_scales_with_step_to_three_halves(self):
        n_paths = 200
        steps = (1.0, 0.25, 0.0625)
        rms = []
        for dt in steps:
            coarse = TimeGrid.uniform(dt, 1)
            fine = TimeGrid.uniform(dt, 2**10)
            errors = np.empty(n_paths)
            for k in range(n_paths):
                path = refine_driver(sample_driver(coarse, 31, k), fine, seed=37)
                errors[k] = cumulative_trapezoid(path.b, fine.times)[-1] - path.ib[-1]
            rms.append(math.sqrt(np.mean(errors**2)))
        slope = np.polyfit(np.log(steps), np.log(rms), 1)[0]
        self.assertGreater(slope, 1.3)
        self.assertLess(slope, 1.7)
