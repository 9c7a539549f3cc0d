# driver/sampling.py
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _

from .grid import TimeGrid
from .streams import BRIDGE_DOMAIN, DRIVER_DOMAIN, normal_rows

logger = logging.getLogger(__name__)


SQRT_12 = math.sqrt(12.0)


@dataclass(frozen=True, eq=False)
class DriverPath:
    """
    Brownian motion b and its running integral ib, sampled jointly on a grid.
    """

    grid: TimeGrid
    b: np.ndarray = field(repr=False)
    ib: np.ndarray = field(repr=False)
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        n = len(self.grid)
        for name in ('b', 'ib'):
            values = np.asarray(getattr(self, name), dtype=np.float64)
            if values.shape != (n,):
                raise ValidationError(
                    _("%(name)s has %(got)s values for a grid of %(n)s points."),
                    code='invalid_driver',
                    params={'name': name, 'got': values.shape, 'n': n},
                )
            if values[0] != 0.0:
                raise ValidationError(_("Driver paths start at 0."), code='invalid_driver')
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    @classmethod
    def zero(cls, grid, seed=0, stream_id=0):
        """Zero-noise driver for deterministic runs."""
        zeros = np.zeros(len(grid))
        return cls(grid, zeros, zeros.copy(), seed, stream_id)

    def increments(self):
        return np.diff(self.b)


def _accumulate(start, increments):
    # sequential sum from `start`; extending a path reproduces the prefix bit for bit
    return np.cumsum(np.concatenate(([start], increments)))


def joint_increments(steps, normals):
    """
    Map standard normals (one row of two per step) to the pair (dB, dI - B*dt).

    The pair has covariance [[dt, dt^2/2], [dt^2/2, dt^3/3]]; its Cholesky factor is
    [[sqrt(dt), 0], [dt^1.5/2, dt^1.5/sqrt(12)]]. A zero-length step maps to (0, 0).
    """
    steps = np.asarray(steps, dtype=np.float64)
    root = np.sqrt(steps)
    cube_root = steps * root
    z1 = normals[:, 0]
    z2 = normals[:, 1]
    db = root * z1
    rest = cube_root * (0.5 * z1 + z2 / SQRT_12)
    return db, rest


def _integrate(b_start, ib_start, steps, db, rest):
    b = _accumulate(b_start, db)
    ib = _accumulate(ib_start, b[:-1] * steps + rest)
    return b, ib


def sample_driver(grid, seed, stream_id):
    """Exact joint sample of (B, integral of B) on `grid`, determined by (seed, stream_id, grid)."""
    steps = grid.steps
    normals = normal_rows(seed, stream_id, 0, steps.size, domain=DRIVER_DOMAIN)
    db, rest = joint_increments(steps, normals)
    b, ib = _integrate(0.0, 0.0, steps, db, rest)
    return DriverPath(grid, b, ib, int(seed), int(stream_id))


def extend_driver(path, grid):
    """
    Continue `path` forward onto `grid`, which must start with `path.grid`.
    The past is kept, never re-drawn.
    """
    if not path.grid.is_prefix_of(grid):
        raise ValidationError(_("The new grid must extend the old one."), code='not_extension')
    old_steps = path.grid.n_steps
    if grid.n_steps == old_steps:
        return path

    steps = grid.steps[old_steps:]
    normals = normal_rows(path.seed, path.stream_id, old_steps, steps.size, domain=DRIVER_DOMAIN)
    db, rest = joint_increments(steps, normals)
    b_tail, ib_tail = _integrate(path.b[-1], path.ib[-1], steps, db, rest)
    logger.debug("extended stream %s from %s to %s steps", path.stream_id, old_steps, grid.n_steps)
    return DriverPath(
        grid,
        np.concatenate((path.b, b_tail[1:])),
        np.concatenate((path.ib, ib_tail[1:])),
        path.seed,
        path.stream_id,
    )


def refine_driver(path, new_grid, seed):
    """
    Insert the points of `new_grid` missing from `path.grid`.

    Inside every old interval [t_l, t_r] a fresh Brownian motion W is pinned to the known
    endpoints: b(s) = b_l + W(s) - f*W(t_r) + f*(b_r - b_l) with f = (s - t_l)/(t_r - t_l),
    which is the Brownian bridge law. The integral at a new point is the old integral at t_l
    plus the trapezoid rule over the refined b, so it carries an O(dt^1.5) local bias.
    Values at old nodes are kept exactly.
    """
    old = path.grid
    if not old.is_subset_of(new_grid) or old.horizon != new_grid.horizon:
        raise ValidationError(
            _("The new grid must contain every point of the old grid and end at the same time."),
            code='not_refinement',
        )
    if len(new_grid) == len(old):
        return path

    times = new_grid.times
    old_idx = np.searchsorted(times, old.times)
    is_old = np.zeros(times.size, dtype=bool)
    is_old[old_idx] = True
    new_idx = np.flatnonzero(~is_old)

    # enclosing old nodes of every inserted point, as positions on the new grid
    right_old = np.searchsorted(old.times, times[new_idx])
    left = old_idx[right_old - 1]
    right = old_idx[right_old]

    normals = normal_rows(seed, path.stream_id, 0, new_grid.n_steps, width=1, domain=BRIDGE_DOMAIN)[:, 0]
    w = _accumulate(0.0, np.sqrt(new_grid.steps) * normals)
    frac = (times[new_idx] - times[left]) / (times[right] - times[left])
    b_left = path.b[right_old - 1]
    b_right = path.b[right_old]

    b = np.empty(times.size)
    b[old_idx] = path.b
    b[new_idx] = b_left + (w[new_idx] - w[left]) - frac * (w[right] - w[left]) + frac * (b_right - b_left)

    trapezoid = _accumulate(0.0, 0.5 * (b[1:] + b[:-1]) * new_grid.steps)
    ib = np.empty(times.size)
    ib[old_idx] = path.ib
    ib[new_idx] = path.ib[right_old - 1] + (trapezoid[new_idx] - trapezoid[left])

    logger.debug("refined stream %s from %s to %s points", path.stream_id, len(old), len(new_grid))
    return DriverPath(new_grid, b, ib, path.seed, path.stream_id)
