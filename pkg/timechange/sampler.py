# timechange/sampler.py
import logging
import math

import numpy as np
from django.conf import settings
from django.utils.translation import gettext_lazy as _

from driver.grid import TimeGrid
from driver.sampling import DriverPath, extend_driver, refine_driver, sample_driver
from transform.maps import h, h_inv
from .choices import Interpolation, Scheme
from .clock import compute_clock, invert_clock
from .exceptions import HorizonExceededError
from .paths import SolutionPath

logger = logging.getLogger(__name__)

CAP_MESSAGE = _("The clock needs more than %(cap)s s-steps to reach t = %(t)s.")


def build_v(phase, alpha, driver):
    """V(s) = h(x0) + y0*s + integral of B up to s; Y(s) = y0 + B(s) is left implicit."""
    return h(phase.x, alpha) + phase.y * driver.grid.times + driver.ib


def _toolkit(name, value):
    return settings.SDE_TOOLKIT[name] if value is None else value


def _driver_on(grid, seed, stream_id, previous, zero_noise):
    if zero_noise:
        return DriverPath.zero(grid, seed, stream_id)
    if previous is None:
        return sample_driver(grid, seed, stream_id)
    return extend_driver(previous, grid)


def _evaluate_at(driver, phase, alpha, tau, interpolation, seed):
    """V and B at the inverted clock times."""
    if interpolation == Interpolation.LINEAR:
        s = driver.grid.times
        return np.interp(tau, s, build_v(phase, alpha, driver)), np.interp(tau, s, driver.b)

    refined_grid = TimeGrid(np.union1d(driver.grid.times, tau))
    refined = refine_driver(driver, refined_grid, seed)
    at = np.searchsorted(refined_grid.times, tau)
    return build_v(phase, alpha, refined)[at], refined.b[at]


def sample_weak_solution(
    phase,
    alpha,
    t_grid,
    seed,
    stream_id,
    *,
    interpolation=None,
    oversample=None,
    max_steps=None,
    zero_noise=False,
):
    """
    Weak solution X_t = h_inv(V at T^-1(t)), Y_t = y0 + B at T^-1(t) on `t_grid`.

    The s-grid has step (smallest t-step) / oversample and doubles in length, extending the
    driver forward, until the clock reaches the end of `t_grid`. At alpha = 0 the clock is the
    identity and the s-grid is `t_grid` itself.

    Raises HorizonExceededError once the s-grid would need more than `max_steps` steps.
    """
    phase.require_off_origin()
    alpha.require_construction_range()
    interpolation = Interpolation(_toolkit('CLOCK_INTERPOLATION', interpolation))
    oversample = _toolkit('CLOCK_OVERSAMPLE', oversample)
    max_steps = _toolkit('MAX_CLOCK_STEPS', max_steps)
    t_max = t_grid.horizon

    if alpha.value == 0:
        driver = _driver_on(t_grid, seed, stream_id, None, zero_noise)
        clock = compute_clock(None, t_grid, alpha)
        v = build_v(phase, alpha, driver)
        tau = invert_clock(clock, t_grid.times)
        x, y = h_inv(v, alpha), phase.y + driver.b
    else:
        ds = float(t_grid.steps.min()) / oversample
        n_steps = math.ceil(t_max / ds)
        driver = None
        while True:
            if n_steps > max_steps:
                raise HorizonExceededError(CAP_MESSAGE, params={"cap": max_steps, "t": t_max})
            driver = _driver_on(TimeGrid.regular(ds, n_steps), seed, stream_id, driver, zero_noise)
            clock = compute_clock(build_v(phase, alpha, driver), driver.grid, alpha)
            if clock.reach >= t_max:
                break
            logger.debug("stream %s: clock reached %.4g of %.4g, doubling to %s s-steps",
                         stream_id, clock.reach, t_max, 2 * n_steps)
            n_steps = n_steps + 1 if n_steps >= max_steps else min(2 * n_steps, max_steps)

        tau = invert_clock(clock, t_grid.times)
        v_tau, b_tau = _evaluate_at(driver, phase, alpha, tau, interpolation, seed)
        x, y = h_inv(v_tau, alpha), phase.y + b_tau
        # h_inv(h(x0)) is x0 only up to rounding
        x[0] = phase.x

    return SolutionPath(
        t_grid, x, y, alpha, phase, Scheme.TIMECHANGE, seed=int(seed), stream_id=int(stream_id), clock=tau,
    )
