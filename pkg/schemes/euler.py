# schemes/euler.py
import logging

import numpy as np
from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _

from timechange.choices import Scheme
from timechange.paths import SolutionPath
from transform.maps import TINY, abs_power

logger = logging.getLogger(__name__)


def coefficient(x, alpha, floor=0.0):
    """
    Diffusion coefficient |x|^alpha.

    For alpha < 0, |x| is clamped from below at `floor`; with floor 0 a zero argument is
    rejected. alpha = 0 gives exactly one and alpha > 0 gives 0 at x = 0.
    """
    if floor < 0:
        raise ValidationError(_("The coefficient floor must be non-negative."), code='invalid_floor')
    scalar = np.ndim(x) == 0
    arr = np.abs(np.asarray(x, dtype=np.float64))

    if alpha.value == 0:
        out = np.ones_like(arr)
    elif alpha.value > 0:
        out = abs_power(arr, alpha.value)
    else:
        if floor == 0 and np.any(arr < TINY):
            raise ValidationError(
                _("|x|^%(alpha)s is unbounded at x = 0; set a floor or a truncation level."),
                code='unbounded_coefficient',
                params={'alpha': alpha.value},
            )
        out = abs_power(np.maximum(arr, floor), alpha.value)
    return float(out[()]) if scalar else out


def _resolve_floor(alpha, trunc, floor):
    if floor is None:
        floor = trunc.inner if (trunc is not None and alpha.value < 0) else 0.0
    if alpha.value < 0 and floor == 0:
        raise ValidationError(
            _("Euler-Maruyama with alpha < 0 needs a truncation level or a positive floor."),
            code='unbounded_coefficient',
        )
    return floor


def euler_maruyama_batch(phase, alpha, drivers, trunc=None, floor=None):
    """
    Euler-Maruyama for dX = Y dt, dY = |X|^alpha dB, one path per driver.

    Y-steps use 1[t_k <= tau_n]: the step that starts at the first node outside the band is
    still taken, every later Y-step is frozen while X keeps integrating Y.
    """
    if not drivers:
        return []
    grid = drivers[0].grid
    if any(d.grid != grid for d in drivers[1:]):
        raise ValidationError(_("Coupled drivers must share one grid."), code='grid_mismatch')
    floor = _resolve_floor(alpha, trunc, floor)

    dt = grid.steps
    db = np.stack([d.increments() for d in drivers])
    n_paths, n_steps = db.shape

    x = np.empty((n_paths, n_steps + 1))
    y = np.empty((n_paths, n_steps + 1))
    x[:, 0] = phase.x
    y[:, 0] = phase.y
    stopped = np.zeros(n_paths, dtype=bool)

    for k in range(n_steps):
        xk, yk = x[:, k], y[:, k]
        x[:, k + 1] = xk + yk * dt[k]
        moved = yk + coefficient(xk, alpha, floor) * db[:, k]
        if trunc is None:
            y[:, k + 1] = moved
            continue
        y[:, k + 1] = np.where(stopped, yk, moved)
        stopped |= trunc.outside(np.maximum(np.abs(xk), np.abs(yk)))

    if trunc is not None:
        logger.debug("%s of %s paths left the %s band", int(stopped.sum()), n_paths, trunc)
    return [
        SolutionPath(grid, x[i], y[i], alpha, phase, Scheme.EM, seed=d.seed, stream_id=d.stream_id)
        for i, d in enumerate(drivers)
    ]


def euler_maruyama(phase, alpha, driver, trunc=None, floor=None):
    return euler_maruyama_batch(phase, alpha, [driver], trunc=trunc, floor=floor)[0]


def mean_value_violations(a, b, alpha):
    """
    Number of pairs 0 < a < b breaking |b^alpha - a^alpha| <= |alpha| a^(alpha-1) (b - a)
    by more than a few ulps of the powers involved.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if np.any(a <= 0) or np.any(b <= a):
        raise ValidationError(_("Pairs must satisfy 0 < a < b."), code='invalid_pairs')
    pa = abs_power(a, alpha.value)
    pb = abs_power(b, alpha.value)
    lhs = np.abs(pb - pa)
    rhs = abs(alpha.value) * abs_power(a, alpha.value - 1.0) * (b - a)
    slack = 4.0 * np.finfo(np.float64).eps * (pa + pb)
    return int(np.count_nonzero(lhs > rhs + slack))
