"""
The random clock of the time-change construction and its generalized inverse.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _
from scipy.integrate import cumulative_trapezoid

from driver.grid import TimeGrid
from transform.maps import clock_integrand
from .exceptions import HorizonExceededError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ClockPath:
    """T(s) at the nodes of an s-grid; identity clocks map s to itself exactly."""

    grid: TimeGrid
    t_values: np.ndarray = field(repr=False)
    is_identity: bool = False

    def __post_init__(self):
        values = np.array(self.t_values, dtype=np.float64)
        if values.shape != (len(self.grid),):
            raise ValidationError(_("Clock values do not match the s-grid."), code='grid_mismatch')
        if values[0] != 0.0 or np.any(np.diff(values) < 0.0):
            raise ValidationError(_("A clock starts at 0 and never decreases."), code='invalid_clock')
        values.setflags(write=False)
        object.__setattr__(self, 't_values', values)

    @property
    def reach(self):
        """Largest t the clock covers."""
        return float(self.t_values[-1])


def compute_clock(v, grid, alpha):
    """T(s_k) by the composite trapezoid rule over c(alpha)|v|^p(alpha)."""
    alpha.require_construction_range()
    if alpha.value == 0:
        return ClockPath(grid, grid.times, is_identity=True)
    integrand = clock_integrand(np.asarray(v, dtype=np.float64), alpha)
    return ClockPath(grid, cumulative_trapezoid(integrand, grid.times, initial=0.0))


def _check_reach(clock, t):
    if t.size and t.min() < 0.0:
        raise ValidationError(_("Clock times are non-negative."), code='invalid_query')
    if t.size and t.max() > clock.reach:
        raise HorizonExceededError(params={'t': float(t.max())})


def invert_clock(clock, t_query):
    """
    Generalized inverse inf{s : T(s) > t} of the piecewise-linear clock.

    On a flat stretch of T the inverse jumps from its left end to its right end, so the
    result is right-continuous. t equal to the reach of the clock maps to the last node.
    """
    t = np.asarray(t_query, dtype=np.float64)
    _check_reach(clock, t)
    if clock.is_identity:
        return t.copy()

    s = clock.grid.times
    values = clock.t_values
    k = np.searchsorted(values, t, side='right')
    inside = k < values.size

    out = np.full(t.shape, s[-1])
    k_in = k[inside]
    lower = values[k_in - 1]
    rise = values[k_in] - lower
    out[inside] = s[k_in - 1] + (t[inside] - lower) / rise * (s[k_in] - s[k_in - 1])
    return out


def compose_clock(clock, s_query):
    """T at arbitrary s inside the grid, linear between nodes."""
    s = np.asarray(s_query, dtype=np.float64)
    if s.size and (s.min() < 0.0 or s.max() > clock.grid.horizon):
        raise HorizonExceededError(
            _("s = %(t)s lies outside the simulated s-grid."), params={'t': float(np.max(s))}
        )
    if clock.is_identity:
        return s.copy()
    return np.interp(s, clock.grid.times, clock.t_values)
