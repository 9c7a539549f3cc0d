# driver/grid.py
from dataclasses import dataclass, field

import numpy as np
from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """
    Strictly increasing sampling times starting at 0.
    """

    times: np.ndarray = field(repr=False)

    def __post_init__(self):
        times = np.array(self.times, dtype=np.float64)
        if times.ndim != 1 or times.size < 2:
            raise ValidationError(_("A time grid needs at least two points."), code='invalid_grid')
        if not np.all(np.isfinite(times)):
            raise ValidationError(_("Grid times must be finite."), code='invalid_grid')
        if times[0] != 0.0:
            raise ValidationError(_("A time grid must start at 0."), code='invalid_grid')
        if np.any(np.diff(times) <= 0.0):
            raise ValidationError(_("Grid times must be strictly increasing."), code='invalid_grid')
        times.setflags(write=False)
        object.__setattr__(self, 'times', times)

    @classmethod
    def uniform(cls, horizon, n_steps):
        """n_steps equal steps on [0, horizon]; the last point is exactly the horizon."""
        if n_steps < 1 or not horizon > 0:
            raise ValidationError(_("Uniform grids need horizon > 0 and n_steps >= 1."), code='invalid_grid')
        return cls(np.linspace(0.0, float(horizon), int(n_steps) + 1))

    @classmethod
    def regular(cls, step, n_steps):
        """Points k*step; a longer regular grid with the same step extends this one exactly."""
        if n_steps < 1 or not step > 0:
            raise ValidationError(_("Regular grids need step > 0 and n_steps >= 1."), code='invalid_grid')
        return cls(np.arange(int(n_steps) + 1, dtype=np.float64) * float(step))

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return self.times.size == other.times.size and bool(np.all(self.times == other.times))

    __hash__ = None

    @property
    def horizon(self):
        return float(self.times[-1])

    @property
    def steps(self):
        return np.diff(self.times)

    @property
    def n_steps(self):
        return self.times.size - 1

    def is_prefix_of(self, other):
        n = self.times.size
        return other.times.size >= n and bool(np.all(other.times[:n] == self.times))

    def is_subset_of(self, other):
        idx = np.searchsorted(other.times, self.times)
        if np.any(idx >= other.times.size):
            return False
        return bool(np.all(other.times[idx] == self.times))

    def scaled(self, factor):
        return TimeGrid(self.times * float(factor))
