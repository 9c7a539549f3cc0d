# timechange/paths.py
from dataclasses import dataclass, field

import numpy as np
from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _

from driver.grid import TimeGrid
from transform.domain import Alpha, Phase
from .choices import Scheme


@dataclass(frozen=True, eq=False)
class SolutionPath:
    """
    Values of (X, Y) on a grid, with what produced them.

    `clock` holds the inverse-clock values at the grid times for the time-change sampler
    and is None for Euler-Maruyama paths.
    """

    grid: TimeGrid
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    alpha: Alpha
    initial: Phase
    scheme: Scheme
    seed: int = 0
    stream_id: int = 0
    clock: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.grid)
        for name in ('x', 'y', 'clock'):
            values = getattr(self, name)
            if values is None:
                continue
            values = np.array(values, dtype=np.float64)
            if values.shape != (n,):
                raise ValidationError(
                    _("%(name)s has shape %(got)s, expected (%(n)s,)."),
                    code='grid_mismatch',
                    params={'name': name, 'got': values.shape, 'n': n},
                )
            values.setflags(write=False)
            object.__setattr__(self, name, values)
        if self.x[0] != self.initial.x or self.y[0] != self.initial.y:
            raise ValidationError(_("Path does not start at its initial point."), code='invalid_path')
        object.__setattr__(self, 'scheme', Scheme(self.scheme))

    def __str__(self):
        return f"{self.scheme.label} path from {self.initial}, {self.alpha}, stream {self.stream_id}"

    @property
    def times(self):
        return self.grid.times

    @property
    def horizon(self):
        return self.grid.horizon

    def norms(self):
        """Pointwise l-infinity norm |x| v |y|."""
        return np.maximum(np.abs(self.x), np.abs(self.y))

    def at(self, grid):
        """The same path read only at the nodes of a coarser grid."""
        if not grid.is_subset_of(self.grid):
            raise ValidationError(_("Grid is not a subset of the path grid."), code='grid_mismatch')
        idx = np.searchsorted(self.grid.times, grid.times)
        clock = None if self.clock is None else self.clock[idx]
        return SolutionPath(
            grid, self.x[idx], self.y[idx], self.alpha, self.initial, self.scheme,
            seed=self.seed, stream_id=self.stream_id, clock=clock,
        )
