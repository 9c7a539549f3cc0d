from dataclasses import dataclass, field

import numpy as np
from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _


@dataclass(frozen=True, eq=False)
class PathCurve:
    """A statistic sampled on grid times, read between nodes by linear interpolation."""

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    stderr: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        for name in ('times', 'values', 'stderr'):
            values = getattr(self, name)
            if values is not None:
                object.__setattr__(self, name, np.asarray(values, dtype=np.float64))
        if self.values.shape != self.times.shape or (self.stderr is not None and self.stderr.shape != self.times.shape):
            raise ValidationError(_("Curve arrays must have matching shapes."), code='grid_mismatch')

    def __call__(self, t):
        value = np.interp(t, self.times, self.values)
        stderr = None if self.stderr is None else np.interp(t, self.times, self.stderr)
        if np.ndim(t) == 0:
            return float(value), (None if stderr is None else float(stderr))
        return value, stderr

    def __len__(self):
        return self.times.size

    def restrict(self, t_max):
        keep = self.times <= t_max
        return PathCurve(
            self.times[keep], self.values[keep], None if self.stderr is None else self.stderr[keep],
        )

    def to_dict(self):
        return {
            't': self.times.tolist(),
            'value': self.values.tolist(),
            'stderr': None if self.stderr is None else self.stderr.tolist(),
        }
