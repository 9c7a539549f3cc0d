# transform/domain.py
import math
from dataclasses import dataclass

from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _


ALPHA_LOWER = -0.5


@dataclass(frozen=True)
class Alpha:
    """
    Exponent of the diffusion coefficient |x|^alpha.
    Admissible for alpha > -1/2; the time-change construction covers (-1/2, 0].
    """

    value: float

    def __post_init__(self):
        value = float(self.value)
        if not math.isfinite(value) or value <= ALPHA_LOWER:
            raise ValidationError(
                _("alpha must be a finite number greater than -1/2, got %(value)s."),
                code='alpha_range',
                params={'value': self.value},
            )
        object.__setattr__(self, 'value', value)

    def __str__(self):
        return f"alpha={self.value:g}"

    @property
    def exponent_sum(self):
        return 2.0 * self.value + 1.0

    @property
    def clock_exponent(self):
        """p(alpha) = -2 alpha / (2 alpha + 1), non-negative on the construction range."""
        if self.value == 0:
            return 0.0
        return -2.0 * self.value / self.exponent_sum

    @property
    def clock_constant(self):
        """c(alpha) = (2 alpha + 1)^p(alpha)."""
        if self.value == 0:
            return 1.0
        return math.exp(self.clock_exponent * math.log(self.exponent_sum))

    @property
    def in_construction_range(self):
        return ALPHA_LOWER < self.value <= 0.0

    def require_construction_range(self):
        if not self.in_construction_range:
            raise ValidationError(
                _("The time-change construction needs alpha in (-1/2, 0], got %(value)s."),
                code='alpha_range',
                params={'value': self.value},
            )


@dataclass(frozen=True)
class Phase:
    """Position/velocity pair (x, y)."""

    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, 'x', float(self.x))
        object.__setattr__(self, 'y', float(self.y))
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValidationError(_("Initial data must be finite."), code='invalid_phase')

    def __str__(self):
        return f"({self.x:g}, {self.y:g})"

    @property
    def norm(self):
        return max(abs(self.x), abs(self.y))

    @property
    def is_origin(self):
        return self.x == 0.0 and self.y == 0.0

    def require_off_origin(self):
        # uniqueness and origin avoidance are only claimed away from (0, 0)
        if self.is_origin:
            raise ValidationError(
                _("Initial data (0, 0) is excluded: solutions from the origin are not unique."),
                code='origin',
            )
