import math
from dataclasses import dataclass

from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _


@dataclass(frozen=True)
class TruncationSpec:
    """The band [2^-n, 2^n] of l-infinity norms inside which the coefficient is left alone."""

    n: int

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ValidationError(
                _("Truncation level must be a positive integer, got %(n)s."),
                code='invalid_truncation',
                params={'n': self.n},
            )
        object.__setattr__(self, 'n', int(self.n))

    def __str__(self):
        return f"n={self.n}"

    @property
    def inner(self):
        return math.ldexp(1.0, -self.n)

    @property
    def outer(self):
        return math.ldexp(1.0, self.n)

    def outside(self, norms):
        """True where a norm has left the open band, i.e. <= inner or >= outer."""
        return (norms <= self.inner) | (norms >= self.outer)
