# transform/maps.py
import numpy as np
from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _


# below this |x| the logarithm is not trusted
TINY = 1e-300


def _as_output(values, scalar):
    return float(values[()]) if scalar else values


def abs_power(x, q):
    """
    |x|**q computed as exp(q*log|x|).

    Entries with |x| < TINY give 0 for q > 0 and are rejected for q < 0.
    q == 0 gives exactly one everywhere, including at zero.
    """
    arr = np.abs(np.asarray(x, dtype=np.float64))
    if q == 0:
        return np.ones_like(arr)

    tiny = arr < TINY
    if q < 0 and tiny.any():
        raise ValidationError(
            _("Negative power %(q)s of a value below %(tiny)s."),
            code='singular_power',
            params={'q': q, 'tiny': TINY},
        )
    return np.where(tiny, 0.0, np.exp(q * np.log(np.where(tiny, 1.0, arr))))


def h(x, alpha):
    """h(x) = |x|^(2a+1) sgn(x) / (2a+1); the identity at alpha = 0."""
    scalar = np.ndim(x) == 0
    arr = np.asarray(x, dtype=np.float64)
    if alpha.value == 0:
        return _as_output(arr.copy(), scalar)

    q = alpha.exponent_sum
    out = np.sign(arr) * (abs_power(arr, q) / q)
    return _as_output(out, scalar)


def h_inv(v, alpha):
    """Inverse of h: ((2a+1)|v|)^(1/(2a+1)) sgn(v)."""
    scalar = np.ndim(v) == 0
    arr = np.asarray(v, dtype=np.float64)
    if alpha.value == 0:
        return _as_output(arr.copy(), scalar)

    q = alpha.exponent_sum
    out = np.sign(arr) * abs_power(q * arr, 1.0 / q)
    return _as_output(out, scalar)


def clock_integrand(v, alpha):
    """
    Density of the time change, c(alpha) |v|^p(alpha).

    This is also the derivative of h_inv, continuous for alpha in (-1/2, 0].
    """
    alpha.require_construction_range()
    scalar = np.ndim(v) == 0
    arr = np.asarray(v, dtype=np.float64)
    if alpha.value == 0:
        return _as_output(np.ones_like(arr), scalar)

    out = alpha.clock_constant * abs_power(arr, alpha.clock_exponent)
    return _as_output(out, scalar)
