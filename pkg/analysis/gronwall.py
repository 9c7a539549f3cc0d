"""
One-sided statistical check of the Gronwall-type bound

    D_t <= |alpha| 2^(-n(alpha-1)) t^2 int_0^t r^(2 alpha - 2) D_r dr

on a Monte Carlo estimate of D_t.
"""
import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _
from scipy.integrate import cumulative_trapezoid

from transform.maps import abs_power
from .choices import Verdict

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GronwallReport:
    verdict: Verdict
    margin: float
    margin_stderr: float
    t_at_margin: float
    constant: float
    z: float
    n_points: int

    def to_dict(self):
        return {
            'verdict': str(self.verdict),
            'margin': self.margin,
            'margin_stderr': self.margin_stderr,
            't_at_margin': self.t_at_margin,
            'constant': self.constant,
            'z': self.z,
            'n_points': self.n_points,
        }


def gronwall_constant(alpha, trunc):
    return abs(alpha.value) * 2.0 ** (-trunc.n * (alpha.value - 1.0))


def gronwall_violation_check(d_curve, alpha, trunc, z=None, t_max=None):
    """
    Evaluate both sides on the curve's grid and report min_t (RHS - LHS).

    The margin's standard error adds the errors of both sides. The verdict is "violated"
    when some margin is below -z standard errors, "inconclusive" when some margin is
    negative but within that band, and "holds" otherwise.
    """
    z = settings.SDE_TOOLKIT['GRONWALL_Z'] if z is None else z
    curve = d_curve if t_max is None else d_curve.restrict(t_max)
    if len(curve) < 2:
        raise ValidationError(_("The curve needs at least two points before t_max."), code='empty_sample')

    t = curve.times
    lhs = curve.values
    lhs_se = np.zeros_like(lhs) if curve.stderr is None else curve.stderr

    weight = np.zeros_like(t)
    positive = t > 0
    weight[positive] = abs_power(t[positive], 2.0 * alpha.value - 2.0)
    constant = gronwall_constant(alpha, trunc)
    rhs = constant * t**2 * cumulative_trapezoid(weight * lhs, t, initial=0.0)
    rhs_se = constant * t**2 * cumulative_trapezoid(weight * lhs_se, t, initial=0.0)

    margins = rhs - lhs
    stderr = lhs_se + rhs_se
    k = int(np.argmin(margins))
    if np.any(margins < -z * stderr):
        verdict = Verdict.VIOLATED
    elif np.any(margins < 0):
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.HOLDS

    report = GronwallReport(
        verdict=verdict,
        margin=float(margins[k]),
        margin_stderr=float(stderr[k]),
        t_at_margin=float(t[k]),
        constant=constant,
        z=float(z),
        n_points=int(t.size),
    )
    log = logger.info if verdict == Verdict.HOLDS else logger.warning
    log("gronwall bound %s: margin %.3g +/- %.3g at t=%.4g", verdict.value, report.margin, report.margin_stderr, report.t_at_margin)
    return report
