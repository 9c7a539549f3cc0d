# analysis/statistics.py
import math

import numpy as np
from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _
from scipy.integrate import cumulative_trapezoid
from scipy.special import kolmogorov

from .curves import PathCurve
from .summary import Estimate, McSummary


def _coupled_pairs(paths1, paths2):
    if not paths1 or len(paths1) != len(paths2):
        raise ValidationError(_("Need two non-empty path collections of equal size."), code='empty_sample')
    for p1, p2 in zip(paths1, paths2):
        if (p1.seed, p1.stream_id) != (p2.seed, p2.stream_id):
            raise ValidationError(
                _("Paths %(a)s and %(b)s are not driven by the same noise."),
                code='not_coupled',
                params={'a': p1.stream_id, 'b': p2.stream_id},
            )


def _mean_and_stderr(samples):
    n = samples.shape[0]
    mean = samples.mean(axis=0)
    stderr = samples.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else None
    return mean, stderr


def d_statistic(paths1, paths2):
    """D_t: mean over coupled pairs of (X1_t - X2_t)^2, with standard errors."""
    _coupled_pairs(paths1, paths2)
    grid = paths1[0].grid
    if any(p.grid != grid for p in (*paths1, *paths2)):
        raise ValidationError(_("All paths must share one grid."), code='grid_mismatch')
    diff = np.stack([p1.x - p2.x for p1, p2 in zip(paths1, paths2)])
    mean, stderr = _mean_and_stderr(diff * diff)
    return PathCurve(grid.times, mean, stderr)


def v_statistic(d_curve):
    """V_t = D_t / t^2 for t > 0."""
    keep = d_curve.times > 0
    t2 = d_curve.times[keep] ** 2
    stderr = None if d_curve.stderr is None else d_curve.stderr[keep] / t2
    return PathCurve(d_curve.times[keep], d_curve.values[keep] / t2, stderr)


def gronwall_envelope(v0, c_n, alpha, t):
    """V_0 exp(C_n t^(2a+1) / (2a+1)); with V_0 = 0 it pins V to zero."""
    q = alpha.exponent_sum
    return v0 * np.exp(c_n * np.power(np.asarray(t, dtype=np.float64), q) / q)


def small_time_slope(path, at=None):
    """
    (X_t - x0) / t at the first positive grid time, or at the first node >= `at`.
    For x0 = 0 this is X_t / t, which tends to y0.
    """
    t = path.times
    k = 1 if at is None else max(1, int(np.searchsorted(t, at)))
    if k >= t.size:
        raise ValidationError(_("No grid time at or after %(t)s."), code='invalid_query', params={'t': at})
    return float((path.x[k] - path.x[0]) / t[k])


def realized_qv(y, grid):
    """Running sum of squared increments of y."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (len(grid),):
        raise ValidationError(_("y does not match the grid."), code='grid_mismatch')
    return PathCurve(grid.times, np.concatenate(([0.0], np.cumsum(np.diff(y) ** 2))))


def ks_two_sample(a, b):
    """
    Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value, with the usual
    small-sample scaling (sqrt(n_e) + 0.12 + 0.11/sqrt(n_e)) of the statistic.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValidationError(_("Both samples must be non-empty."), code='empty_sample')
    pooled = np.concatenate((a, b))
    cdf_a = np.searchsorted(a, pooled, side='right') / a.size
    cdf_b = np.searchsorted(b, pooled, side='right') / b.size
    statistic = float(np.max(np.abs(cdf_a - cdf_b)))
    root = math.sqrt(a.size * b.size / (a.size + b.size))
    p_value = float(kolmogorov((root + 0.12 + 0.11 / root) * statistic))
    return statistic, min(1.0, p_value)


def origin_proximity(paths, epsilons):
    """Fraction of paths whose smallest l-infinity norm falls below each epsilon."""
    if not paths:
        raise ValidationError(_("No paths to summarise."), code='empty_sample')
    closest = np.array([p.norms().min() for p in paths])
    samples = {f"below_{eps:g}": (closest < eps).astype(np.float64) for eps in epsilons}
    samples['min_norm'] = closest
    return McSummary.from_samples(samples, cdfs=('min_norm',))


def sup_rms_difference(coarse, fine):
    """
    RMS over coupled pairs of max_k |X_coarse(t_k) - X_fine(t_k)| on the coarse nodes.
    The standard error is carried from the mean square by the delta method.
    """
    _coupled_pairs(coarse, fine)
    sups = np.array([np.max(np.abs(c.x - f.at(c.grid).x)) for c, f in zip(coarse, fine)])
    mean_square, stderr = _mean_and_stderr(sups * sups)
    rms = math.sqrt(mean_square)
    if stderr is None or rms == 0:
        return Estimate(rms, None if stderr is None else 0.0)
    return Estimate(rms, float(stderr / (2.0 * rms)))


def ode_residual(path):
    """max_k |x_k - x_0 - trapezoid of y up to t_k|."""
    integral = cumulative_trapezoid(path.y, path.times, initial=0.0)
    return float(np.max(np.abs(path.x - path.x[0] - integral)))
