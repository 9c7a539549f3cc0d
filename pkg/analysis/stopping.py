"""
Stopping times read off sampled paths. A time that never occurs on the grid is math.inf.
"""
import math

import numpy as np
from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _

# default zero tolerance, in ulps of max|x|
ZERO_ULPS = 8


def _first(times, hit):
    idx = np.flatnonzero(hit)
    return float(times[idx[0]]) if idx.size else math.inf


def _check_pair(path1, path2):
    if path1.grid != path2.grid:
        raise ValidationError(_("Paired paths must share one grid."), code='grid_mismatch')


def tau_n(path, trunc):
    """First grid time with |(x, y)| <= 2^-n or >= 2^n."""
    return _first(path.times, trunc.outside(path.norms()))


def tau_n_pair(path1, path2, trunc):
    """First time the smaller norm drops to 2^-n or the larger reaches 2^n."""
    _check_pair(path1, path2)
    n1, n2 = path1.norms(), path2.norms()
    hit = (np.minimum(n1, n2) <= trunc.inner) | (np.maximum(n1, n2) >= trunc.outer)
    return _first(path1.times, hit)


def sigma_times(path, zero_tol=None):
    """
    Zeros of x after t = 0: nodes with |x| <= zero_tol, and linear roots of every step on
    which x changes sign between two non-zero nodes.

    zero_tol defaults to ZERO_ULPS ulps of max|x|, so a root that lands on a node up to
    rounding is still counted there.
    """
    x = path.x
    t = path.times
    if zero_tol is None:
        zero_tol = ZERO_ULPS * np.finfo(np.float64).eps * float(np.max(np.abs(x)))
    zero = np.abs(x) <= zero_tol
    at_nodes = t[1:][zero[1:]]

    sign = np.sign(x)
    k = np.flatnonzero((sign[:-1] * sign[1:] < 0) & ~zero[:-1] & ~zero[1:])
    roots = t[k] + x[k] / (x[k] - x[k + 1]) * (t[k + 1] - t[k])
    return np.unique(np.concatenate((at_nodes, roots)))


def eta_time(path1, path2, trunc):
    """First time |X1| v |X2| reaches 2^-n, no later than the pairwise tau_n."""
    _check_pair(path1, path2)
    eta = _first(path1.times, np.maximum(np.abs(path1.x), np.abs(path2.x)) >= trunc.inner)
    return min(eta, tau_n_pair(path1, path2, trunc))


def first_approach(path1, path2, delta):
    """First time |X1| ^ |X2| < delta."""
    _check_pair(path1, path2)
    return _first(path1.times, np.minimum(np.abs(path1.x), np.abs(path2.x)) < delta)
