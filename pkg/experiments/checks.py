# experiments/checks.py
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _
from scipy.integrate import trapezoid

from analysis.choices import Verdict
from analysis.curves import PathCurve
from analysis.gronwall import gronwall_violation_check
from analysis.statistics import (
    d_statistic, ks_two_sample, ode_residual, origin_proximity, realized_qv, small_time_slope,
    sup_rms_difference,
)
from analysis.stopping import tau_n_pair
from driver.grid import TimeGrid
from driver.sampling import DriverPath, refine_driver, sample_driver
from driver.streams import REFERENCE_DOMAIN, generator, normal_rows
from schemes.euler import euler_maruyama_batch, mean_value_violations
from schemes.truncation import TruncationSpec
from timechange.choices import Interpolation, Scheme
from transform.domain import Alpha
from transform.maps import abs_power, h, h_inv
from .campaigns import ClockSettings, run_campaign
from .choices import CheckName, CheckStatus, SchemeSelection

logger = logging.getLogger(__name__)

ROUNDTRIP_ALPHAS = (-0.49, -0.25, 0.0, 0.5, 1.0)
MEAN_VALUE_ALPHAS = (-0.25, 0.25, 0.75)
MEAN_VALUE_PAIRS = 10**6
ORIGIN_EPSILONS = (1e-1, 1e-2, 1e-3)
SLOPE_EXPONENTS = (6, 8, 10)
DEFAULT_GRONWALL_LEVEL = 4
DEFAULT_MEAN_VALUE_LEVEL = 10

# checks that sample no paths; these values only fill the required config fields
STANDALONE_CHECKS = frozenset({CheckName.ROUNDTRIP, CheckName.MEAN_VALUE})
STANDALONE_DEFAULTS = {
    'alpha': '0', 'x0': '1', 'y0': '0', 'horizon': '1',
    'n_steps': '2', 'n_paths': '1', 'seed': '0',
}

CHECKS = {}


@dataclass
class CheckContext:
    clock: ClockSettings
    workers: int
    z: float


@dataclass
class CheckReport:
    name: CheckName
    status: CheckStatus
    statistics: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            'name': str(self.name),
            'status': str(self.status),
            'statistics': self.statistics,
            'thresholds': self.thresholds,
            'config': self.config,
        }


def register(name):
    def decorator(func):
        CHECKS[name] = func
        return func
    return decorator


def _unusable(message, **params):
    return ValidationError(message, code='invalid_check_config', params=params)


def _status(ok):
    return CheckStatus.PASS if ok else CheckStatus.FAIL


def _drivers(config, grid):
    if config.zero_noise:
        return [DriverPath.zero(grid, config.seed, k) for k in range(config.n_paths)]
    return [sample_driver(grid, config.seed, k) for k in range(config.n_paths)]


def _refined(config, drivers, grid):
    if config.zero_noise:
        return [DriverPath.zero(grid, d.seed, d.stream_id) for d in drivers]
    return [refine_driver(d, grid, config.seed) for d in drivers]


def _completed_paths(config, ctx, scheme, **clock_overrides):
    clock = replace(ctx.clock, **clock_overrides)
    result = run_campaign(config.replace(scheme=scheme), clock=clock, workers=ctx.workers)
    return [p for _, p in result.completed(Scheme(str(scheme)))], result.cap_hits


def _sampler_scheme(config):
    return SchemeSelection.EM if config.scheme == SchemeSelection.EM else SchemeSelection.TIMECHANGE


@register(CheckName.ROUNDTRIP)
def check_roundtrip(config, ctx):
    lattice = np.array([s * 10.0**k for k in range(-6, 7) for s in (1.0, -1.0)])
    alphas = sorted(set(ROUNDTRIP_ALPHAS) | {config.alpha})
    worst, odd_failures = {}, 0
    for value in alphas:
        alpha = Alpha(value)
        back = h_inv(h(lattice, alpha), alpha)
        worst[f"{value:g}"] = float(np.max(np.abs(back - lattice) / np.maximum(1.0, np.abs(lattice))))
        odd_failures += int(np.count_nonzero(h(-lattice, alpha) != -h(lattice, alpha)))
    tolerance = 1e-12
    return CheckReport(
        CheckName.ROUNDTRIP,
        _status(max(worst.values()) <= tolerance and odd_failures == 0),
        statistics={'max_relative_error': worst, 'oddness_failures': odd_failures},
        thresholds={'max_relative_error': tolerance},
    )


@register(CheckName.DRIVER_COV)
def check_driver_cov(config, ctx):
    if config.n_paths < 2:
        raise _unusable(_("driver-cov needs at least two paths."))
    paths = _drivers(config.replace(zero_noise=False), TimeGrid.uniform(1.0, 1))
    b = np.array([p.b[-1] for p in paths])
    ib = np.array([p.ib[-1] for p in paths])
    entries = {}
    ok = True
    for name, products, expected in (('b_b', b * b, 1.0), ('b_ib', b * ib, 0.5), ('ib_ib', ib * ib, 1.0 / 3.0)):
        stderr = float(products.std(ddof=1) / math.sqrt(products.size))
        value = float(products.mean())
        entries[name] = {'value': value, 'stderr': stderr, 'expected': expected}
        ok &= abs(value - expected) <= ctx.z * stderr
    return CheckReport(
        CheckName.DRIVER_COV, _status(ok),
        statistics={'n_paths': config.n_paths, 'covariance': entries},
        thresholds={'z': ctx.z},
    )


@register(CheckName.KS_ALPHA0)
def check_ks_alpha0(config, ctx):
    flat = config.replace(alpha=0.0, zero_noise=False)
    paths, _cap_hits = _completed_paths(flat, ctx, SchemeSelection.TIMECHANGE)
    grid, phase, horizon = flat.grid, flat.phase, flat.horizon

    driver = sample_driver(grid, flat.seed, paths[0].stream_id)
    bitwise = bool(
        np.array_equal(paths[0].x, phase.x + phase.y * grid.times + driver.ib)
        and np.array_equal(paths[0].y, phase.y + driver.b)
    )
    z = normal_rows(flat.seed, 0, 0, len(paths), width=1, domain=REFERENCE_DOMAIN)[:, 0]
    reference = phase.x + phase.y * horizon + math.sqrt(horizon**3 / 3.0) * z
    statistic, p_value = ks_two_sample([p.x[-1] for p in paths], reference)
    threshold = 1e-3
    return CheckReport(
        CheckName.KS_ALPHA0, _status(bitwise and p_value > threshold),
        statistics={'ks_statistic': statistic, 'p_value': p_value, 'bitwise_identical': bitwise, 'n_paths': len(paths)},
        thresholds={'p_value': threshold},
    )


@register(CheckName.QV)
def check_qv(config, ctx):
    alpha = config.exponent
    alpha.require_construction_range()
    if config.x0 == 0:
        raise _unusable(_("The qv check integrates |X|^(2 alpha) and needs x0 != 0."))
    paths, cap_hits = _completed_paths(config, ctx, SchemeSelection.TIMECHANGE, interpolation=Interpolation.BRIDGE)
    if not paths:
        raise _unusable(_("Every path hit the clock cap."))
    horizon = config.horizon
    realized = np.array([realized_qv(p.y, p.grid)(horizon)[0] for p in paths])
    integral = np.array([trapezoid(abs_power(p.x, 2.0 * alpha.value), p.times) for p in paths])
    clock = np.array([p.clock[-1] for p in paths])
    gap = abs(realized.mean() - integral.mean()) / integral.mean()
    tolerance = 0.05
    return CheckReport(
        CheckName.QV, _status(gap <= tolerance),
        statistics={
            'realized_qv': realized.mean(),
            'integral_abs_x_power': integral.mean(),
            'inverse_clock': clock.mean(),
            'relative_gap': gap,
            'n_paths': len(paths),
            'cap_hits': cap_hits,
        },
        thresholds={'relative_gap': tolerance},
    )


@register(CheckName.ORIGIN)
def check_origin(config, ctx):
    paths, cap_hits = _completed_paths(config, ctx, _sampler_scheme(config))
    if not paths:
        raise _unusable(_("Every path hit the clock cap."))
    summary = origin_proximity(paths, ORIGIN_EPSILONS)
    fractions = [summary.estimates[f"below_{eps:g}"].value for eps in ORIGIN_EPSILONS]
    monotone = all(a >= b for a, b in zip(fractions, fractions[1:]))
    limit = 0.01
    return CheckReport(
        CheckName.ORIGIN, _status(monotone and fractions[-1] < limit),
        statistics={**summary.to_dict(), 'monotone': monotone, 'cap_hits': cap_hits},
        thresholds={f"below_{ORIGIN_EPSILONS[-1]:g}": limit},
    )


@register(CheckName.ODE)
def check_ode(config, ctx):
    selection = [SchemeSelection.TIMECHANGE, SchemeSelection.EM] if config.scheme == SchemeSelection.BOTH else [config.scheme]
    low, high = 0.4, 0.6
    ratios, residuals = {}, {}
    for scheme in selection:
        means = []
        for factor in (1, 2, 4):
            paths, _cap_hits = _completed_paths(config.replace(n_steps=config.n_steps * factor), ctx, scheme)
            means.append(float(np.mean([ode_residual(p) for p in paths])))
        residuals[str(scheme)] = means
        ratios[str(scheme)] = [b / a if a > 0 else math.nan for a, b in zip(means, means[1:])]
    ok = all(low <= r <= high for rs in ratios.values() for r in rs)
    return CheckReport(
        CheckName.ODE, _status(ok),
        statistics={'mean_residual': residuals, 'refinement_ratio': ratios},
        thresholds={'ratio_low': low, 'ratio_high': high},
    )


@register(CheckName.MEAN_VALUE)
def check_mean_value(config, ctx):
    level = config.trunc_n or DEFAULT_MEAN_VALUE_LEVEL
    rng = generator(config.seed, 0, REFERENCE_DOMAIN, 0)
    a = rng.uniform(math.ldexp(1.0, -level), 8.0, MEAN_VALUE_PAIRS)
    b = a + rng.exponential(1.0, MEAN_VALUE_PAIRS) + 1e-12
    # concave powers and negative powers only; the bound fails for alpha > 1
    alphas = sorted(set(MEAN_VALUE_ALPHAS) | ({config.alpha} if config.alpha <= 1 else set()))
    violations = {f"{value:g}": mean_value_violations(a, b, Alpha(value)) for value in alphas}
    return CheckReport(
        CheckName.MEAN_VALUE, _status(not any(violations.values())),
        statistics={'violations': violations, 'pairs': MEAN_VALUE_PAIRS, 'a_min': math.ldexp(1.0, -level)},
        thresholds={'violations': 0},
    )


def _coupled_levels(config, factor=4, levels=3):
    phase, alpha, trunc = config.phase, config.exponent, config.trunc
    out = []
    for level in range(levels):
        coarse_grid = TimeGrid.uniform(config.horizon, config.n_steps * factor**level)
        fine_grid = TimeGrid.uniform(config.horizon, config.n_steps * factor ** (level + 1))
        coarse = _drivers(config, coarse_grid)
        fine = _refined(config, coarse, fine_grid)
        out.append((
            coarse_grid.steps[0],
            euler_maruyama_batch(phase, alpha, coarse, trunc=trunc),
            euler_maruyama_batch(phase, alpha, fine, trunc=trunc),
        ))
    return out


@register(CheckName.STRONG_CONVERGENCE)
def check_strong_convergence(config, ctx):
    levels = _coupled_levels(config)
    estimates = [(dt, sup_rms_difference(coarse, fine)) for dt, coarse, fine in levels]
    rms = [e.value for _, e in estimates]
    decreasing = all(a > b for a, b in zip(rms, rms[1:]))
    return CheckReport(
        CheckName.STRONG_CONVERGENCE, _status(decreasing),
        statistics={
            'levels': [{'dt': dt, 'rms_sup_difference': e.value, 'stderr': e.stderr} for dt, e in estimates],
            'strictly_decreasing': decreasing,
        },
        thresholds={'refinement_factor': 4},
    )


@register(CheckName.SMALL_TIME)
def check_small_time(config, ctx):
    t1 = config.horizon / config.n_steps
    usable = [k for k in SLOPE_EXPONENTS if t1 <= 2.0**-k <= config.horizon]
    if not usable:
        raise _unusable(_("The grid step is too coarse to resolve t = 2^-%(k)s."), k=SLOPE_EXPONENTS[0])
    scheme = _sampler_scheme(config)
    if scheme == SchemeSelection.EM:
        paths = euler_maruyama_batch(config.phase, config.exponent, _drivers(config, config.grid), trunc=config.trunc)
    else:
        paths, _cap_hits = _completed_paths(config, ctx, scheme)
    levels, ok = [], True
    for k in usable:
        slopes = np.array([small_time_slope(p, at=2.0**-k) for p in paths])
        mean = float(slopes.mean())
        stderr = float(slopes.std(ddof=1) / math.sqrt(slopes.size)) if slopes.size > 1 else 0.0
        tolerance = max(ctx.z * stderr, 1e-12 * max(1.0, abs(config.y0)))
        ok &= abs(mean - config.y0) <= tolerance
        levels.append({'t': 2.0**-k, 'mean_slope': mean, 'stderr': stderr})
    return CheckReport(
        CheckName.SMALL_TIME, _status(ok),
        statistics={'levels': levels, 'target': config.y0},
        thresholds={'z': ctx.z},
    )


def _pair_curve(first, second, trunc):
    stop = min(tau_n_pair(a, b, trunc) for a, b in zip(first, second))
    return d_statistic(first, second), min(stop, first[0].horizon)


@register(CheckName.GRONWALL)
def check_gronwall(config, ctx):
    """
    The bound is tested on coarse against fine n-truncated EM driven by one refined path.

    Untruncated against truncated EM must agree exactly up to the pair's exit time; any
    difference there is a scheme defect. A violated bound on the coarse/fine pair is
    inconclusive: discretization error is a stronger perturbation than the bound covers.
    """
    alpha = config.exponent
    trunc = config.trunc or TruncationSpec(DEFAULT_GRONWALL_LEVEL)
    floor = trunc.inner if alpha.value < 0 else 0.0
    drivers = _drivers(config, config.grid)

    plain = euler_maruyama_batch(config.phase, alpha, drivers, floor=floor)
    coarse = euler_maruyama_batch(config.phase, alpha, drivers, trunc=trunc, floor=floor)
    identity_curve, identity_stop = _pair_curve(plain, coarse, trunc)
    identity_gap = float(np.max(identity_curve.restrict(identity_stop).values))

    fine_grid = TimeGrid.uniform(config.horizon, 4 * config.n_steps)
    fine = euler_maruyama_batch(config.phase, alpha, _refined(config, drivers, fine_grid), trunc=trunc, floor=floor)
    fine_on_coarse = [p.at(config.grid) for p in fine]
    curve, stop = _pair_curve(coarse, fine_on_coarse, trunc)
    coupled = gronwall_violation_check(curve, alpha, trunc, z=ctx.z, t_max=stop)

    t = config.grid.times
    control = gronwall_violation_check(PathCurve(t, t**3), Alpha(1.0), TruncationSpec(1), z=ctx.z)

    reason = None
    if control.verdict != Verdict.VIOLATED:
        status, reason = CheckStatus.FAIL, "negative control was not flagged"
    elif identity_gap != 0.0:
        status, reason = CheckStatus.FAIL, "truncated EM left the untruncated path before the exit time"
    elif coupled.verdict == Verdict.HOLDS:
        status = CheckStatus.PASS
    elif coupled.verdict == Verdict.INCONCLUSIVE:
        status, reason = CheckStatus.INCONCLUSIVE, "negative margin within the standard-error band"
    else:
        status = CheckStatus.INCONCLUSIVE
        reason = "coarse/fine discretization error exceeds the bound; it is not a solution-level coupling"
    return CheckReport(
        CheckName.GRONWALL, status,
        statistics={
            'coarse_vs_fine': {**coupled.to_dict(), 't_max': stop, 'max_d': float(np.max(curve.restrict(stop).values))},
            'truncation_identity': {'max_d': identity_gap, 't_max': identity_stop},
            'negative_control': control.to_dict(),
            'in_regime': config.x0 == 0 and config.y0 > 0,
            'reason': reason,
        },
        thresholds={'z': ctx.z, 'truncation_identity_max_d': 0.0},
    )


def run_check(name, config, clock=None, workers=None, z=None):
    name = CheckName(name)
    ctx = CheckContext(
        clock=clock or ClockSettings.from_settings(),
        workers=settings.SDE_TOOLKIT['WORKERS'] if workers is None else workers,
        z=settings.SDE_TOOLKIT['GRONWALL_Z'] if z is None else z,
    )
    report = CHECKS[name](config, ctx)
    report.config = config.to_dict()
    log = logger.info if report.status == CheckStatus.PASS else logger.warning
    log("check %s: %s", report.name.value, report.status.value)
    return report
