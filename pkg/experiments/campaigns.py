"""
Path generation for experiment campaigns.

Path `k` of a campaign is driven by stream (seed, k). Toolkit settings are resolved once in
the parent process and handed to workers as plain values, so a campaign's output depends only
on its config and those values, whatever the number of workers.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

from django.conf import settings

from driver.sampling import DriverPath, sample_driver
from schemes.euler import euler_maruyama
from timechange.choices import Scheme
from timechange.exceptions import HorizonExceededError
from timechange.sampler import sample_weak_solution
from .choices import SchemeSelection

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClockSettings:
    interpolation: str
    oversample: int
    max_steps: int

    @classmethod
    def from_settings(cls, **overrides):
        toolkit = settings.SDE_TOOLKIT
        values = {
            'interpolation': toolkit['CLOCK_INTERPOLATION'],
            'oversample': toolkit['CLOCK_OVERSAMPLE'],
            'max_steps': toolkit['MAX_CLOCK_STEPS'],
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self):
        return {'interpolation': str(self.interpolation), 'oversample': self.oversample, 'max_steps': self.max_steps}


@dataclass
class CampaignResult:
    """Paths per scheme, indexed by path id; a None entry is a path whose clock hit the cap."""

    paths: dict = field(default_factory=dict)

    @property
    def cap_hits(self):
        return sorted({k for by_id in self.paths.values() for k, p in by_id.items() if p is None})

    def completed(self, scheme):
        return [(k, p) for k, p in sorted(self.paths[scheme].items()) if p is not None]


def schemes_for(selection):
    if selection == SchemeSelection.BOTH:
        return [Scheme.TIMECHANGE, Scheme.EM]
    return [Scheme(str(selection))]


def simulate_path(config, clock, scheme, stream_id):
    """One path of `scheme` on stream (config.seed, stream_id); None when the clock cap is hit."""
    if scheme == Scheme.TIMECHANGE:
        try:
            return sample_weak_solution(
                config.phase, config.exponent, config.grid, config.seed, stream_id,
                interpolation=clock.interpolation, oversample=clock.oversample,
                max_steps=clock.max_steps, zero_noise=config.zero_noise,
            )
        except HorizonExceededError:
            return None

    grid = config.grid
    if config.zero_noise:
        driver = DriverPath.zero(grid, config.seed, stream_id)
    else:
        driver = sample_driver(grid, config.seed, stream_id)
    return euler_maruyama(config.phase, config.exponent, driver, trunc=config.trunc)


def _simulate_all(config, clock, schemes, stream_id):
    return [simulate_path(config, clock, scheme, stream_id) for scheme in schemes]


def run_campaign(config, clock=None, workers=None, stream_ids=None):
    """
    Simulate every path of `config` for each selected scheme; all schemes of one path id share
    its stream. Results come back in path order regardless of the worker count.
    """
    clock = clock or ClockSettings.from_settings()
    workers = settings.SDE_TOOLKIT['WORKERS'] if workers is None else workers
    schemes = schemes_for(config.scheme)
    stream_ids = list(range(config.n_paths)) if stream_ids is None else list(stream_ids)
    job = partial(_simulate_all, config, clock, schemes)

    logger.info("campaign: %s paths, schemes %s, %s worker(s)", len(stream_ids),
                ', '.join(str(s) for s in schemes), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(job, stream_ids, chunksize=max(1, len(stream_ids) // (4 * workers))))
    else:
        rows = [job(k) for k in stream_ids]

    result = CampaignResult({scheme: {} for scheme in schemes})
    for k, row in zip(stream_ids, rows):
        for scheme, path in zip(schemes, row):
            result.paths[scheme][k] = path

    if result.cap_hits:
        logger.warning("%s path(s) hit the clock cap of %s s-steps and were skipped: %s",
                       len(result.cap_hits), clock.max_steps, result.cap_hits)
    return result
