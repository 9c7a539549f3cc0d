# analysis/summary.py
import math
from dataclasses import dataclass, field

import numpy as np
from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float = None

    def to_dict(self):
        return {'value': self.value, 'stderr': self.stderr}


@dataclass
class McSummary:
    """
    Monte Carlo means with standard errors, plus optional sorted samples.

    Standard errors are the sample standard deviation over sqrt(n_paths) and are None for a
    single path. Summaries over disjoint path sets combine with `merge`, which does not
    depend on the order of its operands.
    """

    n_paths: int
    estimates: dict = field(default_factory=dict)
    empirical_cdfs: dict = field(default_factory=dict)
    # centred sums of squares behind every estimate, kept for merging
    sums_of_squares: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_samples(cls, samples, cdfs=()):
        lengths = {np.size(values) for values in samples.values()}
        lengths.update(np.size(samples[name]) for name in cdfs)
        if len(lengths) != 1 or 0 in lengths:
            raise ValidationError(_("Samples must be non-empty and of equal length."), code='empty_sample')
        n = lengths.pop()
        summary = cls(n_paths=n)
        for name, values in samples.items():
            values = np.asarray(values, dtype=np.float64)
            mean = float(values.mean())
            summary.sums_of_squares[name] = float(np.sum((values - mean) ** 2))
            summary.estimates[name] = Estimate(mean, summary._stderr(name))
        for name in cdfs:
            summary.empirical_cdfs[name] = np.sort(np.asarray(samples[name], dtype=np.float64))
        return summary

    def _stderr(self, name):
        if self.n_paths < 2:
            return None
        variance = self.sums_of_squares[name] / (self.n_paths - 1)
        return math.sqrt(variance / self.n_paths)

    def merge(self, other):
        if self.estimates.keys() != other.estimates.keys() or self.empirical_cdfs.keys() != other.empirical_cdfs.keys():
            raise ValidationError(_("Only summaries of the same statistics can be merged."), code='summary_mismatch')
        n = self.n_paths + other.n_paths
        merged = McSummary(n_paths=n)
        for name, mine in self.estimates.items():
            theirs = other.estimates[name]
            delta = theirs.value - mine.value
            merged.sums_of_squares[name] = (
                self.sums_of_squares[name] + other.sums_of_squares[name]
                + delta * delta * (self.n_paths * other.n_paths) / n
            )
            mean = (self.n_paths * mine.value + other.n_paths * theirs.value) / n
            merged.estimates[name] = Estimate(mean, merged._stderr(name))
        for name, values in self.empirical_cdfs.items():
            merged.empirical_cdfs[name] = np.sort(np.concatenate((values, other.empirical_cdfs[name])))
        return merged

    def to_dict(self, quantiles=(0.01, 0.1, 0.5, 0.9, 0.99)):
        return {
            'n_paths': self.n_paths,
            'estimates': {name: estimate.to_dict() for name, estimate in self.estimates.items()},
            'quantiles': {
                name: {f"{q:g}": float(np.quantile(values, q)) for q in quantiles}
                for name, values in self.empirical_cdfs.items()
            },
        }
