# experiments/serializers.py
import math
from dataclasses import asdict, dataclass, replace

from django.conf import settings
from rest_framework import serializers

from driver.grid import TimeGrid
from driver.streams import UINT64_LIMIT
from schemes.truncation import TruncationSpec
from transform.domain import ALPHA_LOWER, Alpha, Phase
from .choices import SchemeSelection


@dataclass(frozen=True)
class ExperimentConfig:
    alpha: float
    x0: float
    y0: float
    horizon: float
    n_steps: int
    n_paths: int
    seed: int
    scheme: str = SchemeSelection.TIMECHANGE
    trunc_n: int = None
    output_dir: str = 'runs'
    allow_origin: bool = False
    zero_noise: bool = False

    @property
    def phase(self):
        return Phase(self.x0, self.y0)

    @property
    def exponent(self):
        return Alpha(self.alpha)

    @property
    def grid(self):
        return TimeGrid.uniform(self.horizon, self.n_steps)

    @property
    def trunc(self):
        return None if self.trunc_n is None else TruncationSpec(self.trunc_n)

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        """Everything that determines the output bytes; the output directory does not."""
        data = asdict(self)
        data.pop('output_dir')
        data['scheme'] = str(self.scheme)
        return data


class ExperimentConfigSerializer(serializers.Serializer):
    alpha = serializers.FloatField()
    x0 = serializers.FloatField()
    y0 = serializers.FloatField()
    horizon = serializers.FloatField()
    n_steps = serializers.IntegerField(min_value=2)
    n_paths = serializers.IntegerField(min_value=1)
    seed = serializers.IntegerField(min_value=0, max_value=UINT64_LIMIT - 1)
    scheme = serializers.ChoiceField(choices=SchemeSelection.choices, default=SchemeSelection.TIMECHANGE)
    trunc_n = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    output_dir = serializers.CharField(required=False, allow_blank=False)
    allow_origin = serializers.BooleanField(default=False)
    zero_noise = serializers.BooleanField(default=False)

    def validate_alpha(self, value):
        if not math.isfinite(value) or value <= ALPHA_LOWER:
            raise serializers.ValidationError("alpha must be greater than -1/2.")
        return value

    def validate_horizon(self, value):
        if not math.isfinite(value) or value <= 0:
            raise serializers.ValidationError("horizon must be a positive number.")
        return value

    def validate(self, attrs):
        scheme = attrs.get('scheme', SchemeSelection.TIMECHANGE)
        if attrs['x0'] == 0 and attrs['y0'] == 0:
            if not (scheme == SchemeSelection.EM and attrs.get('allow_origin')):
                raise serializers.ValidationError(
                    {"x0": "(x0, y0) = (0, 0) is only allowed for scheme=em with --allow-origin."}
                )
        if scheme != SchemeSelection.EM and attrs['alpha'] > 0:
            raise serializers.ValidationError(
                {"alpha": "The time-change sampler needs alpha in (-1/2, 0]; use scheme=em."}
            )
        if scheme != SchemeSelection.TIMECHANGE and attrs['alpha'] < 0 and attrs.get('trunc_n') is None:
            raise serializers.ValidationError(
                {"trunc_n": "Euler-Maruyama with alpha < 0 needs a truncation level."}
            )
        return attrs

    def create(self, validated_data):
        validated_data.setdefault('output_dir', settings.SDE_TOOLKIT['OUTPUT_DIR'])
        return ExperimentConfig(**validated_data)
