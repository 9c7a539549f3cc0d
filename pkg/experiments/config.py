# experiments/config.py
import logging

from decouple import RepositoryEnv
from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _

from .serializers import ExperimentConfigSerializer

logger = logging.getLogger(__name__)

# spellings accepted in config files and on the command line
ALIASES = {
    'steps': 'n_steps',
    'paths': 'n_paths',
    'out': 'output_dir',
}


def _normalise(key):
    key = key.strip().lower().replace('-', '_')
    return ALIASES.get(key, key)


def read_config_file(path):
    """
    Flat `key = value` file. Only the file itself is read; unlike decouple's
    AutoConfig, the process environment never leaks in.
    """
    try:
        repository = RepositoryEnv(str(path))
    except OSError as exc:
        raise ValidationError(
            _("Cannot read config file %(path)s: %(error)s"),
            code='config_file',
            params={'path': path, 'error': exc},
        )
    return {_normalise(key): value for key, value in repository.data.items()}


def flatten_errors(errors):
    parts = []
    for field, messages in errors.items():
        if isinstance(messages, dict):
            messages = [f"{key}: {value}" for key, value in messages.items()]
        parts.append(f"{field}: {' '.join(str(m) for m in messages)}")
    return '; '.join(parts)


def build_config(file_values=None, overrides=None):
    """Merge file values with command-line overrides and validate them."""
    data = dict(file_values or {})
    data.update({_normalise(k): v for k, v in (overrides or {}).items() if v is not None})
    serializer = ExperimentConfigSerializer(data=data)
    if not serializer.is_valid():
        raise ValidationError(flatten_errors(serializer.errors), code='invalid_config')
    config = serializer.save()
    logger.debug("experiment config: %s", config)
    return config
