# experiments/writers.py
import csv
import hashlib
import logging
import math
from pathlib import Path

import numpy as np
from rest_framework.renderers import JSONRenderer

logger = logging.getLogger(__name__)

CSV_HEADER = ('t', 'x', 'y')
LONG_CSV_HEADER = ('path_id', 't', 'x', 'y')


def format_number(value):
    """17 significant digits: enough to read back the same double."""
    return format(float(value), '.17g')


def _rows(path):
    for t, x, y in zip(path.times, path.x, path.y):
        yield format_number(t), format_number(x), format_number(y)


def write_path_csv(path, target):
    target = Path(target)
    with target.open('w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh, lineterminator='\r\n')
        writer.writerow(CSV_HEADER)
        writer.writerows(_rows(path))
    return target


def write_long_csv(paths, target):
    """All paths in one file; `paths` is a sequence of (path_id, SolutionPath)."""
    target = Path(target)
    with target.open('w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh, lineterminator='\r\n')
        writer.writerow(LONG_CSV_HEADER)
        for path_id, path in paths:
            writer.writerows((path_id, *row) for row in _rows(path))
    return target


def sha256_file(target, chunk_size=1 << 16):
    digest = hashlib.sha256()
    with Path(target).open('rb') as fh:
        for chunk in iter(lambda: fh.read(chunk_size), b''):
            digest.update(chunk)
    return digest.hexdigest()


def to_json_safe(value):
    """Plain Python values for strict JSON: numpy scalars unwrapped, inf and nan as None."""
    if isinstance(value, dict):
        return {str(k): to_json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [to_json_safe(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if value is None or isinstance(value, str):
        return value
    return str(value)


def render_json(data):
    return JSONRenderer().render(to_json_safe(data), renderer_context={'indent': 2}) + b'\n'


def write_json(data, target):
    target = Path(target)
    target.write_bytes(render_json(data))
    logger.info("wrote %s", target)
    return target
