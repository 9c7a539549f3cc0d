"""
Counter-based normal streams.

Every draw is addressed by (seed, stream_id, domain, row): a Philox generator is keyed
with (seed, stream_id) and its counter is placed at the start of block ``row // BLOCK_ROWS``
inside ``domain``. Rows are read as a prefix of their block, so asking for rows [a, b)
always returns the same numbers however the request is split.
"""
import numpy as np
from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _


BLOCK_ROWS = 1024
UINT64_LIMIT = 2**64

DRIVER_DOMAIN = 0
BRIDGE_DOMAIN = 1
REFERENCE_DOMAIN = 2


def _check_key(seed, stream_id):
    for name, value in (('seed', seed), ('stream_id', stream_id)):
        if not 0 <= int(value) < UINT64_LIMIT:
            raise ValidationError(
                _("%(name)s must be an unsigned 64-bit integer, got %(value)s."),
                code='invalid_seed',
                params={'name': name, 'value': value},
            )


def generator(seed, stream_id, domain, block):
    _check_key(seed, stream_id)
    bit_generator = np.random.Philox(
        key=np.array([int(seed), int(stream_id)], dtype=np.uint64),
        counter=np.array([0, 0, int(domain), int(block)], dtype=np.uint64),
    )
    return np.random.Generator(bit_generator)


def normal_rows(seed, stream_id, start, count, width=2, domain=DRIVER_DOMAIN):
    """Standard normal rows [start, start + count) of shape (count, width)."""
    out = np.empty((count, width), dtype=np.float64)
    row = start
    filled = 0
    while filled < count:
        block, offset = divmod(row, BLOCK_ROWS)
        take = min(BLOCK_ROWS - offset, count - filled)
        rows = generator(seed, stream_id, domain, block).standard_normal((offset + take, width))
        out[filled:filled + take] = rows[offset:]
        filled += take
        row += take
    return out
