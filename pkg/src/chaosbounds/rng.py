"""Counter-based normal streams.

Every stream is a Philox-4x64 generator whose key is derived from
``(seed, *stream_id)``.  Draw ``i`` of a stream of width ``n`` always reads
counter blocks ``[i*b, (i+1)*b)`` with ``b = ceil(n/4)``, so any chunk of
draws can be generated independently and the concatenation equals the
serial stream bit for bit.

Uniforms use the top 53 bits of each 64-bit word, shifted to the open
interval: ``u = (w >> 11) + 0.5) / 2**53``.  Normals are ``ndtri(u)``
(inverse CDF), which is deterministic across platforms up to libm.
"""

from __future__ import annotations

import math
from typing import Iterator, Sequence

import numpy as np
from scipy.special import ndtri

CHUNK = 1 << 16

# stream purposes; the slot number (or subset code) is appended as a second id
Y_SLOT = 1
Y_D = 2
Z_SUP = 3
W_SLOT = 4
PROP_NORM = 5
PROP_POINT = 6
ALS_RESTART = 7
POINTS = 8


def _key(seed: int, stream: Sequence[int]) -> np.ndarray:
    return np.random.SeedSequence([int(seed), *(int(s) for s in stream)]).generate_state(2, np.uint64)


def uniforms(seed: int, stream: Sequence[int], start: int, count: int, width: int) -> np.ndarray:
    """Open-interval uniforms for draws ``start .. start+count-1``, shape ``(count, width)``."""
    blocks = math.ceil(width / 4)
    bg = np.random.Philox(key=_key(seed, stream))
    if start:
        bg.advance(start * blocks)
    raw = bg.random_raw(count * blocks * 4).reshape(count, blocks * 4)[:, :width]
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def normals(seed: int, stream: Sequence[int], start: int, count: int, width: int) -> np.ndarray:
    """Standard normals for draws ``start .. start+count-1``, shape ``(count, width)``."""
    return ndtri(uniforms(seed, stream, start, count, width))


def chunks(count: int, size: int = CHUNK) -> Iterator[tuple[int, int]]:
    """``(start, length)`` pairs covering ``range(count)``."""
    for start in range(0, count, size):
        yield start, min(size, count - start)
