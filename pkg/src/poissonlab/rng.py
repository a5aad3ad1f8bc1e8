"""Counter-based splittable random streams.

Every stochastic routine in this package takes an explicit
``numpy.random.Generator``.  Monte Carlo drivers derive one stream per
replica from ``(master_seed, replica_index, ...)`` so results are
bit-reproducible no matter how replicas are scheduled.
"""

from __future__ import annotations

import numpy as np

# Philox keys are 128 bits; mix path indices with an odd multiplier so
# distinct (seed, path) tuples land on distinct keys.
_MASK = (1 << 128) - 1
_MIX = 0x9E3779B97F4A7C15F39CC0605CEDC835


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return the generator addressed by ``(seed, *path)``.

    ``stream(s, i)`` is the stream of replica ``i``; deeper paths
    (``stream(s, i, j)``) address independent substreams.  The same
    tuple always yields the same stream.
    """
    key = int(seed) & _MASK
    for idx in path:
        if idx < 0:
            raise ValueError("stream path indices must be nonnegative")
        key = (key * _MIX + int(idx) + 1) & _MASK
    return np.random.Generator(np.random.Philox(key=key))


def substreams(seed: int, n: int, *prefix: int) -> list[np.random.Generator]:
    """Streams for replicas ``0..n-1`` under a common path prefix."""
    return [stream(seed, *prefix, i) for i in range(n)]
