"""Deterministic random substreams.

Every random draw in the package comes from a generator built by
:func:`substream`. The derivation is a pure function of the master seed and
an integer stream id tuple::

    SeedSequence(entropy=seed, spawn_key=(purpose, *indices)) -> Philox

so a given (seed, purpose, indices) always yields the same numbers no matter
which process draws them or in which order blocks are executed.
"""

import numpy as np

# Purpose tags. Values are part of the stream derivation and must not change.
CODES = 1
BITS = 2
NOISE = 3
VARIANCE = 4
GENERIC = 9


def substream(seed, purpose, *indices):
    """Return an independent ``numpy.random.Generator`` for a stream id.

    Parameters
    ----------
    seed : int
        Master seed (non-negative, up to 64 bits).
    purpose : int
        One of the module level purpose tags.
    *indices : int
        Further non-negative integers identifying the stream (user count,
        block index, ...).
    """
    if seed < 0:
        raise ValueError("seed must be non-negative")
    key = tuple(int(i) for i in (purpose,) + indices)
    if any(i < 0 for i in key):
        raise ValueError("stream indices must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
