"""Portable counter-based RNG streams.

Every stochastic component keys its generator by (seed, stream ids...), so
streams are mutually independent, reproducible across platforms, and
insensitive to how many draws other components consume.  Philox is a
64-bit counter-based bit generator with fixed constants, which makes the
sequences identical on any machine for a given key.
"""

from __future__ import annotations

import numpy as np


def philox_rng(seed, *stream: int) -> np.random.Generator:
    """Generator for the (seed, *stream) key.

    ``seed`` may be an int or a tuple of ints (a pre-assembled key); extra
    stream ids are appended either way.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(rng_key(seed, *stream))))


def rng_key(seed, *stream: int) -> tuple:
    """Normalize (seed, stream ids) to a flat tuple of ints."""
    if isinstance(seed, (tuple, list)):
        key = tuple(int(s) for s in seed)
    else:
        key = (int(seed),)
    return key + tuple(int(s) for s in stream)
