"""Deterministic 64-bit seed derivation.

Every random object in an experiment gets its own seed, derived from the
master seed by folding words through the SplitMix64 finalizer::

    h = 0x9E3779B97F4A7C15 ^ master
    for w in words:
        h = splitmix64(h ^ w)

where ``splitmix64(z)`` adds the golden-ratio increment and applies the
``(z ^ z>>30) * 0xBF58476D1CE4E5B9``, ``(z ^ z>>27) * 0x94D049BB133111EB``,
``z ^ z>>31`` finalizer (all arithmetic mod 2**64). Floats enter as their
IEEE-754 binary64 bit pattern. The seeds feed ``numpy.random.PCG64``.
"""

import struct

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15

# stream tags for the per-trial objects
STREAM_TRUTH = 1
STREAM_ENSEMBLE = 2
STREAM_DITHER = 3
STREAM_NOISE = 4
STREAM_SOLVER = 5


def splitmix64(z):
    z = (z + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def float_bits(x):
    """Bit pattern of ``x`` as an IEEE-754 double, as an unsigned int."""
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


def mix64(master, *words):
    """Fold ``words`` into ``master`` and return a 64-bit seed."""
    h = (GOLDEN ^ (int(master) & MASK64)) & MASK64
    for w in words:
        h = splitmix64(h ^ (int(w) & MASK64))
    return h


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))
