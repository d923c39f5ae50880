"""Seeded random substreams and index hashing.

All randomness in the package flows from one integer seed through named
substreams, so sweeps are reproducible and independent of evaluation order.
"""
import os
import zlib

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def _name_key(name):
    return zlib.crc32(name.encode("utf-8"))


def substream(seed, name, *index):
    """Return a ``Generator`` for the substream ``name`` (and optional integer index)."""
    key = (_name_key(name),) + tuple(int(i) & 0xFFFFFFFF for i in index)
    seq = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=key)
    return np.random.default_rng(seq)


def splitmix64(values):
    """Vectorized splitmix64 finalizer on uint64 arrays."""
    z = np.asarray(values, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z + np.uint64(0x9E3779B97F4A7C15)) & _MASK
        z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & _MASK
        z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & _MASK
        z = z ^ (z >> np.uint64(31))
    return z


def hash_indices(seed, *components):
    """Hash integer index arrays (broadcast together) into uint64 values.

    Used for weights that must be a pure function of the index, so that
    any sub-block of an unbounded index set can be generated on demand.
    """
    arrays = np.broadcast_arrays(*[np.asarray(c, dtype=np.int64) for c in components])
    h = splitmix64(np.full(arrays[0].shape, int(seed) & ((1 << 64) - 1), dtype=np.uint64))
    for a in arrays:
        with np.errstate(over="ignore"):
            h = splitmix64(h ^ a.astype(np.uint64))
    return h


def hash_uniform(seed, *components):
    """Uniform floats in (0, 1) that depend only on the seed and the indices."""
    h = hash_indices(seed, *components)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) / float(1 << 53)


def thread_count():
    """Worker count for FFT calls, from ``WAVOP_THREADS`` (0 or unset means all cores)."""
    raw = os.environ.get("WAVOP_THREADS", "0").strip() or "0"
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value <= 0:
        return os.cpu_count() or 1
    return value
