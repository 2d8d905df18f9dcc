"""Named random streams derived from the single run seed.

Every consumer asks for a stream by name; the stream is a PCG64 generator
seeded with ``SeedSequence(seed, spawn_key=(crc32(name),))``, so streams
are independent of each other and of the order in which they are created.
"""
from __future__ import annotations

import zlib

import numpy as np

__all__ = ["stream", "stream_seed"]


def _seq(seed, name):
    return np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(name.encode()),))


def stream(seed, name):
    return np.random.Generator(np.random.PCG64(_seq(seed, name)))


def stream_seed(seed, name):
    """A 32-bit integer seed for APIs that take an ``int``."""
    return int(_seq(seed, name).generate_state(1)[0])
