"""Deterministic random streams for replicated simulations.

Every replicate owns a private stream derived from ``(seed, tag, index)``
through :class:`numpy.random.SeedSequence` and fed to the counter-based
Philox generator.  The same triple always yields the same stream, regardless
of how many workers run or in which order replicates are scheduled.
"""
from __future__ import annotations

import os
import zlib

import numpy as np

DEFAULT_SEED = 20080101
THREADS_ENV = "COALSCOPE_THREADS"


def tag_key(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def replicate_rng(seed: int, index: int, tag: str = "") -> np.random.Generator:
    """Generator for replicate ``index`` of the stream family ``tag``."""
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(tag_key(tag), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def resolve_threads(threads=None) -> int:
    if threads is None:
        threads = os.environ.get(THREADS_ENV, "1")
    threads = int(threads)
    if threads < 1:
        raise ValueError("threads must be a positive integer")
    return threads
