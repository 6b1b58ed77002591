"""Named, counter-keyed random substreams.

Every random quantity is drawn from a stream identified by a master seed, a
stream name and optional integer counters.  Streams are independent of each
other and of the problem size, so growing ``n`` keeps all earlier draws.
"""

from __future__ import annotations

import zlib

import numpy as np

STREAMS = ("latents", "edges", "covariates", "noise", "bootstrap", "selection", "mc", "targets")


def _stream_id(name: str) -> int:
    return zlib.crc32(name.encode("ascii"))


def substream(seed: int, name: str, *counters: int) -> np.random.Generator:
    """Generator for stream ``name`` under ``seed`` at position ``counters``."""
    if seed is None:
        raise ValueError("a seed is required for reproducible sampling")
    key = (_stream_id(name),) + tuple(int(c) for c in counters)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(seed: int, name: str, *counters: int) -> int:
    """Derive a 63-bit integer seed, e.g. for one Monte Carlo iteration."""
    key = (_stream_id(name),) + tuple(int(c) for c in counters)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return int(ss.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))
