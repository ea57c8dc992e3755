"""Counter-based random substreams.

Every Monte Carlo sample owns a Philox generator whose key is a 64-bit mix of
``(seed, tag, index)``.  A sample's draws therefore depend only on those three
numbers, never on how samples are grouped into chunks or spread over threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

MASK64 = (1 << 64) - 1

# stream tags: distinct purposes never share draws
TAG_MODEL = 0
TAG_SUM = 1
TAG_PARTICLES = 2
TAG_UNIFORMS = 3
TAG_DIRECT = 4
TAG_PRODUCT = 5


def mix64(z: int) -> int:
    """SplitMix64 finaliser (Steele, Lea & Flood)."""
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def substream_key(seed: int, index: int, tag: int = TAG_MODEL) -> tuple[int, int]:
    if seed < 0 or seed > MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    k0 = mix64(seed ^ mix64(tag))
    k1 = mix64(k0 ^ mix64(index))
    return k0, k1


def substream(seed: int, index: int, tag: int = TAG_MODEL) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=list(substream_key(seed, index, tag))))


def chunk_bounds(n: int, chunk: int):
    return [(a, min(a + chunk, n)) for a in range(0, n, chunk)]


def map_chunks(fn, n: int, chunk: int, threads: int = 1):
    """Apply ``fn(start, stop)`` to fixed chunks of ``range(n)``, in order.

    Chunk boundaries do not depend on ``threads``; only wall time does.
    """
    bounds = chunk_bounds(n, chunk)
    if threads <= 1 or len(bounds) == 1:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: fn(*ab), bounds))
