"""Counter-based random substreams.

Every replication gets its own Philox stream keyed by ``(seed, tag)`` with the
replication index placed in the counter. Changing the replication count
therefore never changes the draws of earlier replications, and the result of a
batch does not depend on how it was split across threads.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np


def _tag_value(tag: str | int) -> int:
    if isinstance(tag, int):
        return tag
    return zlib.crc32(tag.encode())


def stream_key(seed: int, tag: str | int = 0) -> np.ndarray:
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    return np.random.SeedSequence([int(seed), _tag_value(tag)]).generate_state(2, np.uint64)


def substream(seed: int, rep: int, tag: str | int = 0) -> np.random.Generator:
    """Generator for replication ``rep`` of the stream ``(seed, tag)``."""
    bg = np.random.Philox(key=stream_key(seed, tag), counter=[0, 0, 0, int(rep)])
    return np.random.Generator(bg)


def substreams(seed: int, reps: Iterable[int], tag: str | int = 0) -> list[np.random.Generator]:
    key = stream_key(seed, tag)
    return [np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, int(r)])) for r in reps]


def default_threads() -> int:
    return max(1, os.cpu_count() or 1)


def split_ranges(total: int, parts: int) -> list[range]:
    parts = max(1, min(parts, total)) if total > 0 else 1
    bounds = np.linspace(0, total, parts + 1).astype(int)
    return [range(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def run_blocks(func: Callable[[range], Sequence], total: int, threads: int | None = None) -> list:
    """Apply ``func`` to contiguous index blocks and concatenate in index order."""
    threads = threads or 1
    blocks = split_ranges(total, threads)
    if threads == 1 or len(blocks) == 1:
        out = [func(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(func, blocks))
    merged: list = []
    for part in out:
        merged.extend(part)
    return merged
