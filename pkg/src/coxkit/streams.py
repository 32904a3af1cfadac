"""Counter-based random streams and the replicate-block runner.

Replicates are grouped in blocks of fixed size ``BLOCK_SIZE``. Block ``b`` of
a run draws from a Philox generator keyed by ``(seed, tag)`` whose counter is
offset by ``b << 192``, so every block owns a disjoint slice of one counter
space. Which worker computes a block never changes what it draws, and blocks
are concatenated in index order before any reduction: results are identical
for every worker count.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

BLOCK_SIZE = 2048
THREADS_ENV = "COXKIT_THREADS"

_MASK64 = (1 << 64) - 1


def stream_tag(name: str) -> int:
    """Stable 32-bit tag for a named check, used to separate its streams."""
    return zlib.crc32(name.encode("utf-8"))


def substream(seed: int, index: int = 0, tag: int = 0) -> np.random.Generator:
    """Generator for sub-stream ``index`` of the run keyed by ``(seed, tag)``."""
    if index < 0:
        raise ValueError("stream index must be nonnegative")
    key = (int(seed) & _MASK64) | ((int(tag) & _MASK64) << 64)
    counter = np.array([0, 0, 0, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return max(1, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(1, value)


def block_sizes(replicates: int, block_size: int = BLOCK_SIZE) -> list[int]:
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    full, rest = divmod(replicates, block_size)
    return [block_size] * full + ([rest] if rest else [])


def run_blocks(
    fn: Callable[[np.random.Generator, int], Sequence[np.ndarray] | np.ndarray],
    replicates: int,
    seed: int,
    tag: int = 0,
    block_size: int = BLOCK_SIZE,
) -> tuple[np.ndarray, ...]:
    """Evaluate ``fn(rng, size)`` on every block and concatenate along axis 0.

    ``fn`` returns one array or a tuple of arrays whose leading axis is the
    replicate axis. The output is a tuple with one concatenated array per
    returned array.
    """
    sizes = block_sizes(replicates, block_size)

    def one(b: int):
        out = fn(substream(seed, b, tag), sizes[b])
        return out if isinstance(out, tuple) else (out,)

    workers = min(worker_count(), len(sizes))
    if workers <= 1:
        parts = [one(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(len(sizes))))
    return tuple(np.concatenate([p[i] for p in parts], axis=0) for i in range(len(parts[0])))


def uniforms(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform draws on [0, 1)."""
    return rng.random(size)


def exponentials(rng: np.random.Generator, size, scale: float = 1.0) -> np.ndarray:
    """Exponential draws by inverse CDF, ``-scale * log(1 - U)``."""
    return -scale * np.log1p(-rng.random(size))
