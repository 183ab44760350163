"""Seeded random-number plumbing.

Every stochastic routine in the package takes a ``numpy.random.Generator``.
Root generators are Philox (counter-based), and replicate/chunk streams are
derived with ``SeedSequence`` spawning, so results are reproducible bit for
bit from a single integer seed and independent of worker scheduling.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

# Chunk size for lock-step vectorized Monte Carlo.  Fixed so that chunk
# boundaries (and hence every drawn number) do not depend on thread count.
CHUNK = 1 << 16


def root_generator(seed: int) -> np.random.Generator:
    """Build the package-standard generator (Philox) for an integer seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def split(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Derive ``n`` independent child generators from ``rng``.

    Uses SeedSequence spawning on the parent's bit generator, which is a
    stable counter-based construction: child ``i`` depends only on the
    parent seed material and the spawn index.
    """
    return rng.spawn(n)


def chunk_sizes(total: int, chunk: int = CHUNK) -> list[int]:
    """Split ``total`` items into fixed-size chunks (last one ragged)."""
    if total <= 0:
        return []
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])


def map_chunks(
    fn: Callable[..., R],
    jobs: Sequence[tuple],
    threads: int = 1,
) -> list[R]:
    """Apply ``fn`` over argument tuples, optionally on a thread pool.

    Results come back in job order regardless of ``threads``, so reductions
    over them are scheduling-independent.
    """
    if threads <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def mean_ci(values: np.ndarray, level: float = 0.99) -> tuple[float, float, float]:
    """Sample mean with a normal-approximation confidence interval.

    Returns ``(mean, lo, hi)``.  Degenerate samples get a zero-width CI.
    """
    from scipy.stats import norm

    values = np.asarray(values, dtype=float)
    n = values.size
    m = float(values.mean()) if n else float("nan")
    if n < 2:
        return m, m, m
    se = float(values.std(ddof=1)) / np.sqrt(n)
    z = float(norm.ppf(0.5 + level / 2.0))
    return m, m - z * se, m + z * se


def proportion_ci(count: int, n: int, level: float = 0.99) -> tuple[float, float, float]:
    """Wilson score interval for a binomial proportion."""
    from scipy.stats import norm

    if n == 0:
        return float("nan"), float("nan"), float("nan")
    z = float(norm.ppf(0.5 + level / 2.0))
    p = count / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return p, max(0.0, center - half), min(1.0, center + half)
