"""Chunked Monte Carlo with independently seeded streams.

Samples are drawn in a fixed number of equal chunks, each from its own
generator spawned from one SeedSequence. Chunks are merged in order, so the
result depends on (seed, chunks) and never on the worker count.
"""
import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

logger = logging.getLogger(__name__)


def spawn_generators(seed, chunks):
    children = np.random.SeedSequence(seed).spawn(chunks)
    return [np.random.default_rng(child) for child in children]


def chunk_sizes(n, chunks):
    """Equal chunk sizes; the last chunk absorbs the remainder"""
    if n < 1 or chunks < 1:
        raise ValueError(f"need n >= 1 and chunks >= 1, got n={n}, chunks={chunks}")
    chunks = min(chunks, n)
    base = n // chunks
    sizes = [base] * chunks
    sizes[-1] += n - base * chunks
    return sizes


def run_chunked(sampler, n, seed, chunks=1, threads=1):
    """Run sampler(size, rng) -> 1-D array over chunks and concatenate."""
    sizes = chunk_sizes(n, chunks)
    rngs = spawn_generators(seed, len(sizes))
    logger.debug("running %d samples in %d chunks on %d threads", n, len(sizes), threads)
    if threads <= 1:
        parts = [sampler(size, rng) for size, rng in zip(sizes, rngs)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(sampler, sizes, rngs))
    return np.concatenate(parts)


async def run_chunked_async(sampler, n, seed, chunks=1, threads=1):
    loop = asyncio.get_running_loop()
    return await loop.run_in_executor(
        None, run_chunked, sampler, n, seed, chunks, threads
    )


def run_indexed(task, count, threads=1):
    """Evaluate task(index) for index in range(count), results in index order"""
    if threads <= 1:
        return [task(index) for index in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, range(count)))
