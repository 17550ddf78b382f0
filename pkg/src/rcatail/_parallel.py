"""Seed handling and deterministic chunked execution.

Work is split into a fixed number of chunks, each with its own spawned
``SeedSequence``; results are reduced in chunk order. The worker count
therefore never changes the numbers, only the wall-clock time.
"""
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK_SIZE = 8192

_max_workers = 1


def set_max_workers(n):
    """Cap the number of worker threads used by Monte Carlo routines."""
    global _max_workers
    if n is None or n < 1:
        raise ValueError("worker count must be a positive integer")
    _max_workers = int(n)


def get_max_workers():
    return _max_workers


def as_seed_sequence(rng):
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        return np.random.SeedSequence(int(rng.integers(2**63)))
    return np.random.SeedSequence(rng)


def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(as_seed_sequence(rng))


def chunk_sizes(total, chunk=CHUNK_SIZE):
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    return sizes


def map_chunks(fn, sizes, rng):
    """Call ``fn(size, generator)`` once per chunk and return results in order."""
    seeds = as_seed_sequence(rng).spawn(len(sizes))
    jobs = [(s, np.random.default_rng(ss)) for s, ss in zip(sizes, seeds)]
    if _max_workers == 1 or len(jobs) == 1:
        return [fn(s, g) for s, g in jobs]
    with ThreadPoolExecutor(max_workers=_max_workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))
