"""Replicate evaluation with per-replicate seeds."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._config import thread_limit


def replicate_rng(seed, b):
    """Generator for replicate ``b``; depends only on ``(seed, b)``."""
    return np.random.default_rng([int(seed), int(b)])


def map_replicates(fn, B, seed, workers=None):
    """Evaluate ``fn(rng)`` for replicates ``0..B-1``.

    Each replicate draws from its own generator, so results do not
    depend on how replicates are split across workers.
    """
    workers = thread_limit() if workers is None else max(1, int(workers))
    if workers == 1 or B < 2 * workers:
        return np.array([fn(replicate_rng(seed, b)) for b in range(B)], dtype=float)
    chunks = np.array_split(np.arange(B), workers)

    def run(idx):
        return [fn(replicate_rng(seed, b)) for b in idx]

    with ThreadPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(run, chunks))
    return np.array([v for part in parts for v in part], dtype=float)


def randomization_pvalue(observed, null):
    """Add-one Monte Carlo p-value ``(1 + #{null >= observed}) / (B + 1)``.

    Values within a relative ``1e-12`` of the observed value count as ties.
    """
    null = np.asarray(null, dtype=float)
    tol = 1e-12 * max(1.0, abs(float(observed)))
    count = int(np.sum(null >= observed - tol))
    return (1.0 + count) / (len(null) + 1.0)
