"""Shared numerics: signed log-domain sums, batch means, deterministic parallelism."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np


def signed_logsumexp(logs, signs=None):
    """(sign, log|sum|) of sum_i signs_i * exp(logs_i), streamed around the max.

    Returns (0.0, -inf) for an exactly cancelled or empty sum.
    """
    logs = np.asarray(logs, dtype=float)
    if signs is None:
        signs = np.ones_like(logs)
    signs = np.asarray(signs, dtype=float)
    if logs.size == 0:
        return 0.0, -math.inf
    m = float(np.max(logs))
    if m == -math.inf:
        return 0.0, -math.inf
    total = float(np.sum(signs * np.exp(logs - m)))
    if total == 0.0:
        return 0.0, -math.inf
    return math.copysign(1.0, total), m + math.log(abs(total))


def batch_means(values, batches: int = 50):
    """(mean, stderr, per-batch means) with autocorrelation-robust batching."""
    values = np.asarray(values, dtype=float)
    n = values.size
    nb = max(2, min(batches, n // 2))
    edges = np.linspace(0, n, nb + 1, dtype=int)
    per = np.array([values[lo:hi].mean() for lo, hi in zip(edges[:-1], edges[1:])])
    return float(values.mean()), float(per.std(ddof=1) / math.sqrt(nb)), per


def resolve_threads(flag=None) -> int:
    """--threads flag wins over the FREEPROBE_THREADS environment variable."""
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get("FREEPROBE_THREADS")
    return max(1, int(env)) if env else 1


def run_jobs(worker, jobs, threads: int = 1):
    """Map worker over jobs with a fixed reduction order.

    Results are combined in job order whatever the execution backend, so
    seeded runs are reproducible for any thread count.
    """
    if threads <= 1 or len(jobs) <= 1:
        return [worker(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, jobs))
