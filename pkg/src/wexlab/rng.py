"""Seeded random streams.

Every trial draws from its own PCG64 stream derived from
``SeedSequence(seed, spawn_key=(trial,))``, so trials can run in any order
or in parallel and still reproduce bit for bit.
"""

from __future__ import annotations

import contextvars
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

__all__ = ["trial_rng", "run_trials"]


def trial_rng(seed: int, trial: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(trial),))))


def run_trials(fn: Callable[[int, np.random.Generator], object], n_trials: int, seed: int, *,
               workers: int = 1) -> Sequence:
    """fn(trial, rng) for every trial; results come back in trial order.

    Worker threads run in a copy of the caller's context, so settings such
    as the check tolerance carry over.
    """
    if workers <= 1:
        return [fn(t, trial_rng(seed, t)) for t in range(n_trials)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        futures = [ex.submit(contextvars.copy_context().run, fn, t, trial_rng(seed, t)) for t in range(n_trials)]
        return [f.result() for f in futures]
