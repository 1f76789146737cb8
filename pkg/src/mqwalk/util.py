"""Small shared helpers: seeded RNG derivation and deterministic parallel maps."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def derive_rng(master_seed: int, *key) -> np.random.Generator:
    """Deterministic child generator for (master_seed, key).

    Mixing function: numpy SeedSequence with the master seed as entropy and the
    integer key tuple as spawn_key, so trial t of a run seeded with s always sees
    the same stream regardless of execution order.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def parallel_map(fn, items, threads: int = 1):
    """Map preserving input order; reductions over the result stay deterministic."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def stable_sum(values):
    """Kahan-compensated sum; used where reduction order must not matter to 1e-12."""
    total = 0.0 + 0.0j
    comp = 0.0 + 0.0j
    for v in values:
        y = v - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total
