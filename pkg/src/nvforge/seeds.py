"""Deterministic seed derivation.

Every stochastic routine in the package takes an explicit seed. Composite
stages (grids, campaigns) derive per-unit seeds with :func:`derive_seed`, the
single stated mixing function of the package:

    SeedSequence(entropy=master_seed, spawn_key=key)

SeedSequence hashing is order-free: the child for site (row, col) depends only
on the master seed and the key tuple, never on how many other children exist
or in what order they are drawn. That makes grid and campaign results
independent of evaluation order and safe to parallelize.

Stage indices used by the campaign, by convention:
0 = fabrication, 1 = anneal, 2 = photon streams (one sub-key per emitter),
3 = beamsplitter, 4 = background.
"""

from __future__ import annotations

import numpy as np

__all__ = ["derive_seed", "rng_from"]


def derive_seed(master_seed: int, *key: int) -> np.random.SeedSequence:
    """Derive the SeedSequence for one unit of work.

    Parameters
    ----------
    master_seed : int
        Non-negative campaign master seed.
    *key : int
        Identifying integers, e.g. (row, col, stage).
    """
    if master_seed < 0:
        raise ValueError("master_seed must be non-negative")
    return np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))


def rng_from(seed) -> np.random.Generator:
    """Build a PCG64 generator from an int, SeedSequence, or Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
