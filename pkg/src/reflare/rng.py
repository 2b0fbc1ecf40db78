"""Deterministic random streams.

All randomness flows through counter-based Philox generators keyed by a
64-bit seed, so identical seeds reproduce identical sample sequences on
every platform. Parallel work items derive independent child streams from
(seed, index), which makes serial and threaded runs agree byte for byte.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn_rng(seed: int, index: int) -> np.random.Generator:
    """Child stream for work item ``index`` of a run seeded with ``seed``."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))
