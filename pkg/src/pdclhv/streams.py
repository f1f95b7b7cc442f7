"""Counter-derived random streams.

A stream is a pure function of (seed, role, block): the same triple always
yields the same Philox generator, so trial blocks can be evaluated in any
order or on any worker without changing a single draw.
"""

from __future__ import annotations

import enum

import numpy as np


class Role(enum.IntEnum):
    BEAM1 = 0
    BEAM2 = 1
    CLICKS = 2
    INTENSITY = 3


def stream(seed: int, role: Role | int, block: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(role), int(block)))
    return np.random.Generator(np.random.Philox(ss))


def block_layout(n_trials: int, block_size: int) -> list[tuple[int, int, int]]:
    """(block index, first trial, trial count) covering ``n_trials``."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    out = []
    for b, start in enumerate(range(0, n_trials, block_size)):
        out.append((b, start, min(block_size, n_trials - start)))
    return out
