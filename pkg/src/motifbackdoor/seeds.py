"""Stage-seed derivation.

Every random stage of a run draws from ``derive_seed(run_seed, stage)``, so a
stage's randomness never depends on how much another stage consumed.
"""

from __future__ import annotations

import zlib

import numpy as np


def derive_seed(run_seed: int, stage: str) -> int:
    ss = np.random.SeedSequence([int(run_seed) & 0xFFFFFFFF, zlib.crc32(stage.encode())])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def stage_rng(run_seed: int, stage: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(run_seed, stage))
