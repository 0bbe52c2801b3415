"""Deterministic random-stream derivation.

Every random draw in the package flows from one master seed.  Substreams
are derived through :class:`numpy.random.SeedSequence` keyed by a fixed
``(stage, *indices)`` spawn key, so that

* any stage (a tree, a CV fold, a baseline replicate) can be recomputed
  in isolation,
* parallel execution cannot reorder draws, and
* no global RNG state is ever touched.

Stage identifiers are part of the reproducibility contract: never
renumber them.
"""

from __future__ import annotations

import numpy as np

STAGE_SPLIT = 1
STAGE_TREE = 2
STAGE_CV_SHUFFLE = 3
STAGE_CV_FIT = 4
STAGE_BASELINE = 5
STAGE_PERMUTATION = 6
STAGE_SYNTH = 7
STAGE_SEGMENT = 8
STAGE_FIT = 9
STAGE_CV = 10


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return a PCG64 generator for the substream ``(seed; key)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """Collapse a substream key into a plain integer seed (< 2**63)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)
