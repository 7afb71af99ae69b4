"""Named, splittable RNG substreams.

Every random draw in the package comes from a stream addressed by
(seed, *path) integers, so absorption/fading/misalignment draws of a
given trial are reproducible independently of evaluation order and of
how work is parallelized.
"""
from __future__ import annotations

import numpy as np

# component ids used as the last path element
ABSORPTION = 1
FADING = 2
MISALIGNMENT = 3
PROTOCOL = 4
ADMISSION = 5


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for (seed, *path); stable across runs."""
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tuple(int(p) for p in path)))
