"""Seeded random number generation.

All randomness in the package flows through Philox, a counter-based 64-bit
generator.  Experiments derive independent per-trial streams by spawning
from a single root ``SeedSequence``, so trial-level parallelism cannot
perturb determinism.  Gaussian variates use numpy's ziggurat sampler.
"""

from __future__ import annotations

import numpy as np


def generator(seed: int) -> np.random.Generator:
    """Return a Philox generator keyed deterministically by ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn_generators(seed: int, n: int) -> list[np.random.Generator]:
    """Return ``n`` independent Philox generators derived from ``seed``.

    The streams are stable: the k-th child is the same across runs and
    does not depend on how many siblings are consumed.
    """
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.Philox(c)) for c in children]
