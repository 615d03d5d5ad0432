"""Reproducible random number generation.

All randomness in the package flows through PCG64 generators derived from a
single integer seed via ``numpy.random.SeedSequence`` spawn keys, so any
(seed, key...) pair names the same stream on every platform. Gaussian draws
use the inverse-CDF transform of uniforms rather than the generator's native
ziggurat method: the uniforms are bit-stable PCG64 output and ``ndtri`` is a
pure software approximation, which keeps committed fixtures bit-stable.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_U53 = float(1 << 53)


def seed_sequence(base_seed: int, *key: int) -> np.random.SeedSequence:
    """SeedSequence for ``base_seed`` refined by an integer spawn key."""
    return np.random.SeedSequence(entropy=base_seed, spawn_key=tuple(key))


def generator(base_seed: int, *key: int) -> np.random.Generator:
    """Named PCG64 stream for (base_seed, key...)."""
    return np.random.Generator(np.random.PCG64(seed_sequence(base_seed, *key)))


def uniform_open(gen: np.random.Generator, size=None) -> np.ndarray:
    """Uniforms strictly inside (0, 1), safe as inverse-CDF arguments."""
    return gen.integers(1, 1 << 53, size=size) / _U53


def normal(gen: np.random.Generator, size=None, mean: float = 0.0, sd: float = 1.0):
    """Gaussian draws via the inverse normal CDF."""
    return mean + sd * ndtri(uniform_open(gen, size=size))
