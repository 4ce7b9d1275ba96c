"""Counter-based uniforms keyed by ``(seed, trial, draw)``.

Every trial owns an independent stream: draw ``k`` of trial ``t`` under
``seed`` is a pure function of the triple, so results do not depend on how
trials are batched or distributed over workers. The mixing function is the
SplitMix64 finalizer applied along a chain over the three words.

numpy's bit generators have no vectorized random access by key, hence this
module.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_TRIAL = 0xD1B54A32D192ED03
_DRAW = 0xABC98388FB8FAC03
_SCALE = 2.0 ** -53


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def bits(seed: int, trial: np.ndarray, draw: int | np.ndarray) -> np.ndarray:
    """64 random bits per ``(seed, trial, draw)`` element."""
    with np.errstate(over="ignore"):
        key = _mix(np.asarray([(seed + _GOLDEN) & MASK64], dtype=np.uint64))
        t = np.asarray(trial, dtype=np.uint64)
        d = np.asarray(draw, dtype=np.uint64)
        z = _mix(key ^ (t * np.uint64(_TRIAL) + np.uint64(_GOLDEN)))
        z = _mix(z + d * np.uint64(_DRAW) + np.uint64(_GOLDEN))
    return z


def uniform(seed: int, trial: np.ndarray, draw: int | np.ndarray) -> np.ndarray:
    """Uniforms on the open interval (0, 1): ``((bits >> 11) + 0.5) * 2**-53``."""
    return ((bits(seed, trial, draw) >> np.uint64(11)).astype(np.float64) + 0.5) * _SCALE


def exponential(seed: int, trial: np.ndarray, draw: int | np.ndarray, rate: np.ndarray) -> np.ndarray:
    """Inverse-CDF exponential draws: ``-log(u) / rate``."""
    return -np.log(uniform(seed, trial, draw)) / rate


def shuffle_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Seeded generator for non-kernel randomness (shuffles, random fixtures)."""
    return np.random.default_rng([seed & MASK64, stream])
