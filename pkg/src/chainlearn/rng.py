"""Counter-based random streams.

Every random quantity in the library is a pure function of
(master seed, lane, index), so replications are independent streams that can
be generated in any order, in parallel, with bitwise-reproducible results.
The word function is a splitmix64-style finalizer applied to the keyed
counter; lanes are decorrelated by large odd multipliers.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_LANE_MUL = 0xA24BAED4963EE407
_INDEX_MUL = 0x9FB21C651E98DF25
_PURPOSE_MUL = 0xD6E8FEB86659FD93


def _mix(x: int) -> int:
    x &= _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return (x ^ (x >> 31)) & _MASK


def derive(seed: int, purpose: int) -> int:
    """Sub-seed for an independent purpose lane (trajectories, probes, ...)."""
    return _mix((seed ^ (purpose * _PURPOSE_MUL)) & _MASK)


def word(seed: int, lane: int, index: int) -> int:
    """64-bit word at position (lane, index) of the stream keyed by seed."""
    h = _mix((seed ^ (lane * _LANE_MUL)) & _MASK)
    return _mix((h ^ (index * _INDEX_MUL)) & _MASK)


def bit(seed: int, lane: int, index: int) -> int:
    return word(seed, lane, index) >> 63


def uniform(seed: int, lane: int, index: int) -> float:
    """Uniform value in [0, 1) with 53 random bits."""
    return (word(seed, lane, index) >> 11) * 2.0**-53


# Vectorized counterparts.  numpy >= 2 keeps Python-int operands in uint64,
# and unsigned arithmetic wraps mod 2^64, matching the scalar versions bit
# for bit.

def _mix_np(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64, copy=True)
    x ^= x >> np.uint64(30)
    x *= np.uint64(0xBF58476D1CE4E5B9)
    x ^= x >> np.uint64(27)
    x *= np.uint64(0x94D049BB133111EB)
    x ^= x >> np.uint64(31)
    return x


def word_array(seed: int, lanes: np.ndarray, indices: np.ndarray) -> np.ndarray:
    lanes = np.asarray(lanes, dtype=np.uint64)
    indices = np.asarray(indices, dtype=np.uint64)
    h = _mix_np(np.uint64(seed & _MASK) ^ (lanes * np.uint64(_LANE_MUL)))
    return _mix_np(h ^ (indices * np.uint64(_INDEX_MUL)))


def bit_array(seed: int, lanes: np.ndarray, indices: np.ndarray) -> np.ndarray:
    return (word_array(seed, lanes, indices) >> np.uint64(63)).astype(np.uint8)


def uniform_array(seed: int, lanes: np.ndarray, indices: np.ndarray) -> np.ndarray:
    return (word_array(seed, lanes, indices) >> np.uint64(11)) * 2.0**-53


# Purpose tags used across the library.
TRAJECTORY = 1
INITIAL_STATE = 2
PAIR_SAMPLING = 3
WITNESS = 4
POISSON = 5
PROBE = 6
