"""Counter-based random numbers.

Every draw is a pure function of ``(seed, scenario_id, path_index, step, stream)``
so paths can be generated in any order, in any batch size, on any number of
threads and still come out bit-identical.  The mixer is SplitMix64's finalizer
applied to a chained key; Gaussians come from the inverse normal CDF.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_M53 = 2.0**-53

STREAM_GAUSS = 0
STREAM_POLICY = 1
N_STREAMS = 2

_MASK64 = (1 << 64) - 1


def _mix(x: np.ndarray) -> np.ndarray:
    # uint64 arithmetic wraps modulo 2**64, which is what the mixer wants
    x = x + _GOLDEN
    x = (x ^ (x >> _S30)) * _M1
    x = (x ^ (x >> _S27)) * _M2
    return x ^ (x >> _S31)


def _as_u64(value: int) -> np.uint64:
    return np.uint64(int(value) & _MASK64)


def path_keys(seed: int, scenario_id: int, path_indices) -> np.ndarray:
    """One 64-bit key per path, derived from the seed and scenario."""
    with np.errstate(over="ignore"):
        base = _mix(np.array([_as_u64(seed)], dtype=np.uint64))
        base = _mix(base ^ _as_u64(scenario_id))
        idx = np.asarray(path_indices, dtype=np.uint64)
        return _mix(base ^ idx)


def uniforms(keys: np.ndarray, n_steps: int, stream: int) -> np.ndarray:
    """Uniforms in the open interval (0, 1), shape ``(len(keys), n_steps)``."""
    steps = np.arange(n_steps, dtype=np.uint64) * np.uint64(N_STREAMS) + np.uint64(stream)
    with np.errstate(over="ignore"):
        bits = _mix(keys[:, None] ^ _mix(steps)[None, :])
    return ((bits >> _S11).astype(np.float64) + 0.5) * _TWO_M53


def normals(keys: np.ndarray, n_steps: int) -> np.ndarray:
    return ndtri(uniforms(keys, n_steps, STREAM_GAUSS))
