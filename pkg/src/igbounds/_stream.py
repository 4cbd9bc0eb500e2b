"""Counter-based uniform stream shared by the Monte Carlo and optimizer code.

The generator is a fixed 64-bit mixing function (the splitmix64 finalizer
applied twice) of ``(seed, trial_index, draw_index)``.  It is stateless, so
any draw can be produced in isolation: results never depend on execution
order, chunking, thread count or platform.  The mapping is frozen; golden
tests pin its output.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_K1 = np.uint64(0xBF58476D1CE4E5B9)
_K2 = np.uint64(0x94D049BB133111EB)
_MASK = 0xFFFFFFFFFFFFFFFF


def _finalize(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _K1
    z = z ^ (z >> np.uint64(27))
    z = z * _K2
    z = z ^ (z >> np.uint64(31))
    return z


def counter_hash(seed: int, trial, draw) -> np.ndarray:
    """64-bit hash of (seed, trial, draw); trial/draw broadcast as uint64 arrays."""
    with np.errstate(over="ignore"):
        s = np.uint64(int(seed) & _MASK)
        t = np.asarray(trial, dtype=np.uint64)
        d = np.asarray(draw, dtype=np.uint64)
        key = _finalize(s + _GOLDEN * (t + np.uint64(1)))
        return _finalize(key + _GOLDEN * (d + np.uint64(1)))


def uniforms(seed: int, trial, draw) -> np.ndarray:
    """Uniforms in [0, 1) from the top 53 bits of the counter hash."""
    return (counter_hash(seed, trial, draw) >> np.uint64(11)).astype(np.float64) * 2.0**-53
