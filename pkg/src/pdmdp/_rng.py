"""Counter-based per-path random streams (splitmix64).

Every simulated path owns an independent stream keyed by
``(master seed, stream tag, path index)``, so estimates do not depend on
how paths are chunked across workers, and serial and parallel runs agree
bit for bit.  The generator is splitmix64: a 64-bit Weyl sequence pushed
through a strong avalanche finalizer.  The same source runs compiled
(numba) or as plain numpy-uint64 Python; the two produce identical streams.
"""

from __future__ import annotations

import numpy as np

from ._backend import jit, kernel_errstate

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_SALT = np.uint64(0x8FB6E8F46EB9BD93)

_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)

_U53_INV = 2.0 ** -53


@jit
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@jit
def stream_state(seed, tag, index):
    """Initial state of the (seed, tag, index) stream."""
    s = _mix64(np.uint64(seed) ^ _SALT)
    s = _mix64(s + _GOLDEN * (np.uint64(tag) + np.uint64(1)))
    s = _mix64(s + _GOLDEN * (np.uint64(index) + np.uint64(1)))
    return s


@jit
def next_uint64(state):
    state = state + _GOLDEN
    return state, _mix64(state)


@jit
def next_uniform(state):
    """Advance the stream; return (state, u) with u in [0, 1)."""
    state, z = next_uint64(state)
    return state, (z >> _S11) * _U53_INV


class SplitMixStream:
    """Object handle on one path stream, for the object-level simulator.

    >>> rng = SplitMixStream(42)
    >>> 0.0 <= rng.uniform() < 1.0
    True
    """

    __slots__ = ("state",)

    def __init__(self, seed: int, tag: int = 0, index: int = 0):
        with kernel_errstate():
            self.state = stream_state(seed, tag, index)

    def uniform(self) -> float:
        with kernel_errstate():
            self.state, u = next_uniform(self.state)
        return u

    def exponential(self) -> float:
        # -log1p(-u) maps u in [0,1) to (0, inf]; canonical sojourn threshold.
        return -np.log1p(-self.uniform())
