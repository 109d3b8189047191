"""Stateless Philox4x32-10 generator evaluated on arrays of counters.

Every random number is a pure function of (key, counter), so a coefficient
can be regenerated in isolation and trial batches can be scheduled in any
order without changing a single bit.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


def philox4x32(counter, key, rounds: int = 10):
    """Apply the Philox4x32 bijection.

    counter: four uint32-valued arrays (broadcastable); key: two ints.
    Returns four uint64 arrays holding 32-bit words.
    """
    words = np.broadcast_arrays(*(np.asarray(c, dtype=np.uint64) for c in counter))
    c0, c1, c2, c3 = (w & _MASK for w in words)
    tmp = np.empty_like(c0)
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for i in range(rounds):
        if i:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        # products fit in 64 bits; update in place to avoid temporaries
        c0 *= _M0
        c2 *= _M1
        np.right_shift(c2, _S32, out=tmp)
        c1 ^= tmp
        c1 ^= np.uint64(k0)
        np.right_shift(c0, _S32, out=tmp)
        c3 ^= tmp
        c3 ^= np.uint64(k1)
        c0 &= _MASK
        c2 &= _MASK
        c0, c1, c2, c3 = c1, c2, c3, c0
    return c0, c1, c2, c3


def _unit_open(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    # 53 random bits -> (0, 1), never 0 so log() is safe
    bits = ((hi << _S32) | lo) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


def complex_normals(seed: int, stream, index) -> np.ndarray:
    """Standard complex Gaussians N_C(0,1) keyed by (seed, stream, index).

    ``stream`` and ``index`` are broadcast against each other; both must be
    non-negative 64-bit integers.  The modulus squared is an exact Exp(1)
    transform and the phase is uniform, so E|a|^2 = 1 and the real and
    imaginary parts are independent N(0, 1/2).
    """
    stream = np.asarray(stream, dtype=np.uint64)
    index = np.asarray(index, dtype=np.uint64)
    stream, index = np.broadcast_arrays(stream, index)
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    w0, w1, w2, w3 = philox4x32(
        (index & _MASK, index >> _S32, stream & _MASK, stream >> _S32),
        (seed & 0xFFFFFFFF, seed >> 32),
    )
    u1 = _unit_open(w0, w1)
    u2 = _unit_open(w2, w3)
    return np.sqrt(-np.log(u1)) * np.exp(2j * np.pi * u2)
