"""Philox4x64-10 counter-based generator.

The block function is written once with plain uint64 operators so the same
source runs on numpy arrays (vectorised fallback) and compiles under numba
for scalars.  Output matches ``numpy.random.Philox`` block for block, which
the tests use as the reference.

Stream layout used throughout the package: key = (seed, tag), counter =
(draw index, path index, 0, 0).  A path's randomness therefore depends only
on (seed, tag, path index), never on scheduling.
"""

import numpy as np

from .._backend import HAVE_NUMBA

_M32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_MUL0 = np.uint64(0xD2E7470EE14C6C93)
_MUL1 = np.uint64(0xCA5A826395121157)
_WEYL0 = np.uint64(0x9E3779B97F4A7C15)
_WEYL1 = np.uint64(0xBB67AE8584CAA73B)
_INV53 = 1.0 / 9007199254740992.0


def _mulhilo(a, b):
    lo = a * b
    a_lo = a & _M32
    a_hi = a >> _S32
    b_lo = b & _M32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    mid = (ll >> _S32) + (lh & _M32) + (hl & _M32)
    hi = a_hi * b_hi + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    return hi, lo


def _philox4x64(c0, c1, c2, c3, k0, k1):
    for rnd in range(10):
        if rnd > 0:
            k0 = k0 + _WEYL0
            k1 = k1 + _WEYL1
        hi0, lo0 = _mulhilo(_MUL0, c0)
        hi1, lo1 = _mulhilo(_MUL1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def philox_block(c0, c1, c2, c3, k0, k1):
    """Four uint64 outputs for one counter/key block (numpy arrays or scalars)."""
    with np.errstate(over="ignore"):
        return _philox4x64(
            np.asarray(c0, dtype=np.uint64),
            np.asarray(c1, dtype=np.uint64),
            np.asarray(c2, dtype=np.uint64),
            np.asarray(c3, dtype=np.uint64),
            np.asarray(k0, dtype=np.uint64),
            np.asarray(k1, dtype=np.uint64),
        )


def to_unit_open(x):
    """Map uint64 words to doubles strictly inside (0, 1)."""
    return ((x >> _S11).astype(np.float64) + 0.5) * _INV53


def uniforms(seed, tag, draw, path):
    """Vectorised: four (0,1) uniforms per element for the given draw/path ids."""
    draw = np.asarray(draw, dtype=np.uint64)
    path = np.asarray(path, dtype=np.uint64)
    zero = np.zeros_like(draw)
    words = philox_block(draw, path, zero, zero, np.uint64(seed), np.uint64(tag))
    return tuple(to_unit_open(w) for w in words)


if HAVE_NUMBA:
    import numba

    _mulhilo_nb = numba.njit(cache=True, inline="always")(_mulhilo)

    @numba.njit(cache=True)
    def _philox_nb(c0, c1, c2, c3, k0, k1):
        for rnd in range(10):
            if rnd > 0:
                k0 = k0 + _WEYL0
                k1 = k1 + _WEYL1
            hi0, lo0 = _mulhilo_nb(_MUL0, c0)
            hi1, lo1 = _mulhilo_nb(_MUL1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        return c0, c1, c2, c3

    @numba.njit(cache=True)
    def unit_open_nb(x):
        return (np.float64(x >> _S11) + 0.5) * _INV53

    @numba.njit(cache=True)
    def uniforms_nb(seed, tag, draw, path):
        """Scalar: four (0,1) uniforms for (seed, tag, draw, path)."""
        w0, w1, w2, w3 = _philox_nb(np.uint64(draw), np.uint64(path), np.uint64(0), np.uint64(0),
                                    np.uint64(seed), np.uint64(tag))
        return unit_open_nb(w0), unit_open_nb(w1), unit_open_nb(w2), unit_open_nb(w3)

    @numba.njit(cache=True)
    def philox_block_nb(c0, c1, c2, c3, k0, k1):
        return _philox_nb(np.uint64(c0), np.uint64(c1), np.uint64(c2), np.uint64(c3),
                          np.uint64(k0), np.uint64(k1))
