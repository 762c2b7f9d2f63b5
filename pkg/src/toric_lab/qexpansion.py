"""Integer q-expansions of eta products by Kronecker substitution.

A truncated power series with signed integer coefficients is packed into one
big integer (one fixed-width limb per coefficient), multiplied with gmpy2,
and unpacked with an offset so that negative limbs decode without a carry
walk.  This is the standard trick for exact polynomial products in Python.
"""

from functools import lru_cache

import gmpy2
import numpy as np

__all__ = ["pentagonal_series", "series_mul", "series_pow", "eta_product"]


def pentagonal_series(n):
    """Coefficients of prod_{k>=1} (1 - q^k) up to q^n (Euler)."""
    out = np.zeros(n + 1, dtype=np.int64)
    k = 0
    while True:
        hit = False
        for j in (k, -k) if k else (0,):
            e = j * (3 * j - 1) // 2
            if e <= n:
                out[e] = -1 if j % 2 else 1
                hit = True
        if not hit:
            break
        k += 1
    return out


def _limbs(a, bits):
    """(len(a), bits // 64) uint64 limb matrix of |a|, plus the sign mask."""
    width = bits // 64
    if a.dtype != object:
        neg = a < 0
        mag = np.abs(a).astype(np.uint64)
        if width == 1:
            return mag.reshape(-1, 1), neg
        mag = mag.astype(object)
    else:
        neg = np.array([v < 0 for v in a], dtype=bool)
        mag = np.array([abs(v) for v in a], dtype=object)
    mask = (1 << 64) - 1
    cols = [((mag >> (64 * j)) & mask).astype(np.uint64) for j in range(width)]
    return np.column_stack(cols), neg


def _pack(a, bits):
    limbs, neg = _limbs(a, bits)
    pos = limbs.copy()
    pos[neg] = 0
    negs = limbs.copy()
    negs[~neg] = 0
    p = int.from_bytes(np.ascontiguousarray(pos).tobytes(), "little")
    q = int.from_bytes(np.ascontiguousarray(negs).tobytes(), "little")
    return gmpy2.mpz(p) - gmpy2.mpz(q)


@lru_cache(maxsize=8)
def _offset(n, bits):
    limb = (1 << (bits - 1)).to_bytes(bits // 8, "little")
    return gmpy2.mpz(int.from_bytes(limb * n, "little"))


def _unpack(value, n, bits):
    total = bits * n
    m = (value + _offset(n, bits)) & ((gmpy2.mpz(1) << total) - 1)
    raw = int(m).to_bytes(total // 8, "little")
    u = np.frombuffer(raw, dtype=np.uint64).reshape(n, bits // 64)
    if bits == 64:
        return (u[:, 0] ^ np.uint64(1 << 63)).view(np.int64).copy()
    out = np.zeros(n, dtype=object)
    for j in range(bits // 64):
        out = out + (u[:, j].astype(object) << (64 * j))
    return out - (1 << (bits - 1))


def series_mul(a, b, n, bits=64):
    """(a * b) mod q^(n+1); every output coefficient must fit in bits - 1 bits."""
    prod = _pack(a[: n + 1], bits) * _pack(b[: n + 1], bits)
    return _unpack(prod, n + 1, bits)


def series_pow(a, e, n, bits=64):
    result = None
    base = a[: n + 1]
    while e:
        if e & 1:
            result = base if result is None else series_mul(result, base, n, bits)
        e >>= 1
        if e:
            base = series_mul(base, base, n, bits)
    if result is None:
        result = np.zeros(n + 1, dtype=np.int64)
        result[0] = 1
    return result


def _dilate(a, d, n):
    out = np.zeros(n + 1, dtype=a.dtype)
    if a.dtype == object:
        out[:] = 0
    m = n // d
    out[: d * m + 1 : d] = a[: m + 1]
    return out


def eta_product(spec, n, bits=64):
    """Coefficients a_1..a_n of q^s prod_d prod_k (1 - q^{dk})^{e_d}.

    spec is a sequence of (d, e_d) with nonnegative exponents and
    s = sum(d e_d) / 24 a positive integer.  Returns an array indexed by n
    (entry 0 is zero).
    """
    shift, rem = divmod(sum(d * e for d, e in spec), 24)
    if rem or shift < 1:
        raise ValueError("eta product must have integral positive q-order")
    m = n - shift
    P = pentagonal_series(m)
    acc = None
    for d, e in spec:
        if e < 0:
            raise ValueError("negative eta exponents are not supported")
        f = _dilate(series_pow(P[: m // d + 1], e, m // d, bits), d, m)
        acc = f if acc is None else series_mul(acc, f, m, bits)
    out = np.zeros(n + 1, dtype=acc.dtype)
    if acc.dtype == object:
        out[:] = 0
    out[shift:] = acc[: m + 1]
    return out
