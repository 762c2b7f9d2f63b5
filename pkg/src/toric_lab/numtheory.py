"""Small integer helpers shared by the other modules."""

from functools import lru_cache
from math import gcd, isqrt

import numpy as np


@lru_cache(maxsize=8)
def _sieve(limit):
    flags = np.ones(limit + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, isqrt(limit) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    return flags


def primes_up_to(limit):
    """All primes p <= limit as a python list."""
    if limit < 2:
        return []
    size = 1 << max(10, int(limit).bit_length())
    return [int(p) for p in np.flatnonzero(_sieve(size)[: limit + 1])]


def is_prime(n):
    if n < 2:
        return False
    if n < 1 << 20:
        return bool(_sieve(1 << 20)[n])
    if n % 2 == 0:
        return False
    for p in primes_up_to(isqrt(n) + 1):
        if n % p == 0:
            return n == p
    return True


@lru_cache(maxsize=4)
def spf_table(limit):
    """Smallest prime factor for every n <= limit (spf[0] = spf[1] = 0)."""
    spf = np.zeros(limit + 1, dtype=np.int64)
    for p in range(2, limit + 1):
        if spf[p] == 0:
            spf[p::p] = np.where(spf[p::p] == 0, p, spf[p::p])
    return spf


def factorize(n):
    """Prime factorization as a sorted list of (p, e)."""
    if n < 1:
        raise ValueError("factorize needs n >= 1")
    out = []
    if n < 1 << 16:
        spf = spf_table(1 << 16)
        while n > 1:
            p = int(spf[n])
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out.append((p, e))
        return out
    p = 2
    while p * p <= n:
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out.append((p, e))
        p += 1 if p == 2 else 2
    if n > 1:
        out.append((n, 1))
    return out


def is_squarefree(n):
    return all(e == 1 for _, e in factorize(n))


def divisor_count(n):
    r = 1
    for _, e in factorize(n):
        r *= e + 1
    return r


def big_omega(n):
    return sum(e for _, e in factorize(n))


def valuation(n, p):
    if n == 0:
        raise ValueError("valuation of 0")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def kronecker(a, n):
    """Kronecker symbol (a | n)."""
    if n == 0:
        raise ValueError("kronecker symbol undefined for n = 0")
    result = 1
    if n < 0:
        n = -n
        if a < 0:
            result = -result
    v = 0
    while n % 2 == 0:
        n //= 2
        v += 1
    if v:
        if a % 2 == 0:
            return 0
        if v % 2 and a % 8 in (3, 5):
            result = -result
    # n is now odd and positive: Jacobi symbol
    a %= n
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def is_fundamental(D):
    """True when -D is a fundamental discriminant (D > 0)."""
    if D <= 0:
        return False
    if D % 4 == 3:
        return is_squarefree(D)
    if D % 4 == 0:
        m = D // 4
        return m % 4 in (1, 2) and is_squarefree(m)
    return False


def fundamental_discriminants(lo, hi):
    """Positive D in [lo, hi] with -D fundamental, excluding D = 3, 4."""
    return [D for D in range(max(lo, 5), hi + 1) if is_fundamental(D)]


def egcd(a, b):
    """(g, x, y) with a*x + b*y = g = gcd(a, b) >= 0."""
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, r = divmod(a, b)
        a, b = b, r
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        return -a, -x0, -y0
    return a, x0, y0


def gcd_list(values):
    g = 0
    for v in values:
        g = gcd(g, int(v))
    return g


def sqrt_mod_4p(D, p):
    """Least b >= 0 with b^2 = -D mod 4p, or None."""
    m = 4 * p
    target = (-D) % m
    for b in range(0, 2 * p + 1):
        if (b * b) % m == target:
            return b
    return None
