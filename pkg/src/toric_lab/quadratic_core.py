"""Imaginary quadratic fields through reduced binary quadratic forms.

The class group of the maximal order of Q(sqrt(-D)) is realised on reduced
forms of discriminant -D.  Elements are addressed by their index in the
sorted list of reduced forms; composition goes through an explicit table.
"""

from collections import namedtuple
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import product
from math import gcd, isqrt

import numpy as np

from .numtheory import (
    egcd,
    factorize,
    is_fundamental,
    is_prime,
    kronecker as _kronecker,
    sqrt_mod_4p,
)

__all__ = [
    "QuadField",
    "BinaryForm",
    "ClassGroup",
    "ClassCharacter",
    "PrimeSplitting",
    "kronecker",
    "reduce_form",
    "reduced_forms",
    "compose",
    "class_group",
    "characters",
    "prime_splitting",
    "a_chi",
    "ideal_class_counts",
    "ideal_class_sums",
    "induced_orthogonality_check",
]


def kronecker(D_signed, n):
    """Kronecker symbol (D_signed | n) for a discriminant D_signed."""
    if D_signed % 4 not in (0, 1):
        raise ValueError(f"{D_signed} is not a discriminant")
    return _kronecker(D_signed, n)


class QuadField:
    """E = Q(sqrt(-D)) for a fundamental discriminant -D with D > 4."""

    __slots__ = ("D", "fundamental")

    def __init__(self, D):
        D = int(D)
        if D <= 3:
            raise ValueError("D must exceed 3")
        if not is_fundamental(D):
            raise ValueError(f"-{D} is not a fundamental discriminant")
        if D == 4:
            raise ValueError("D = 4 has extra units and is excluded")
        self.D = D
        self.fundamental = True

    @property
    def disc(self):
        return -self.D

    @property
    def units(self):
        return 2

    def eta(self, n):
        return _kronecker(-self.D, n)

    def __eq__(self, other):
        return isinstance(other, QuadField) and other.D == self.D

    def __hash__(self):
        return hash(("QuadField", self.D))

    def __repr__(self):
        return f"QuadField({self.D})"


class BinaryForm(namedtuple("BinaryForm", "a b c")):
    """Positive definite form a x^2 + b x y + c y^2."""

    __slots__ = ()

    @property
    def disc(self):
        return self.b * self.b - 4 * self.a * self.c

    def is_reduced(self):
        a, b, c = self
        if not (abs(b) <= a <= c):
            return False
        if (abs(b) == a or a == c) and b < 0:
            return False
        return True

    def inverse(self):
        return reduce_form(self.a, -self.b, self.c)

    def __call__(self, x, y):
        return self.a * x * x + self.b * x * y + self.c * y * y


def reduce_form(a, b, c):
    """Reduced representative of the SL2(Z)-class of (a, b, c)."""
    if a <= 0 or b * b - 4 * a * c >= 0:
        raise ValueError("form must be positive definite")
    D = 4 * a * c - b * b
    while True:
        # move b into (-a, a]
        k = (a - b) // (2 * a)
        b += 2 * a * k
        c = (b * b + D) // (4 * a)
        if a > c:
            a, b, c = c, -b, a
            continue
        if a == c and b < 0:
            b = -b
        return BinaryForm(a, b, c)


@lru_cache(maxsize=512)
def _reduced_forms(D):
    out = []
    amax = isqrt(D // 3)
    for a in range(1, amax + 1):
        for b in range(-a + 1, a + 1):
            if (b * b + D) % (4 * a):
                continue
            c = (b * b + D) // (4 * a)
            if c < a:
                continue
            if a == c and b < 0:
                continue
            out.append(BinaryForm(a, b, c))
    out.sort(key=lambda f: (f.a, f.b))
    return tuple(out)


def reduced_forms(field):
    return list(_reduced_forms(field.D))


def compose(f, g):
    """Dirichlet composition of two forms of equal discriminant, reduced."""
    if f.disc != g.disc:
        raise ValueError("discriminant mismatch")
    disc = f.disc
    a1, b1, _ = f
    a2, b2, _ = g
    s = (b1 + b2) // 2
    d1, u1, v1 = egcd(a1, a2)
    d, x, w = egcd(d1, s)
    u, v = x * u1, x * v1
    a3 = a1 * a2 // (d * d)
    b3 = (u * a1 * b2 + v * a2 * b1 + w * (b1 * b2 + disc) // 2) // d
    b3 %= 2 * a3
    c3 = (b3 * b3 - disc) // (4 * a3)
    return reduce_form(a3, b3, c3)


class ClassGroup:
    """Finite abelian group of reduced forms with an explicit table."""

    def __init__(self, field):
        self.field = field
        self.elements = reduced_forms(field)
        self.h = len(self.elements)
        self.index = {f: i for i, f in enumerate(self.elements)}
        self.identity = 0  # the principal form sorts first (a = 1)
        self._build_table()
        self.cycle_structure = self._peel()
        self._exponents()

    def _build_table(self):
        h = self.h
        els = self.elements
        table = np.zeros((h, h), dtype=np.int64)
        for i in range(h):
            for j in range(i, h):
                k = self.index[compose(els[i], els[j])]
                table[i, j] = table[j, i] = k
        self.table = table
        self.inv = np.array([self.index[f.inverse()] for f in els], dtype=np.int64)

    def mul(self, i, j):
        return int(self.table[i, j])

    def power(self, i, n):
        n %= self.order(i)
        out, base = self.identity, i
        while n:
            if n & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            n >>= 1
        return out

    def order(self, i):
        k, x = 1, i
        while x != self.identity:
            x = self.mul(x, i)
            k += 1
        return k

    def _peel(self):
        members = {self.identity}
        structure = []
        while len(members) < self.h:
            best, best_m = None, 0
            for g in range(self.h):
                m, x = 1, g
                while x not in members:
                    x = self.mul(x, g)
                    m += 1
                if m > best_m:
                    best, best_m = g, m
            # lift to an element of exact order best_m
            gen = None
            for t in sorted(members):
                cand = self.mul(best, t)
                if self.power_raw(cand, best_m) == self.identity:
                    gen = cand
                    break
            if gen is None:
                raise RuntimeError("class group peeling failed")
            new = set()
            x = self.identity
            for _ in range(best_m):
                for t in members:
                    new.add(self.mul(x, t))
                x = self.mul(x, gen)
            members = new
            structure.append((gen, best_m))
        return structure

    def power_raw(self, i, n):
        out = self.identity
        for _ in range(n):
            out = self.mul(out, i)
        return out

    def _exponents(self):
        vecs = [None] * self.h
        gens = [g for g, _ in self.cycle_structure]
        orders = [m for _, m in self.cycle_structure]
        for exps in product(*[range(m) for m in orders]):
            x = self.identity
            for g, e in zip(gens, exps):
                for _ in range(e):
                    x = self.mul(x, g)
            vecs[x] = exps
        if any(v is None for v in vecs):
            raise RuntimeError("cycle structure is not a direct product")
        self.exponent_vectors = vecs

    def element_of(self, form):
        return self.index[reduce_form(*form)]

    def __len__(self):
        return self.h

    def __repr__(self):
        cyc = "x".join(str(m) for _, m in self.cycle_structure) or "1"
        return f"ClassGroup(D={self.field.D}, h={self.h}, Z/{cyc})"


@lru_cache(maxsize=256)
def _class_group(D):
    return ClassGroup(QuadField(D))


def class_group(field):
    return _class_group(field.D)


class ClassCharacter:
    """A character of the class group given by an exponent vector."""

    lambda_chi = 0.0

    def __init__(self, group, exponent_vector, index=None):
        self.group = group
        orders = [m for _, m in group.cycle_structure]
        self.exponent_vector = tuple(int(c) % m for c, m in zip(exponent_vector, orders))
        self.index = index

    def phase(self, g):
        """chi(g) = exp(2 pi i * phase), phase as an exact fraction mod 1."""
        t = Fraction(0)
        for c, e, (_, m) in zip(self.exponent_vector, self.group.exponent_vectors[g],
                                self.group.cycle_structure):
            t += Fraction(c * e, m)
        return t - (t.numerator // t.denominator)

    @cached_property
    def values(self):
        ph = np.array([float(self.phase(g)) for g in range(self.group.h)])
        vals = np.exp(2j * np.pi * ph)
        # snap real characters onto exact +-1
        exact = np.isclose(ph * 2, np.round(ph * 2), atol=0)
        vals[exact] = np.round(vals[exact].real)
        return vals

    def __call__(self, g):
        return self.values[g]

    def conj(self):
        return ClassCharacter(self.group, [-c for c in self.exponent_vector])

    def power(self, n):
        return ClassCharacter(self.group, [n * c for c in self.exponent_vector])

    @property
    def is_trivial(self):
        return not any(self.exponent_vector)

    @property
    def is_real(self):
        return all((2 * c) % m == 0 for c, (_, m) in
                   zip(self.exponent_vector, self.group.cycle_structure))

    def __eq__(self, other):
        return (isinstance(other, ClassCharacter) and other.group is self.group
                and other.exponent_vector == self.exponent_vector)

    def __hash__(self):
        return hash((self.group.field.D, self.exponent_vector))

    def __repr__(self):
        return f"ClassCharacter(D={self.group.field.D}, {self.exponent_vector})"


def characters(group):
    orders = [m for _, m in group.cycle_structure]
    return [ClassCharacter(group, v, index=i)
            for i, v in enumerate(product(*[range(m) for m in orders]))]


PrimeSplitting = namedtuple("PrimeSplitting", "p kind ideal_class")


def prime_splitting(field, p):
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    D = field.D
    e = _kronecker(-D, p)
    if e == -1:
        return PrimeSplitting(p, "inert", None)
    b = sqrt_mod_4p(D, p)
    cls = class_group(field).element_of((p, b, (b * b + D) // (4 * p)))
    return PrimeSplitting(p, "split" if e == 1 else "ramified", cls)


@lru_cache(maxsize=256)
def _splitting_table(D, limit):
    field = QuadField(D)
    from .numtheory import primes_up_to

    return {p: prime_splitting(field, p) for p in primes_up_to(limit)}


def splitting_data(field, limit):
    """prime_splitting for every p <= limit (cached)."""
    return _splitting_table(field.D, int(limit))


def local_factor(chi, sp, k):
    """Contribution of p^k to a_chi."""
    if sp.kind == "inert":
        return 0.0 if k % 2 else 1.0
    z = chi(sp.ideal_class)
    if sp.kind == "ramified":
        return z ** k
    zb = np.conj(z)
    return sum(z ** j * zb ** (k - j) for j in range(k + 1))


def a_chi(chi, n):
    """Dirichlet coefficient of the theta series of chi (a real number)."""
    if n < 1:
        raise ValueError("n must be positive")
    field = chi.group.field
    val = 1.0 + 0j
    for p, k in factorize(n):
        val *= local_factor(chi, prime_splitting(field, p), k)
    return complex(val)


def a_chi_table(chi, N):
    """a_chi(n) for n = 0..N as a real numpy array (entry 0 unused)."""
    from .numtheory import primes_up_to

    field = chi.group.field
    out = np.zeros(N + 1)
    out[1] = 1.0
    # multiplicative sieve over prime powers
    done = np.zeros(N + 1, dtype=bool)
    done[1] = True
    vals = {1: 1.0}
    for p in primes_up_to(N):
        sp = prime_splitting(field, p)
        locals_ = [1.0]
        q = p
        while q <= N:
            locals_.append(float(np.real(local_factor(chi, sp, len(locals_)))))
            q *= p
        new = {}
        for m, v in vals.items():
            q, k = m * p, 1
            while q <= N:
                new[q] = v * locals_[k]
                q *= p
                k += 1
        vals.update(new)
    for m, v in vals.items():
        out[m] = v
    return out


def ideal_class_counts(group, N):
    """Matrix counts[g, n] = number of integral ideals of norm n in class g.

    Representation numbers of the reduced forms give each count up to the
    factor w = 2; conjugate ideals have inverse classes and equal norms, so
    the inversion ambiguity of the form-to-ideal dictionary is harmless.
    """
    D = group.field.D
    counts = np.zeros((group.h, N + 1), dtype=np.int64)
    for g, (a, b, c) in enumerate(group.elements):
        ymax = isqrt(4 * a * N // D) + 1
        for y in range(-ymax, ymax + 1):
            disc = b * b * y * y - 4 * a * (c * y * y - N)
            if disc < 0:
                continue
            r = isqrt(disc)
            lo = (-b * y - r) // (2 * a) - 1
            hi = (-b * y + r) // (2 * a) + 1
            x = np.arange(lo, hi + 1, dtype=np.int64)
            vals = a * x * x + b * x * y + c * y * y
            vals = vals[(vals >= 1) & (vals <= N)]
            counts[g] += np.bincount(vals, minlength=N + 1)
    return counts // 2


def ideal_class_sums(group, weights):
    """sums[k, g] = sum of weights[k, N(a)] over integral ideals a in class g.

    Same enumeration as ideal_class_counts, without materialising the
    h x N count matrix.
    """
    weights = np.atleast_2d(weights)
    N = weights.shape[1] - 1
    D = group.field.D
    out = np.zeros((weights.shape[0], group.h), dtype=weights.dtype)
    for g, (a, b, c) in enumerate(group.elements):
        ymax = isqrt(4 * a * N // D) + 1
        chunks = []
        for y in range(-ymax, ymax + 1):
            disc = b * b * y * y - 4 * a * (c * y * y - N)
            if disc < 0:
                continue
            r = isqrt(disc)
            lo = (-b * y - r) // (2 * a) - 1
            hi = (-b * y + r) // (2 * a) + 1
            x = np.arange(lo, hi + 1, dtype=np.int64)
            vals = a * x * x + b * x * y + c * y * y
            chunks.append(vals[(vals >= 1) & (vals <= N)])
        vals = np.concatenate(chunks)
        out[:, g] = weights[:, vals].sum(axis=1) / 2
    return out


def induced_orthogonality_check(field):
    """Character sums over every ideal of norm < D/4.

    Returns (max |sum| over non-rational ideals, number of ideals checked).
    An ideal is rational when it is generated by a positive integer.
    """
    from .numtheory import primes_up_to

    D = field.D
    group = class_group(field)
    chis = characters(group)
    table = np.array([chi.values for chi in chis])  # chars x elements
    colsum = table.sum(axis=0)
    bound = D / 4
    primes = [prime_splitting(field, p) for p in primes_up_to(int(bound))]

    worst = 0.0
    checked = 0
    # each stack entry: (next prime index, norm, class, rational flag)
    stack = [(0, 1, group.identity, True)]
    while stack:
        start, norm, cls, rational = stack.pop()
        checked += 1
        if not rational:
            worst = max(worst, abs(colsum[cls]))
        for idx in range(start, len(primes)):
            sp = primes[idx]
            p = sp.p
            if norm * p >= bound:
                break
            if sp.kind == "inert":
                q, e = p * p, 2
                while norm * q < bound:
                    stack.append((idx + 1, norm * q, cls, rational))
                    q *= p * p
                continue
            if sp.kind == "ramified":
                q, e, c = p, 1, sp.ideal_class
                while norm * q < bound:
                    stack.append((idx + 1, norm * q, group.mul(cls, c), rational and e % 2 == 0))
                    q *= p
                    e += 1
                    c = group.mul(c, sp.ideal_class)
                continue
            g, gbar = sp.ideal_class, int(group.inv[sp.ideal_class])
            k = 1
            while norm * p ** k < bound:
                # ideals of norm p^k above p: P^i Pbar^(k-i)
                for i in range(k + 1):
                    c = group.identity
                    for _ in range(i):
                        c = group.mul(c, g)
                    for _ in range(k - i):
                        c = group.mul(c, gbar)
                    stack.append((idx + 1, norm * p ** k, group.mul(cls, c),
                                  rational and 2 * i == k))
                k += 1
    return worst, checked
