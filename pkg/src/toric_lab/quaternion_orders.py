"""Definite quaternion algebras ramified at one prime p and at infinity.

Elements of a maximal order are handled in integer coordinates with respect
to the order's basis; multiplication goes through integral structure
constants.  Rational quaternions (Quaternion) are only used at the edges:
building orders and converting elements of other orders.
"""

from collections import namedtuple
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import gcd, isqrt, lcm

import numpy as np

from .lattice import det_int, enumerate_ternary, hnf, short_vectors, solve_rational
from .numtheory import factorize, is_prime, kronecker, primes_up_to
from .quadratic_core import BinaryForm, QuadField, class_group, reduce_form

__all__ = [
    "Quaternion",
    "QuaternionAlgebra",
    "MaximalOrder",
    "RightIdeal",
    "Embedding",
    "algebra_for_prime",
    "maximal_order",
    "sphere_embedding",
    "ideal_from_class",
    "principal_generator",
    "class_action",
    "gamma_canonical",
    "gauss_check",
    "action_orbits",
    "left_ideal_classes",
    "gross_embedding",
    "class_set_map",
]


class QuaternionAlgebra(namedtuple("QuaternionAlgebra", "a b")):
    """(-a, -b): i^2 = -a, j^2 = -b, k = ij = -ji."""

    __slots__ = ()

    def q(self, w, x=0, y=0, z=0):
        return Quaternion(self, (Fraction(w), Fraction(x), Fraction(y), Fraction(z)))

    @property
    def one(self):
        return self.q(1)

    def basis(self):
        return [self.q(1), self.q(0, 1), self.q(0, 0, 1), self.q(0, 0, 0, 1)]


class Quaternion:
    __slots__ = ("alg", "c")

    def __init__(self, alg, coords):
        self.alg = alg
        self.c = tuple(Fraction(v) for v in coords)

    def __mul__(self, other):
        if not isinstance(other, Quaternion):
            o = Fraction(other)
            return Quaternion(self.alg, tuple(v * o for v in self.c))
        a, b = self.alg
        w1, x1, y1, z1 = self.c
        w2, x2, y2, z2 = other.c
        return Quaternion(self.alg, (
            w1 * w2 - a * x1 * x2 - b * y1 * y2 - a * b * z1 * z2,
            w1 * x2 + x1 * w2 + b * (y1 * z2 - z1 * y2),
            w1 * y2 + y1 * w2 + a * (z1 * x2 - x1 * z2),
            w1 * z2 + z1 * w2 + x1 * y2 - y1 * x2,
        ))

    __rmul__ = lambda self, other: self * other  # scalars commute

    def __add__(self, other):
        if not isinstance(other, Quaternion):
            other = self.alg.q(other)
        return Quaternion(self.alg, tuple(u + v for u, v in zip(self.c, other.c)))

    __radd__ = __add__

    def __sub__(self, other):
        return self + other * -1

    def __neg__(self):
        return self * -1

    def __truediv__(self, s):
        s = Fraction(s)
        return Quaternion(self.alg, tuple(v / s for v in self.c))

    def __eq__(self, other):
        return isinstance(other, Quaternion) and self.c == other.c and self.alg == other.alg

    def __hash__(self):
        return hash(self.c)

    def conj(self):
        w, x, y, z = self.c
        return Quaternion(self.alg, (w, -x, -y, -z))

    def norm(self):
        a, b = self.alg
        w, x, y, z = self.c
        return w * w + a * x * x + b * y * y + a * b * z * z

    def trace(self):
        return 2 * self.c[0]

    def inverse(self):
        return self.conj() / self.norm()

    def __repr__(self):
        return "Quaternion(" + ", ".join(str(v) for v in self.c) + ")"


def _aux_prime(p):
    for q in primes_up_to(10 * p + 100):
        if q % 4 == 3 and kronecker(p, q) == -1:
            return q
    raise RuntimeError("no auxiliary prime")


def algebra_for_prime(p):
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    if p == 2:
        return QuaternionAlgebra(1, 1)
    if p % 4 == 3:
        return QuaternionAlgebra(1, p)
    if p % 8 == 5:
        return QuaternionAlgebra(2, p)
    return QuaternionAlgebra(_aux_prime(p), p)


def _rational_hnf(alg, quats):
    """HNF basis (as Quaternions) of the Z-span of rational quaternions."""
    den = 1
    for q in quats:
        for v in q.c:
            den = lcm(den, v.denominator)
    rows = hnf([[int(v * den) for v in q.c] for q in quats])
    return [Quaternion(alg, [Fraction(v, den) for v in r]) for r in rows], den


def _disc_squared(basis):
    M = [[(x * y).trace() for y in basis] for x in basis]
    return abs(det_int(M))


def _is_integral(q):
    return q.trace().denominator == 1 and q.norm().denominator == 1


def _ring_closure(alg, basis, max_den):
    cur, den = _rational_hnf(alg, basis)
    while True:
        prods = [x * y for x in cur for y in cur]
        new, den = _rational_hnf(alg, cur + prods)
        if den > max_den or not all(_is_integral(q) for q in new):
            return None
        if len(new) == 4 and _disc_squared(new) == _disc_squared(cur) and all(
            _in_span(cur, q) for q in new
        ):
            return new
        cur = new


def _in_span(basis, q):
    coords = solve_rational([b.c for b in basis], q.c)
    return all(v.denominator == 1 for v in coords)


def _enlarge_to_maximal(alg, p):
    basis = alg.basis()
    while True:
        disc = isqrt(int(_disc_squared(basis)))
        if disc == p:
            return basis
        extra = disc // p
        if extra * p != disc or extra == 1:
            raise RuntimeError(f"order discriminant {disc} cannot shrink to {p}")
        ell = factorize(extra)[0][0]
        grown = None
        for c in product(range(ell), repeat=4):
            if not any(c):
                continue
            x = sum((b * Fraction(ci, ell) for ci, b in zip(c, basis)), alg.q(0))
            if not _is_integral(x):
                continue
            cand = _ring_closure(alg, basis + [x], max_den=ell ** 4 * 64)
            if cand is not None and isqrt(int(_disc_squared(cand))) < disc:
                grown = cand
                break
        if grown is None:
            raise RuntimeError(f"no enlargement found at {ell}")
        basis = grown


class MaximalOrder:
    """A maximal order with integral structure constants in its own basis."""

    def __init__(self, alg, basis, p):
        self.alg = alg
        self.p = p
        self.basis = list(basis)
        self._B = [b.c for b in self.basis]
        disc2 = _disc_squared(self.basis)
        if disc2 != p * p:
            raise ValueError(f"reduced discriminant is not {p}")
        self.discriminant = p
        self.mult = np.zeros((4, 4, 4), dtype=object)
        for i in range(4):
            for j in range(4):
                self.mult[i, j] = self.coords(self.basis[i] * self.basis[j])
        self.conj_matrix = [self.coords(b.conj()) for b in self.basis]
        # nrd(x) = x^T G2 x / 2
        self.G2 = [[int((x * y.conj()).trace()) for y in self.basis] for x in self.basis]
        self.trace_vector = [int(b.trace()) for b in self.basis]
        self.one = self.coords(alg.one)
        self._trace_zero = None

    def coords(self, q):
        c = solve_rational(self._B, q.c)
        if any(v.denominator != 1 for v in c):
            raise ValueError(f"{q} is not in the order")
        return tuple(int(v) for v in c)

    def contains(self, q):
        return all(v.denominator == 1 for v in solve_rational(self._B, q.c))

    def quaternion(self, x):
        return sum((b * int(v) for v, b in zip(x, self.basis)), self.alg.q(0))

    def mul(self, x, y):
        out = [0, 0, 0, 0]
        m = self.mult
        for i in range(4):
            if x[i] == 0:
                continue
            for j in range(4):
                if y[j] == 0:
                    continue
                s = x[i] * y[j]
                mij = m[i, j]
                for k in range(4):
                    out[k] += s * mij[k]
        return tuple(out)

    def conj(self, x):
        out = [0, 0, 0, 0]
        for i in range(4):
            if x[i]:
                for k in range(4):
                    out[k] += x[i] * self.conj_matrix[i][k]
        return tuple(out)

    def nrd(self, x):
        G = self.G2
        return sum(G[i][j] * x[i] * x[j] for i in range(4) for j in range(4)) // 2

    def trd(self, x):
        return sum(t * v for t, v in zip(self.trace_vector, x))

    @property
    def units(self):
        return short_vectors(self.G2, 1, scale=2, exact=True)

    def elements_of_norm(self, n):
        return _elements_of_norm(self, int(n))

    # trace-zero sublattice, identified with Z^3 through a fixed basis
    @property
    def trace_zero_basis(self):
        if self._trace_zero is None:
            if self.p == 2 and self.alg == (1, 1):
                tz = [self.coords(self.alg.q(0, 1)), self.coords(self.alg.q(0, 0, 1)),
                      self.coords(self.alg.q(0, 0, 0, 1))]
            else:
                tz = _kernel_basis(self.trace_vector)
            self._trace_zero = [tuple(v) for v in tz]
        return self._trace_zero

    def from_z3(self, x):
        T = self.trace_zero_basis
        return tuple(sum(x[i] * T[i][k] for i in range(3)) for k in range(4))

    def to_z3(self, y):
        T = self.trace_zero_basis
        c = solve_rational(T[:3] + [self.one], list(y))
        if c[3] != 0 or any(v.denominator != 1 for v in c):
            raise ValueError("element is not in the trace-zero lattice")
        return tuple(int(v) for v in c[:3])

    @property
    def sphere_form(self):
        """Integral matrix M with nrd(x) = x^T M x / 2 on the trace-zero lattice."""
        T = self.trace_zero_basis
        G = self.G2
        return tuple(tuple(sum(T[a][i] * G[i][j] * T[b][j] for i in range(4) for j in range(4))
                           for b in range(3)) for a in range(3))

    @property
    def unit_conjugations(self):
        """3x3 integer matrices of x -> u^-1 x u on Z^3, one per +-unit pair."""
        if not hasattr(self, "_unit_conj"):
            mats = set()
            for u in self.units:
                ub = self.conj(u)
                cols = [self.to_z3(self.mul(self.mul(ub, self.from_z3(e)), u))
                        for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1))]
                mats.add(tuple(tuple(c[i] for c in cols) for i in range(3)))
            self._unit_conj = sorted(mats)
        return self._unit_conj

    def __repr__(self):
        return f"MaximalOrder(p={self.p}, algebra={tuple(self.alg)})"


def _kernel_basis(t):
    """Basis of {x in Z^4 : t.x = 0}."""
    # unimodular column operations via HNF of [t | I]
    rows = [[t[i]] + [1 if j == i else 0 for j in range(4)] for i in range(4)]
    red = hnf(rows)
    ker = [r[1:] for r in red if r[0] == 0]
    if len(ker) != 3:
        raise RuntimeError("trace kernel has wrong rank")
    return ker


@lru_cache(maxsize=4096)
def _elements_of_norm_cached(p, n):
    O = maximal_order(p)
    return tuple(short_vectors(O.G2, n, scale=2, exact=True))


def _elements_of_norm(O, n):
    if maximal_order(O.p) is O:
        return _elements_of_norm_cached(O.p, n)
    return tuple(short_vectors(O.G2, n, scale=2, exact=True))


@lru_cache(maxsize=64)
def maximal_order(p):
    alg = algebra_for_prime(p)
    if p == 2:
        basis = [alg.q(1), alg.q(0, 1), alg.q(0, 0, 1),
                 alg.q(Fraction(1, 2), Fraction(1, 2), Fraction(1, 2), Fraction(1, 2))]
    elif p % 4 == 3:
        h = Fraction(1, 2)
        basis = [alg.q(1), alg.q(0, 1), alg.q(h, 0, h), alg.q(0, h, 0, h)]
    else:
        basis = _enlarge_to_maximal(alg, p)
    return MaximalOrder(alg, basis, p)


class RightIdeal:
    """Integral right ideal of a maximal order, stored as HNF rows in order coordinates."""

    def __init__(self, order, rows, norm=None):
        self.order = order
        self.rows = [tuple(r) for r in hnf(rows)]
        if len(self.rows) != 4:
            raise ValueError("ideal lattice must have rank 4")
        index = 1
        for i, r in enumerate(self.rows):
            index *= r[i]
        self.index = abs(index)
        n = isqrt(self.index)
        if n * n != self.index:
            raise ValueError("index is not a square")
        if norm is not None and norm != n:
            raise ValueError(f"ideal norm {n} differs from expected {norm}")
        self.norm = n

    @classmethod
    def generated_by(cls, order, gens, norm=None):
        rows = []
        for g in gens:
            for e in np.eye(4, dtype=int):
                rows.append(order.mul(g, tuple(int(v) for v in e)))
        return cls(order, rows, norm)

    @property
    def basis(self):
        return [self.order.quaternion(r) for r in self.rows]

    @property
    def gram2(self):
        G = self.order.G2
        R = self.rows
        return [[sum(R[a][i] * G[i][j] * R[b][j] for i in range(4) for j in range(4))
                 for b in range(4)] for a in range(4)]

    def contains(self, x):
        c = solve_rational(self.rows, x)
        return all(v.denominator == 1 for v in c)

    def __eq__(self, other):
        return isinstance(other, RightIdeal) and self.rows == other.rows

    def __hash__(self):
        return hash(tuple(self.rows))

    def __repr__(self):
        return f"RightIdeal(norm={self.norm}, rows={self.rows})"


class Embedding:
    """Optimal embedding of the maximal order of Q(sqrt(-D)) into an order.

    image_of_sqrt is the trace-zero element sending sqrt(-d) (d = D or D/4);
    its square is -d.  base_point holds its Z^3 coordinates when the
    embedding comes from a sphere point.
    """

    def __init__(self, field, order, image_of_sqrt, base_point=None):
        self.field = field
        self.order = order
        self.base_point = base_point
        self.image_of_sqrt = image_of_sqrt
        D = field.D
        self.d = D if D % 4 == 3 else D // 4
        sq = image_of_sqrt * image_of_sqrt
        if sq != order.alg.q(-self.d):
            raise ValueError("image_of_sqrt does not square to -d")
        if not order.contains(self.omega):
            raise ValueError("embedding is not optimal")

    @property
    def sqrt_D(self):
        return self.image_of_sqrt * (1 if self.field.D % 4 == 3 else 2)

    @property
    def omega(self):
        t = self.field.D % 2
        return (self.sqrt_D + t) / 2

    def of(self, u, v):
        """Image of u + v * (t + sqrt(-D))/2."""
        return self.omega * v + u

    def element(self, a, b):
        """Image of (-b + sqrt(-D))/2 for a form (a, b, c)."""
        return (self.sqrt_D - b) / 2

    def __repr__(self):
        return f"Embedding(D={self.field.D}, base_point={self.base_point})"


def field_for_d(d):
    return QuadField(d if d % 4 == 3 else 4 * d)


def sphere_embedding(d, x, p=2):
    """Embedding attached to a trace-zero point x in Z^3 of norm d."""
    O = maximal_order(p)
    y = O.from_z3(x)
    if O.nrd(y) != d:
        raise ValueError(f"point {x} does not have norm {d}")
    return Embedding(field_for_d(d), O, O.quaternion(y), base_point=tuple(x))


def _equivalent_forms(cls, limit=200):
    """Forms equivalent to cls obtained from primitive values f(x, y)."""
    a, b, c = cls
    out = []
    r = 1
    seen = set()
    while len(out) < limit and r < 60:
        for x in range(-r, r + 1):
            for y in (r, -r) if abs(x) < r else range(-r, r + 1):
                if gcd(x, y) != 1 or (x, y) in seen:
                    continue
                seen.add((x, y))
                # complete (x, y) to a matrix [[x, s], [y, t]] of determinant 1
                g, s0, t0 = _bezout(x, y)
                s, t = -t0, s0
                A = a * x * x + b * x * y + c * y * y
                B = 2 * a * x * s + b * (x * t + y * s) + 2 * c * y * t
                C = a * s * s + b * s * t + c * t * t
                out.append(BinaryForm(A, B, C))
        r += 1
    return out[:limit]


def _bezout(x, y):
    from .numtheory import egcd

    return egcd(x, y)


def ideal_from_class(emb, cls, coprime_to=None, order=None, left=None):
    """Right ideal iota(a) O for the ideal a = Z a + Z (-b + sqrt(-D))/2.

    With coprime_to set, the form is first replaced by an equivalent one
    whose leading coefficient is coprime to that integer; a ValueError is
    raised when the scan of equivalent forms finds none.
    """
    O = order or emb.order
    if cls.disc != -emb.field.D:
        raise ValueError("class discriminant does not match the embedding")
    if coprime_to is not None and gcd(cls.a, coprime_to) != 1:
        for f in _equivalent_forms(cls):
            if f.a > 0 and gcd(f.a, coprime_to) == 1:
                cls = f
                break
        else:
            raise ValueError("no representative with coprime norm in the scan bound")
    a, b, _ = cls
    beta = emb.element(a, b)
    if left is None:
        gens = [O.coords(emb.order.alg.q(a)), O.coords(beta)]
        return RightIdeal.generated_by(O, gens, norm=a)
    # iota(a) * left, where left is a right O-ideal whose left order contains iota
    rows = [tuple(a * v for v in r) for r in left.rows]
    for q in left.basis:
        rows.append(O.coords(beta * q))
    return RightIdeal(O, rows, norm=a * left.norm)


def principal_generator(I):
    """q with q O = I, found among the lattice vectors of norm N(I)."""
    O = I.order
    G = I.gram2
    for c in short_vectors(G, I.norm, scale=2, exact=True):
        q = tuple(sum(c[r] * I.rows[r][k] for r in range(4)) for k in range(4))
        if RightIdeal.generated_by(O, [q]) == I:
            return q
    raise RuntimeError("no generator found: ideal is not principal")


def _generator_fast(O, a, beta):
    """First q of norm a with conj(q) beta in a O (so q O = a O + beta O)."""
    for q in O.elements_of_norm(a):
        v = O.mul(O.conj(q), beta)
        if all(t % a == 0 for t in v):
            return q
    raise RuntimeError("no generator of norm %d" % a)


def class_action(emb, cls, x):
    """[a] . x = q^-1 x q where q generates iota_x(a) O."""
    O = emb.order
    d = emb.d
    x = tuple(int(t) for t in x)
    y = O.from_z3(x)
    if O.nrd(y) != d or O.trd(y) != 0:
        raise ValueError(f"{x} is not a point of norm {d}")
    f = reduce_form(*cls)
    if f.disc != -emb.field.D:
        raise ValueError("class discriminant does not match")
    a, b, _ = f
    if a == 1:
        return x
    # beta = iota_x((-b + sqrt(-D))/2) in order coordinates
    two_beta = tuple((2 if emb.field.D % 4 == 0 else 1) * t for t in y)
    two_beta = tuple(t - b * o for t, o in zip(two_beta, O.one))
    if any(t % 2 for t in two_beta):
        raise ValueError("embedding at x is not optimal")
    beta = tuple(t // 2 for t in two_beta)
    q = _generator_fast(O, a, beta)
    z = O.mul(O.mul(O.conj(q), y), q)
    z = tuple(t // a for t in z)
    return O.to_z3(z)


def gamma_canonical(O, x):
    """Canonical representative of the unit-conjugation orbit of x."""
    best = None
    for M in O.unit_conjugations:
        v = tuple(sum(M[i][j] * x[j] for j in range(3)) for i in range(3))
        if best is None or v < best:
            best = v
    return best


def gamma_orbits(O, points):
    reps = {}
    for x in points:
        reps.setdefault(gamma_canonical(O, x), []).append(x)
    return reps


GaussReport = namedtuple("GaussReport", "d count h ratio orbit_count")


def gauss_check(d, count=None):
    from .numtheory import is_squarefree
    from .ternary_forms import SUM_OF_THREE_SQUARES, enumerate_representations

    if d <= 3 or not is_squarefree(d) or d % 8 in (0, 4, 7):
        raise ValueError(f"d = {d} is not squarefree admissible")
    if count is None:
        count = len(enumerate_representations(SUM_OF_THREE_SQUARES, d).points)
    h = class_group(field_for_d(d)).h
    ratio = Fraction(count, h)
    return GaussReport(d, count, h, ratio, Fraction(count, 12 * h))


def action_orbits(d, p=2):
    """Orbits of the class group on Gamma-classes of norm-d points.

    Returns (orbit list, permutation per class) where each permutation maps
    canonical point -> canonical image.  Used for freeness, associativity
    and orbit-count checks.
    """
    from .lattice import short_vectors as sv

    O = maximal_order(p)
    pts = [x for x in sv(O.sphere_form, d, scale=2, exact=True)
           if gcd(gcd(x[0], x[1]), x[2]) == 1]
    canon = sorted(gamma_orbits(O, pts))
    if not canon:
        raise ValueError(f"no primitive points of norm {d}")
    field = field_for_d(d)
    G = class_group(field)
    perms = []
    for f in G.elements:
        perm = {}
        for x in canon:
            emb = Embedding(field, O, O.quaternion(O.from_z3(x)), base_point=x)
            perm[x] = gamma_canonical(O, class_action(emb, f, x))
        perms.append(perm)
    seen, orbits = set(), []
    for x in canon:
        if x in seen:
            continue
        orb = sorted({perm[x] for perm in perms})
        seen.update(orb)
        orbits.append(orb)
    return orbits, perms, G


# ---- class sets ---------------------------------------------------------

ClassSet = namedtuple("ClassSet", "order ideals unit_orders masses total_mass")


def _product_lattice(O, J, I):
    """HNF rows of J * conj(I)."""
    rows = []
    for u in J.rows:
        for v in I.rows:
            rows.append(O.mul(u, O.conj(v)))
    return hnf(rows)


def _gram_of(O, rows):
    G = O.G2
    return [[sum(rows[a][i] * G[i][j] * rows[b][j] for i in range(4) for j in range(4))
             for b in range(4)] for a in range(4)]


def ideals_equivalent(J, I):
    O = J.order
    L = _product_lattice(O, J, I)
    target = J.norm * I.norm
    return bool(short_vectors(_gram_of(O, L), target, scale=2, exact=True))


def left_unit_count(I):
    O = I.order
    L = _product_lattice(O, I, I)
    return len(short_vectors(_gram_of(O, L), I.norm ** 2, scale=2, exact=True))


def _neighbours(I, ell):
    O = I.order
    out = []
    seen = set()
    target = ell * I.norm
    for c in product(range(ell), repeat=4):
        if not any(c):
            continue
        g = tuple(sum(c[r] * I.rows[r][k] for r in range(4)) for k in range(4))
        if O.nrd(g) % target:
            continue
        rows = [O.mul(g, tuple(int(v) for v in e)) for e in np.eye(4, dtype=int)]
        rows += [tuple(ell * v for v in r) for r in I.rows]
        try:
            J = RightIdeal(O, rows)
        except ValueError:
            continue
        if J.norm == target and J not in seen:
            seen.add(J)
            out.append(J)
    return out


@lru_cache(maxsize=32)
def left_ideal_classes(p, max_steps=10000):
    """Representatives of right-ideal classes of the maximal order of B_p.

    Neighbour search at the smallest prime different from p; termination is
    certified by the mass sum(1/|O_L(I)^x|) reaching (p - 1)/24.
    """
    O = maximal_order(p)
    ell = 2 if p != 2 else 3
    target = Fraction(p - 1, 24)
    unit = RightIdeal(O, [tuple(int(v) for v in e) for e in np.eye(4, dtype=int)])
    reps = [unit]
    units = [left_unit_count(unit)]
    mass = Fraction(1, units[0])
    queue = [unit]
    steps = 0
    while mass < target and queue:
        I = queue.pop(0)
        for J in _neighbours(I, ell):
            steps += 1
            if steps > max_steps:
                raise RuntimeError("mass not reached within search bound")
            if any(ideals_equivalent(J, R) for R in reps):
                continue
            reps.append(J)
            units.append(left_unit_count(J))
            mass += Fraction(1, units[-1])
            queue.append(J)
            if mass >= target:
                break
    if mass != target:
        raise RuntimeError(f"mass {mass} does not match {target}")
    masses = [Fraction(1, u) / target for u in units]
    return ClassSet(O, reps, units, masses, mass)


def ideal_class_index(J, classes):
    for idx, R in enumerate(classes.ideals):
        if ideals_equivalent(J, R):
            return idx
    raise RuntimeError("ideal matches no class representative")


# ---- embeddings into the left orders of the class set -------------------

class LeftOrderData:
    """Left order O_L(I) of a class representative with its Gross lattice."""

    def __init__(self, O, I):
        self.O = O
        self.ideal = I
        alg = O.alg
        basisI = I.basis
        # O_L(I) = I conj(I) / N(I)
        prods = [x * y.conj() / I.norm for x in basisI for y in basisI]
        self.basis, _ = _rational_hnf(alg, prods)
        self._B = [b.c for b in self.basis]
        # Gross lattice {2x - trd(x)}
        gross = [b * 2 - b.trace() for b in self.basis]
        rows, den = _rational_hnf(alg, gross)
        self.gross = [r for r in rows if any(r.c)]
        if len(self.gross) != 3:
            raise RuntimeError("Gross lattice has wrong rank")
        self.gross_gram2 = [[int((u * v.conj()).trace()) for v in self.gross] for u in self.gross]

    def contains(self, q):
        return all(v.denominator == 1 for v in solve_rational(self._B, q.c))

    def vector(self, c):
        return sum((g * int(t) for t, g in zip(c, self.gross)), self.O.alg.q(0))


@lru_cache(maxsize=8)
def _left_orders(p):
    cs = left_ideal_classes(p)
    return [LeftOrderData(cs.order, I) for I in cs.ideals]


@lru_cache(maxsize=8)
def _gross_tables(p, Dmax):
    """First Gross-lattice vector of each norm D <= Dmax, per left order."""
    out = []
    for data in _left_orders(p):
        pts, vals = enumerate_ternary(data.gross_gram2, 2 * Dmax)
        vals = vals // 2
        order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0], vals))
        pts, vals = pts[order], vals[order]
        first = {}
        for v, pnt in zip(vals.tolist(), pts.tolist()):
            if v not in first:
                first[v] = tuple(pnt)
        out.append(first)
    return out


def gross_embedding(p, D, Dmax=None):
    """(j, Embedding) with an embedding into the left order of class j."""
    field = QuadField(D)
    if kronecker(-D, p) == 1:
        raise ValueError(f"{p} splits in Q(sqrt(-{D})): no embedding")
    Dmax = max(Dmax or 0, 512)
    while Dmax < D:
        Dmax *= 2
    tables = _gross_tables(p, Dmax)
    datas = _left_orders(p)
    for j, tab in enumerate(tables):
        c = tab.get(D)
        if c is None:
            continue
        y = datas[j].vector(c)
        s = y if D % 4 == 3 else y / 2
        emb = _OrderEmbedding(field, datas[j], s)
        return j, emb
    raise RuntimeError(f"no embedding of discriminant -{D} found")


class _OrderEmbedding(Embedding):
    def __init__(self, field, data, image_of_sqrt):
        self.field = field
        self.order = data
        self.data = data
        self.base_point = None
        self.image_of_sqrt = image_of_sqrt
        D = field.D
        self.d = D if D % 4 == 3 else D // 4
        if image_of_sqrt * image_of_sqrt != data.O.alg.q(-self.d):
            raise ValueError("bad embedding")
        if not data.contains(self.omega):
            raise ValueError("embedding is not optimal")


def class_set_map(p, D, cls=None, Dmax=None):
    """Class-set index of iota(a) I_j for one class, or for all classes.

    With cls None, returns the list of indices over the class group in its
    element order.
    """
    j, emb = gross_embedding(p, D, Dmax)
    classes = left_ideal_classes(p)
    I_j = classes.ideals[j]
    O = classes.order
    G = class_group(emb.field)
    forms = G.elements if cls is None else [reduce_form(*cls)]
    out = []
    for f in forms:
        J = ideal_from_class(emb, f, order=O, left=I_j)
        out.append(ideal_class_index(J, classes))
    return out if cls is None else out[0]
