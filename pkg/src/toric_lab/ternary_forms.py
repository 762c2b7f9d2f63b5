"""Positive definite integral ternary quadratic forms."""

from collections import namedtuple
from fractions import Fraction
from functools import lru_cache
from math import gcd

import numpy as np

from .lattice import det_int, enumerate_ternary, short_vectors

__all__ = [
    "TernaryForm",
    "RepresentationSet",
    "GenusWeights",
    "SUM_OF_THREE_SQUARES",
    "admissible_sum_of_three_squares",
    "enumerate_representations",
    "representation_table",
    "automorphism_group",
    "genus_weights",
    "parse_form",
    "genus_shares",
    "proper_automorphisms",
]


class TernaryForm(namedtuple("TernaryForm", "a11 a22 a33 c12 c13 c23")):
    """q = a11 x^2 + a22 y^2 + a33 z^2 + c12 xy + c13 xz + c23 yz.

    The c's are the doubled off-diagonal Gram entries, so the value is an
    integer on Z^3.
    """

    __slots__ = ()

    def __new__(cls, a11, a22, a33, c12=0, c13=0, c23=0):
        self = super().__new__(cls, *(int(v) for v in (a11, a22, a33, c12, c13, c23)))
        if not self._is_positive():
            raise ValueError(f"{tuple(self)} is not positive definite")
        return self

    @property
    def matrix2(self):
        """Integral matrix M with q(x) = x^T M x / 2."""
        a, b, c, f, g, h = self
        return ((2 * a, f, g), (f, 2 * b, h), (g, h, 2 * c))

    @property
    def gram(self):
        a, b, c, f, g, h = self
        half = Fraction(1, 2)
        return ((Fraction(a), f * half, g * half),
                (f * half, Fraction(b), h * half),
                (g * half, h * half, Fraction(c)))

    def _is_positive(self):
        M = self.matrix2
        m1 = M[0][0]
        m2 = M[0][0] * M[1][1] - M[0][1] ** 2
        return m1 > 0 and m2 > 0 and det_int(M) > 0

    @property
    def determinant(self):
        """Determinant of the half-integral Gram matrix."""
        return det_int(self.gram)

    def __call__(self, x):
        a, b, c, f, g, h = self
        x0, x1, x2 = x
        return a * x0 * x0 + b * x1 * x1 + c * x2 * x2 + f * x0 * x1 + g * x0 * x2 + h * x1 * x2

    def __str__(self):
        return ",".join(str(v) for v in self)


SUM_OF_THREE_SQUARES = TernaryForm(1, 1, 1, 0, 0, 0)


def parse_form(text):
    """Parse "a11,a22,a33,a12,a13,a23" (cross terms doubled)."""
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 6:
        raise ValueError(f"expected six coefficients, got {text!r}")
    return TernaryForm(*(int(p) for p in parts))


RepresentationSet = namedtuple("RepresentationSet", "form d points")
GenusWeights = namedtuple("GenusWeights", "forms aut_orders weights")


def admissible_sum_of_three_squares(d):
    """Legendre-Gauss: d is a sum of three squares unless d = 4^a (8b + 7)."""
    if d < 1:
        raise ValueError("d must be positive")
    while d % 4 == 0:
        d //= 4
    return d % 8 != 7


def _primitive(p):
    return gcd(gcd(p[0], p[1]), p[2]) == 1


def enumerate_representations(form, d, primitive=True):
    """Solutions of q(x) = d, primitive ones by default, sorted."""
    if d <= 0:
        raise ValueError("d must be positive")
    pts = short_vectors(form.matrix2, d, scale=2, exact=True)
    if primitive:
        pts = [p for p in pts if _primitive(p)]
    return RepresentationSet(form, d, pts)


@lru_cache(maxsize=16)
def _table(form, dmax):
    pts, vals = enumerate_ternary(form.matrix2, 2 * dmax)
    vals = vals // 2
    prim = np.gcd.reduce(np.abs(pts), axis=1) == 1
    return pts[prim], vals[prim]


def representation_table(form, dmax):
    """Primitive points with value <= dmax, grouped by value.

    Returns (points, values, counts) where counts[d] is the number of
    primitive representations of d.  Much faster than calling
    enumerate_representations for every d.
    """
    pts, vals = _table(form, int(dmax))
    counts = np.bincount(vals, minlength=int(dmax) + 1)
    return pts, vals, counts


def points_by_value(form, dmax):
    pts, vals, _ = representation_table(form, dmax)
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0], vals))
    pts, vals = pts[order], vals[order]
    out = {}
    cuts = np.flatnonzero(np.diff(vals)) + 1
    for chunk_p, chunk_v in zip(np.split(pts, cuts), np.split(vals, cuts)):
        if chunk_v.size:
            out[int(chunk_v[0])] = [tuple(int(t) for t in p) for p in chunk_p]
    return out


@lru_cache(maxsize=64)
def automorphism_group(form):
    """All U in GL3(Z) with U^T M U = M, as tuples of rows.

    The images of the standard basis vectors are searched among the vectors
    of the same length; the form's diagonal bounds the search.
    """
    M = form.matrix2
    diag = [M[0][0], M[1][1], M[2][2]]
    cands = short_vectors(M, max(diag), scale=1)

    def ip(u, v):
        return sum(M[i][j] * u[i] * v[j] for i in range(3) for j in range(3))

    by_len = {}
    for v in cands:
        by_len.setdefault(ip(v, v), []).append(v)
    out = []
    for v0 in by_len.get(diag[0], []):
        for v1 in by_len.get(diag[1], []):
            if ip(v0, v1) != M[0][1]:
                continue
            for v2 in by_len.get(diag[2], []):
                if ip(v0, v2) != M[0][2] or ip(v1, v2) != M[1][2]:
                    continue
                # columns are the images of e1, e2, e3
                U = tuple(tuple(col[i] for col in (v0, v1, v2)) for i in range(3))
                if round(abs(np.linalg.det(np.array(U, dtype=float)))) == 1:
                    out.append(U)
    out.sort()
    return out


def genus_weights(forms):
    if not forms:
        raise ValueError("need at least one form")
    orders = [len(automorphism_group(f)) for f in forms]
    total = sum(Fraction(1, n) for n in orders)
    weights = [Fraction(1, n) / total for n in orders]
    return GenusWeights(list(forms), orders, weights)


def genus_shares(forms, d_values, dmax=None):
    """Per-d automorphism-weighted representation shares.

    share_i(d) = (r_i(d)/|Aut_i|) / sum_j (r_j(d)/|Aut_j|), i.e. the share of
    orbits rather than of raw points.  Returns (d list, shares array, raw
    point counts array), keeping only d represented by some form.
    """
    d_values = [int(d) for d in d_values]
    dmax = dmax or max(d_values)
    gw = genus_weights(forms)
    counts = np.array([representation_table(f, dmax)[2] for f in forms])
    inv_aut = np.array([1.0 / n for n in gw.aut_orders])
    ds, shares, raw = [], [], []
    for d in d_values:
        r = counts[:, d]
        if r.sum() == 0:
            continue
        w = r * inv_aut
        ds.append(d)
        shares.append(w / w.sum())
        raw.append(r)
    return ds, np.array(shares), np.array(raw)


def proper_automorphisms(form):
    """The determinant-one subgroup of automorphism_group."""
    return [U for U in automorphism_group(form)
            if round(np.linalg.det(np.array(U, dtype=float))) == 1]
