"""Positive definite lattices: short-vector enumeration and Hermite normal form.

Quadratic forms are passed as an integral matrix M with Q(x) = x^T M x / scale,
so all final comparisons are exact integer arithmetic; floats are only used
to steer the enumeration, with a safety margin.
"""

from fractions import Fraction
from math import floor, ceil, isqrt

import numpy as np


def _cholesky_coeffs(M):
    """Fincke-Pohst coefficients q[i][i], q[i][j] (j > i) of the form x^T M x."""
    n = len(M)
    q = [[float(M[i][j]) for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            q[j][i] = q[i][j]
            q[i][j] = q[i][j] / q[i][i]
        for k in range(i + 1, n):
            for l in range(k, n):
                q[k][l] -= q[k][i] * q[i][l]
    for i in range(n):
        if q[i][i] <= 0:
            raise ValueError("form is not positive definite")
    return q


def short_vectors(M, bound, scale=1, exact=False):
    """All nonzero integer x with x^T M x / scale <= bound.

    With exact=True only vectors attaining the bound are returned.  Output is
    a list of tuples in a deterministic order; both x and -x are included.
    """
    n = len(M)
    Mi = [[int(v) for v in row] for row in M]
    target = Fraction(bound) * scale
    q = _cholesky_coeffs(Mi)
    eps = 1e-9 * max(1.0, float(target))
    out = []
    x = [0] * n
    # remaining budget per level and centre
    def rec(i, remaining):
        if i < 0:
            if any(x):
                val = sum(Mi[a][b] * x[a] * x[b] for a in range(n) for b in range(n))
                if (val == target) if exact else (0 < val <= target):
                    out.append(tuple(x))
            return
        c = -sum(q[i][j] * x[j] for j in range(i + 1, n))
        r = (max(remaining, 0.0) + eps) / q[i][i]
        half = r ** 0.5
        lo, hi = ceil(c - half), floor(c + half)
        for v in range(lo, hi + 1):
            x[i] = v
            t = v - c
            rec(i - 1, remaining - q[i][i] * t * t)
        x[i] = 0

    rec(n - 1, float(target))
    out.sort()
    return out


def hnf(rows):
    """Row Hermite normal form of an integer matrix; returns nonzero rows.

    The lattice spanned by the input rows equals the one spanned by the
    output.  Pivots are positive and entries above a pivot are reduced into
    [0, pivot).
    """
    A = [[int(v) for v in r] for r in rows if any(r)]
    if not A:
        return []
    m = len(A[0])
    out = []
    col = 0
    while A and col < m:
        nz = [r for r in A if r[col] != 0]
        zero = [r for r in A if r[col] == 0]
        if not nz:
            col += 1
            continue
        # euclid on column col
        while len(nz) > 1:
            nz.sort(key=lambda r: abs(r[col]))
            piv = nz[0]
            rest = []
            for r in nz[1:]:
                f = r[col] // piv[col]
                r = [a - f * b for a, b in zip(r, piv)]
                if r[col] != 0:
                    rest.append(r)
                elif any(r):
                    zero.append(r)
            nz = [piv] + rest
        piv = nz[0]
        if piv[col] < 0:
            piv = [-a for a in piv]
        out.append(piv)
        A = zero
        col += 1
    # reduce above pivots
    for i in range(len(out)):
        pc = next(c for c in range(m) if out[i][c] != 0)
        for k in range(i):
            f = out[k][pc] // out[i][pc]
            if f:
                out[k] = [a - f * b for a, b in zip(out[k], out[i])]
    return out


def det_int(M):
    """Exact determinant of a small square integer or rational matrix."""
    n = len(M)
    A = [[Fraction(v) for v in row] for row in M]
    det = Fraction(1)
    for i in range(n):
        p = next((r for r in range(i, n) if A[r][i] != 0), None)
        if p is None:
            return Fraction(0)
        if p != i:
            A[i], A[p] = A[p], A[i]
            det = -det
        det *= A[i][i]
        for r in range(i + 1, n):
            f = A[r][i] / A[i][i]
            if f:
                for c in range(i, n):
                    A[r][c] -= f * A[i][c]
    return det


def solve_rational(B, v):
    """Coordinates y with y B = v for a square rational matrix B (rows basis)."""
    n = len(B)
    # solve B^T y = v
    A = [[Fraction(B[j][i]) for j in range(n)] + [Fraction(v[i])] for i in range(n)]
    for i in range(n):
        p = next(r for r in range(i, n) if A[r][i] != 0)
        A[i], A[p] = A[p], A[i]
        piv = A[i][i]
        A[i] = [a / piv for a in A[i]]
        for r in range(n):
            if r != i and A[r][i] != 0:
                f = A[r][i]
                A[r] = [a - f * b for a, b in zip(A[r], A[i])]
    return [A[i][n] for i in range(n)]


def enumerate_ternary(M, maxval):
    """All x in Z^3 with 0 < x^T M x <= maxval for an integral symmetric M.

    Vectorised over the last coordinate.  Returns (points, values) as numpy
    arrays of shape (n, 3) and (n,).
    """
    M = np.asarray(M, dtype=np.int64)
    Minv = np.linalg.inv(M.astype(float))
    b0 = isqrt(int(maxval * Minv[0, 0]) + 1) + 1
    b1 = isqrt(int(maxval * Minv[1, 1]) + 1) + 1
    a22 = int(M[2, 2])
    pts, vals = [], []
    for x0 in range(-b0, b0 + 1):
        for x1 in range(-b1, b1 + 1):
            # q = a22 z^2 + 2 z (M02 x0 + M12 x1) + rest
            lin = int(M[0, 2]) * x0 + int(M[1, 2]) * x1
            rest = int(M[0, 0]) * x0 * x0 + 2 * int(M[0, 1]) * x0 * x1 + int(M[1, 1]) * x1 * x1
            disc = lin * lin - a22 * (rest - maxval)
            if disc < 0:
                continue
            r = isqrt(disc)
            lo = (-lin - r) // a22 - 1
            hi = (-lin + r) // a22 + 1
            z = np.arange(lo, hi + 1, dtype=np.int64)
            v = a22 * z * z + 2 * lin * z + rest
            keep = (v > 0) & (v <= maxval)
            if keep.any():
                z = z[keep]
                pts.append(np.column_stack([np.full(z.size, x0), np.full(z.size, x1), z]))
                vals.append(v[keep])
    if not pts:
        return np.zeros((0, 3), dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(pts), np.concatenate(vals)
