"""Hecke eigenvalues and numerical values of the attached L-functions.

Normalisation: lambda(n) = a(n) / n^{(k-1)/2}, so |lambda(p)| <= 2 away from
the level.  Completed L-functions are Lambda(s) = C^{s/2} gamma(s) L(s) with
gamma a product of Gamma_R(s + mu) = pi^{-(s+mu)/2} Gamma((s+mu)/2) and
Gamma_C(s + nu) = 2 (2 pi)^{-(s+nu)} Gamma(s + nu).
"""

import re
from collections import namedtuple
from functools import lru_cache
from math import gcd, log, pi, sqrt

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import loggamma

from .numtheory import factorize, is_prime, kronecker, primes_up_to
from .qexpansion import eta_product
from .quadratic_core import (
    QuadField,
    characters,
    class_group,
    ideal_class_sums,
    prime_splitting,
)

__all__ = [
    "HeckeForm",
    "RSCoefficients",
    "CentralValueRecord",
    "GammaFactor",
    "AFEResult",
    "ConductorError",
    "RootNumberError",
    "ec11a_eigenvalue",
    "tau",
    "tau_eigenvalue",
    "builtin_form",
    "BUILTIN_FORMS",
    "read_eigenvalue_file",
    "write_eigenvalue_file",
    "rs_coefficients",
    "rs_euler_coefficients",
    "kernel",
    "afe",
    "afe_terms",
    "central_value",
    "central_values",
    "degree2_central_value",
    "l_at_one",
    "l_at_one_exact_eta",
    "prime_sum",
    "kind_conductor",
    "rs_log_conductor",
    "LOneResult",
    "CorollaryTerms",
    "analytic_conductor",
    "chandee_rhs",
    "corollary_terms",
    "principal_series_gamma",
]


class ConductorError(ValueError):
    pass


class RootNumberError(ArithmeticError):
    pass


# ---------------------------------------------------------------- eigenvalues

def _multiplicative_table(nmax, local):
    """f(1..nmax) for the multiplicative f with f(p^k) = local(p, k)."""
    out = np.ones(nmax + 1)
    out[0] = 0.0
    for p in primes_up_to(nmax):
        idx = np.arange(p, nmax + 1, p)
        val = np.ones(idx.size, dtype=np.int64)
        q, k = p * p, 2
        while q <= nmax:
            val[(idx % q) == 0] = k
            q *= p
            k += 1
        table = np.array([1.0] + [local(p, j) for j in range(1, k)])
        out[idx] *= table[val]
    return out


class HeckeForm:
    """A holomorphic newform of squarefree level N and even weight k.

    Built either from all coefficients a(n) (q-expansion providers) or from
    prime coefficients a(p) only, in which case prime powers follow from the
    Hecke recursion lambda(p^{j+1}) = lambda(p) lambda(p^j) - psi(p) lambda(p^{j-1}).
    """

    def __init__(self, label, level, weight, prime_ap, all_an=None):
        self.label = label
        self.level = int(level)
        self.weight = int(weight)
        if self.weight % 2:
            raise ValueError("weight must be even")
        self._ap = {int(p): int(a) for p, a in prime_ap.items()}
        self.bound = max(self._ap)
        self._an = all_an
        self._tables = {}

    def __repr__(self):
        return f"HeckeForm({self.label!r}, level={self.level}, weight={self.weight})"

    @property
    def spectral_parameter(self):
        k = self.weight
        return sqrt(k * (k + 1))

    @property
    def analytic_conductor(self):
        """Q_pi := N (k/2)^2."""
        return self.level * (self.weight / 2) ** 2

    def psi(self, n):
        return 1 if gcd(n, self.level) == 1 else 0

    def lam_prime(self, p):
        if p not in self._ap:
            raise KeyError(f"a({p}) not available for {self.label} (bound {self.bound})")
        return self._ap[p] / p ** ((self.weight - 1) / 2)

    def lam_prime_power(self, p, k):
        lp = self.lam_prime(p)
        if self.level % p == 0:
            return lp ** k
        prev, cur = 1.0, lp
        if k == 0:
            return 1.0
        for _ in range(k - 1):
            prev, cur = cur, lp * cur - prev
        return cur

    def satake(self, p):
        """Local roots (alpha_1, alpha_2) at p; (lambda(p), 0) at p | N."""
        lp = self.lam_prime(p)
        if self.level % p == 0:
            return (complex(lp), 0j)
        disc = complex(lp * lp - 4)
        r = np.sqrt(disc)
        return ((lp + r) / 2, (lp - r) / 2)

    def lam_table(self, nmax):
        """lambda(0..nmax) (entry 0 is zero)."""
        if nmax > self.bound:
            raise ValueError(f"{self.label}: eigenvalues known only up to {self.bound}")
        key = ("lam", nmax)
        if key not in self._tables:
            if self._an is not None:
                n = np.arange(nmax + 1, dtype=float)
                n[0] = 1.0
                t = np.asarray(self._an[: nmax + 1], dtype=float) / n ** ((self.weight - 1) / 2)
                t[0] = 0.0
            else:
                t = _multiplicative_table(nmax, self.lam_prime_power)
            self._tables[key] = t
        return self._tables[key]

    def lam(self, n):
        out = 1.0
        for p, k in factorize(n):
            out *= self.lam_prime_power(p, k)
        return out

    def lam_square_table(self, nmax):
        """lambda(n^2) for n = 0..nmax."""
        if nmax > self.bound:
            raise ValueError(f"{self.label}: eigenvalues known only up to {self.bound}")
        key = ("sq", nmax)
        if key not in self._tables:
            self._tables[key] = _multiplicative_table(
                nmax, lambda p, k: self.lam_prime_power(p, 2 * k))
        return self._tables[key]

    def gamma(self):
        return GammaFactor((), ((self.weight - 1) / 2,))


def _eta_form(label, level, weight, spec, bound, bits):
    an = eta_product(spec, bound, bits)
    ap = {p: int(an[p]) for p in primes_up_to(bound)}
    return HeckeForm(label, level, weight, ap, all_an=an)


# label -> (level, weight, eta spec, default bound, limb bits)
BUILTIN_FORMS = {
    "11.2.a.a": (11, 2, ((1, 2), (11, 2)), 1 << 19, 64),
    "5.4.a.a": (5, 4, ((1, 4), (5, 4)), 1 << 19, 64),
    "1.12.a.a": (1, 12, ((1, 24),), 1 << 17, 128),
}
_ALIASES = {"11a": "11.2.a.a", "delta": "1.12.a.a"}


@lru_cache(maxsize=None)
def builtin_form(label):
    label = _ALIASES.get(label, label)
    if label not in BUILTIN_FORMS:
        raise KeyError(f"no builtin form {label!r}")
    level, weight, spec, bound, bits = BUILTIN_FORMS[label]
    return _eta_form(label, level, weight, spec, bound, bits)


def ec11a_eigenvalue(p):
    """a_p / sqrt(p) for y^2 + y = x^3 - x^2 - 10x - 20 by counting points.

    At the bad prime 11 the local factor is 1 - 11^{-s} (split multiplicative
    reduction), giving +1/sqrt(11).
    """
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    if p == 11:
        return 1 / sqrt(11)
    if p == 2:
        pts = 1 + sum(1 for x in range(2) for y in range(2)
                      if (y * y + y - (x ** 3 - x * x - 10 * x - 20)) % 2 == 0)
        return (p + 1 - pts) / sqrt(p)
    x = np.arange(p, dtype=np.int64)
    f = (((x * x) % p * x) % p - (x * x) % p - 10 * x - 20) % p
    v = (4 * f + 1) % p
    sq = np.zeros(p, dtype=np.int64)
    sq[(x * x) % p] = 1
    chi = np.where(v == 0, 0, 2 * sq[v] - 1)
    return float(-chi.sum()) / sqrt(p)


def tau(n):
    """Ramanujan tau(n) from the expansion of q prod (1 - q^k)^24."""
    return int(builtin_form("1.12.a.a")._an[n])


def tau_eigenvalue(n):
    return tau(n) / n ** 5.5


_HEADER = re.compile(r"^#\s*label\s+(\S+)\s+weight\s+(\d+)\s+level\s+(\d+)\s*$")


def read_eigenvalue_file(path_or_text):
    """Parse the `# label .. weight .. level ..` header plus `p<TAB>a_p` lines."""
    text = str(path_or_text)
    if "\n" not in text:
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    m = _HEADER.match(lines[0]) if lines else None
    if not m:
        raise ValueError("missing or malformed eigenvalue header")
    label, weight, level = m.group(1), int(m.group(2)), int(m.group(3))
    ap = {}
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split("\t")
        if len(parts) != 2:
            raise ValueError(f"line {i}: expected 'p<TAB>a_p'")
        p, a = int(parts[0]), int(parts[1])
        if not is_prime(p):
            raise ValueError(f"line {i}: {p} is not prime")
        ap[p] = a
    if not ap:
        raise ValueError("no eigenvalues in file")
    return HeckeForm(label, level, weight, ap)


def write_eigenvalue_file(form, path, bound=None):
    bound = bound or form.bound
    rows = [f"# label {form.label} weight {form.weight} level {form.level}"]
    rows += [f"{p}\t{form._ap[p]}" for p in primes_up_to(bound)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")


# ----------------------------------------------------- Rankin-Selberg series

RSCoefficients = namedtuple("RSCoefficients", "form character c")


def _check_coprime(form, D):
    if gcd(form.level, 2 * D) != 1:
        raise ConductorError(f"level {form.level} is not coprime to 2D = {2 * D}")


def _eta_table(D, nmax):
    out = np.zeros(nmax + 1)
    # the character is periodic mod D
    period = np.array([0] + [kronecker(-D, r) for r in range(1, D)], dtype=float)
    out[1:] = np.resize(period, D * (nmax // D + 2))[1 : nmax + 1]
    return out


def _square_convolve(b, weights, nmax):
    """c(n) = sum_{m^2 r = n} weights[m] b(r)."""
    c = np.zeros(nmax + 1, dtype=b.dtype)
    m = 1
    while m * m <= nmax:
        if weights[m]:
            q = m * m
            c[q::q] += weights[m] * b[1 : nmax // q + 1]
        m += 1
    return c


def _psi_eta(D, N, nmax):
    m = np.arange(nmax + 1)
    w = _eta_table(D, nmax)
    w[np.gcd(m, N) != 1] = 0.0
    return w


def rs_coefficients(form, chi, count):
    """Dirichlet coefficients of L(s, pi x chi) for n <= count.

    c(n) = sum_{m^2 r = n} psi(m) eta(m) lambda(r) a_chi(r); psi kills m that
    share a factor with the level.
    """
    from .quadratic_core import a_chi_table

    D = chi.group.field.D
    _check_coprime(form, D)
    b = form.lam_table(count) * a_chi_table(chi, count)
    m = int(count ** 0.5) + 1
    return RSCoefficients(form, chi, _square_convolve(b, _psi_eta(D, form.level, m), count))


def _power_sums_to_series(s, kmax):
    """h_0..h_kmax with sum h_k X^k = exp(sum_n s_n X^n / n)."""
    h = [1.0 + 0j]
    for m in range(1, kmax + 1):
        h.append(sum(s[j] * h[m - j] for j in range(1, m + 1)) / m)
    return h


def rs_euler_coefficients(form, chi, count):
    """Same coefficients from the local Satake roots (independent route)."""
    field = chi.group.field
    _check_coprime(form, field.D)
    out = np.zeros(count + 1, dtype=complex)
    out[1] = 1.0
    done = {1: 1.0 + 0j}
    for p in primes_up_to(count):
        kmax = int(log(count) / log(p) + 1e-9)
        a1, a2 = form.satake(p)
        sp = prime_splitting(field, p)
        if sp.kind == "inert":
            xi = (-1.0, 1.0)
        elif sp.kind == "ramified":
            xi = (chi(sp.ideal_class), 0.0)
        else:
            z = chi(sp.ideal_class)
            xi = (z, np.conj(z))
        s = [0j] + [(a1 ** n + a2 ** n) * (xi[0] ** n + xi[1] ** n) for n in range(1, kmax + 1)]
        h = _power_sums_to_series(s, kmax)
        new = {}
        for m, v in done.items():
            q = m * p
            k = 1
            while q <= count:
                new[q] = v * h[k]
                q *= p
                k += 1
        done.update(new)
    for n, v in done.items():
        out[n] = v
    return out


# ----------------------------------------------------------- gamma factors

class GammaFactor(namedtuple("GammaFactor", "mu_r mu_c")):
    """prod Gamma_R(s + mu) * prod Gamma_C(s + nu)."""

    __slots__ = ()

    @property
    def degree(self):
        return len(self.mu_r) + 2 * len(self.mu_c)

    def log(self, s):
        s = np.asarray(s, dtype=complex)
        out = np.zeros_like(s)
        for mu in self.mu_r:
            z = s + mu
            out += -0.5 * z * log(pi) + loggamma(z / 2)
        for nu in self.mu_c:
            z = s + nu
            out += log(2) - z * log(2 * pi) + loggamma(z)
        return out

    def pole_margin(self, s):
        """Distance from Re(u) = 0 to the first pole of gamma(s + u) on the left."""
        re = [np.real(s + mu) for mu in self.mu_r] + [np.real(s + nu) for nu in self.mu_c]
        return min(re)


def principal_series_gamma(t):
    """Archimedean factor of a weight-0 Maass form with spectral parameter t."""
    return GammaFactor((1j * t, -1j * t), ())


def analytic_conductor(C, gamma):
    q = float(C)
    for mu in gamma.mu_r:
        q *= 3 + abs(mu)
    for nu in gamma.mu_c:
        q *= (3 + abs(nu)) ** 2
    return q


# ------------------------------------------------------------ cutoff kernels

_CANDIDATES = (0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 11.0, 15.0, 20.0, 27.0, 36.0, 48.0, 64.0)


def _line_nodes(gamma, s, c, margin):
    """Trapezoid step and nodes on Re u = c, from the strip width and the decay."""
    d = c if c > 0 else min(-c, margin + c)
    h = min(0.25, d / 6.5)
    coarse = np.arange(0.0, 2000.0, 0.5)
    drop = np.real(gamma.log(s + c + 1j * coarse) - gamma.log(s + c)) \
        - np.log(np.abs(c + 1j * coarse) / abs(c))
    past = np.flatnonzero(drop < -46.0)
    T = coarse[past[0]] if past.size else coarse[-1]
    t = np.arange(0.0, T + h / 2, h)
    w = np.full(t.size, h / np.pi)
    w[0] *= 0.5
    return t, w


def _kernel_direct(gamma, s, s0, logy):
    """(1/2 pi i) int_(c) gamma(s+u)/gamma(s0) y^{-u} du/u, with c chosen per y.

    Each y picks the line minimising the integrand's size at t = 0, which
    keeps the rounding error proportional to the value itself.  Lines left
    of the origin pick up the residue gamma(s)/gamma(s0).
    """
    logy = np.atleast_1d(np.asarray(logy, dtype=float))
    norm = float(np.real(gamma.log(s0)))
    margin = gamma.pole_margin(s)
    cands = list(_CANDIDATES)
    if margin > 0:
        cands.append(-min(0.5, margin / 2))
    cands = np.array(cands)
    logg_c = np.real(gamma.log(s + cands)) - norm
    size = logg_c[None, :] - cands[None, :] * logy[:, None] - np.log(np.abs(cands))[None, :]
    choice = np.argmin(size, axis=1)
    out = np.empty(logy.size)
    for ci in np.unique(choice):
        c = cands[ci]
        sel = choice == ci
        t, w = _line_nodes(gamma, s, c, margin)
        u = c + 1j * t
        base = gamma.log(s + u) - norm - np.log(u)
        vals = np.exp(base[None, :] - u[None, :] * logy[sel, None])
        out[sel] = (np.real(vals) * w).sum(axis=1)
        if c < 0:
            out[sel] += np.exp(float(np.real(gamma.log(s))) - norm)
    return out


class _Kernel:
    def __init__(self, gamma, s, s0, lo=-36.0, hi=12.0, step=0.004):
        grid = np.arange(lo, hi + step / 2, step)
        vals = np.concatenate([_kernel_direct(gamma, s, s0, chunk)
                               for chunk in np.array_split(grid, max(1, grid.size // 1500))])
        big = np.flatnonzero(np.abs(vals) > 1e-17)
        top = grid[big[-1]] if big.size else lo
        self.log_ymax = float(min(top + step, hi))
        self.ymax = float(np.exp(self.log_ymax))
        keep = grid <= self.log_ymax + 10 * step
        self.lo = lo
        self.low_value = float(vals[0])
        self.spline = CubicSpline(grid[keep], vals[keep])

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        ly = np.log(y)
        out = np.where(ly < self.lo, self.low_value, 0.0)
        mid = (ly >= self.lo) & (ly <= self.log_ymax)
        out[mid] = self.spline(ly[mid])
        return out


@lru_cache(maxsize=64)
def kernel(gamma, s, s0=None):
    """Tabulated cutoff function for the main (s = s0) or dual (s = 1 - s0) sum."""
    return _Kernel(gamma, s, s if s0 is None else s0)


# ----------------------------------------------------------------------- AFE

AFEResult = namedtuple("AFEResult", "value epsilon epsilon_raw gap terms")


def _afe_sums(c, C, gamma, s0, X):
    main = kernel(gamma, s0)
    dual = kernel(gamma, 1 - s0, s0)
    n = np.arange(1, c.size, dtype=float)
    cn = c[1:]
    rc = sqrt(C)
    sa = np.sum(cn * n ** (-s0) * main(n / (X * rc)))
    sb = C ** (0.5 - s0) * np.sum(cn * n ** (s0 - 1) * dual(n * X / rc))
    return sa, sb


def afe_terms(C, gamma, s0=0.5, X2=1.25):
    """Number of coefficients needed by afe() for the given parameters."""
    rc = sqrt(C)
    return int(max(kernel(gamma, s0).ymax * X2, kernel(gamma, 1 - s0, s0).ymax * X2) * rc) + 2


def _solve_epsilon(sa1, sb1, sa2, sb2, tol=1e-3):
    den = sb2 - sb1
    if abs(den) < 1e-13:
        raise RootNumberError("smoothing parameters do not separate the two sums")
    raw = (sa1 - sa2) / den
    eps = 1 if np.real(raw) > 0 else -1
    if abs(raw - eps) > tol:
        raise RootNumberError(f"root number estimate {raw} is not within {tol} of +-1")
    return eps, raw


def afe(c, C, gamma, s0=0.5, X2=1.25, epsilon=None):
    """L(s0) from coefficients c[0..M] of a self-dual L-function of conductor C.

    The root number is solved from the two smoothing parameters X = 1 and X2
    unless given; gap is the discrepancy between the two evaluations with the
    rounded root number.
    """
    c = np.asarray(c)
    need = afe_terms(C, gamma, s0, X2)
    if c.size - 1 < need:
        raise ValueError(f"need {need} coefficients, got {c.size - 1}")
    c = c[: need + 1]
    sa1, sb1 = _afe_sums(c, C, gamma, s0, 1.0)
    sa2, sb2 = _afe_sums(c, C, gamma, s0, X2)
    if epsilon is None:
        eps, raw = _solve_epsilon(sa1, sb1, sa2, sb2)
    else:
        eps, raw = epsilon, float("nan")
    v1 = sa1 + eps * sb1
    v2 = sa2 + eps * sb2
    return AFEResult(complex(v1).real if np.isrealobj(c) else v1, eps, raw,
                     float(abs(v1 - v2)), need)


# ------------------------------------------------------------ central values

CentralValueRecord = namedtuple(
    "CentralValueRecord", "D chi_id form_id value epsilon terms_used consistency_gap")


def _rs_gamma(form):
    nu = (form.weight - 1) / 2
    return GammaFactor((), (nu, nu))


def _class_sum_weights(form, D, X_values):
    """Weights w_X(r) = lambda(r) r^{-1/2} sum_m psi eta(m)/m K(m^2 r X^{-1}/sqrt C)."""
    gamma = _rs_gamma(form)
    K = kernel(gamma, 0.5)
    rc = form.level * D
    M = int(K.ymax * max(X_values) * rc) + 2
    if M > form.bound:
        raise ValueError(f"{form.label}: need eigenvalues up to {M}, have {form.bound}")
    lam = form.lam_table(M)
    r = np.arange(M + 1, dtype=float)
    r[0] = 1.0
    base = lam / np.sqrt(r)
    base[0] = 0.0
    mw = _psi_eta(D, form.level, int(M ** 0.5) + 1)
    rows = []
    for X in X_values:
        W = np.zeros(M + 1)
        m = 1
        while m * m <= M:
            if mw[m]:
                top = M // (m * m)
                rr = np.arange(1, top + 1, dtype=float)
                W[1 : top + 1] += mw[m] / m * K(m * m * rr / (X * rc))
            m += 1
        rows.append(base * W)
    return np.array(rows), M


@lru_cache(maxsize=512)
def _central_values(label, D, X2):
    form = _resolve(label)
    field = QuadField(D)
    _check_coprime(form, D)
    group = class_group(field)
    weights, M = _class_sum_weights(form, D, (1.0, X2, 1.0 / X2))
    A = ideal_class_sums(group, weights)  # (3, h)
    out = []
    for chi in characters(group):
        vals = A @ chi.values
        s1, s2, s3 = (float(np.real(v)) for v in vals)
        eps, _ = _solve_epsilon(s1, s1, s2, s3)
        v1 = s1 + eps * s1
        v2 = s2 + eps * s3
        out.append(CentralValueRecord(D, chi.index, form.label, v1, eps, M, abs(v1 - v2)))
    return tuple(out)


_REGISTRY = {}


def _resolve(form_or_label):
    if isinstance(form_or_label, HeckeForm):
        _REGISTRY.setdefault(form_or_label.label, form_or_label)
        return form_or_label
    if form_or_label in _REGISTRY:
        return _REGISTRY[form_or_label]
    return builtin_form(form_or_label)


def central_values(form, field, X2=1.25):
    """L(1/2, pi x chi) for every class group character, in character order.

    Uses a_chi(r) = sum_g chi(g) #{ideals of norm r in g}: the weighted
    ideal sums per class are computed once and every character is a short
    inner product.
    """
    form = _resolve(form)
    D = field.D if isinstance(field, QuadField) else int(field)
    return list(_central_values(form.label, D, X2))


def central_value(form, chi, X2=1.25, direct=False):
    """CentralValueRecord for one character.

    direct=True evaluates the degree-4 approximate functional equation on the
    explicit Dirichlet coefficients instead of the class-sum shortcut.
    """
    form = _resolve(form)
    field = chi.group.field
    if not direct:
        idx = characters(chi.group).index(chi)
        return central_values(form, field, X2)[idx]
    _check_coprime(form, field.D)
    C = (form.level * field.D) ** 2
    gamma = _rs_gamma(form)
    need = afe_terms(C, gamma, 0.5, X2)
    c = np.real(rs_coefficients(form, chi, need).c)
    res = afe(c, C, gamma, 0.5, X2)
    return CentralValueRecord(field.D, chi.index, form.label, res.value, res.epsilon,
                              res.terms, res.gap)


def degree2_central_value(form, D=None, X2=1.25):
    """L(1/2, pi) (D is None) or L(1/2, pi x eta_E) as an AFEResult."""
    form = _resolve(form)
    gamma = form.gamma()
    if D is None:
        C = form.level
        c = None
    else:
        _check_coprime(form, D)
        C = form.level * D * D
    need = afe_terms(C, gamma, 0.5, X2)
    c = form.lam_table(need).copy()
    if D is not None:
        c *= _eta_table(D, need)
    return afe(c, C, gamma, 0.5, X2)


# ------------------------------------------------------------- values at 1

def l_at_one_exact_eta(field):
    """Class number formula: L(1, eta) = 2 pi h / (w sqrt D)."""
    h = class_group(field).h
    return 2 * pi * h / (field.units * sqrt(field.D))


def _adjoint_data(form, D=None):
    k = form.weight
    N = form.level
    if D is None:
        gamma = GammaFactor((1.0,), (k - 1.0,))
        return gamma, N * N
    return GammaFactor((0.0,), (k - 1.0,)), N * N * D ** 3


def _adjoint_coeffs(form, nmax, D=None):
    b = form.lam_square_table(nmax).copy()
    mod = form.level
    if D is not None:
        b *= _eta_table(D, nmax)
        mod *= D
    mroot = int(nmax ** 0.5) + 1
    w = np.ones(mroot + 1)
    w[np.gcd(np.arange(mroot + 1), mod) != 1] = 0.0
    return _square_convolve(b, w, nmax)


def _pair_data(f1, f2, D=None):
    if gcd(f1.level, f2.level) != 1:
        raise ConductorError("levels must be coprime")
    k1, k2 = f1.weight, f2.weight
    gamma = GammaFactor((), ((k1 + k2) / 2 - 1.0, abs(k1 - k2) / 2))
    C = (f1.level * f2.level) ** 2
    if D is not None:
        C *= D ** 4
    return gamma, C


def _pair_coeffs(f1, f2, nmax, D=None):
    b = f1.lam_table(nmax) * f2.lam_table(nmax)
    mod = f1.level * f2.level
    if D is not None:
        b = b * _eta_table(D, nmax)
        mod *= D
    mroot = int(nmax ** 0.5) + 1
    w = np.ones(mroot + 1)
    w[np.gcd(np.arange(mroot + 1), mod) != 1] = 0.0
    return _square_convolve(b, w, nmax)


LOneResult = namedtuple("LOneResult", "value method terms")


def _value_at_one(coeff_fn, C, gamma, available):
    """AFE when the coefficient budget allows it, exponentially damped sum otherwise."""
    need = afe_terms(C, gamma, 1.0)
    if need <= available:
        res = afe(coeff_fn(need), C, gamma, 1.0)
        return LOneResult(res.value, "afe", need)
    X = available / 40.0
    c = coeff_fn(available)
    n = np.arange(1, available + 1, dtype=float)
    return LOneResult(float(np.sum(c[1:] / n * np.exp(-n / X))), "damped", available)


def l_at_one(kind, field=None, form=None, form2=None, detail=False):
    """L(1, .) for kind in {eta, ad, ad_x_eta, ad_x_theta, rs_pair, rs_pair_x_eta,
    rs_pair_x_theta}.  theta = 1 + eta, so the _x_theta kinds are products."""
    if kind == "eta":
        res = LOneResult(l_at_one_exact_eta(field), "class-number", 0)
    elif kind in ("ad", "ad_x_eta"):
        form = _resolve(form)
        D = field.D if kind == "ad_x_eta" else None
        if D is not None:
            _check_coprime(form, D)
        gamma, C = _adjoint_data(form, D)
        res = _value_at_one(lambda m: _adjoint_coeffs(form, m, D), C, gamma, form.bound)
    elif kind in ("rs_pair", "rs_pair_x_eta"):
        f1, f2 = _resolve(form), _resolve(form2)
        D = field.D if kind == "rs_pair_x_eta" else None
        gamma, C = _pair_data(f1, f2, D)
        res = _value_at_one(lambda m: _pair_coeffs(f1, f2, m, D), C, gamma,
                            min(f1.bound, f2.bound))
    elif kind == "ad_x_theta":
        a = l_at_one("ad", field, form, detail=True)
        b = l_at_one("ad_x_eta", field, form, detail=True)
        res = LOneResult(a.value * b.value, f"{a.method}*{b.method}", max(a.terms, b.terms))
    elif kind == "rs_pair_x_theta":
        a = l_at_one("rs_pair", field, form, form2, detail=True)
        b = l_at_one("rs_pair_x_eta", field, form, form2, detail=True)
        res = LOneResult(a.value * b.value, f"{a.method}*{b.method}", max(a.terms, b.terms))
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return res if detail else res.value


def kind_conductor(kind, field=None, form=None, form2=None):
    """Analytic conductor used for the prime-sum cutoff of each kind."""
    if kind == "eta":
        return float(field.D) * 3
    if kind == "ad":
        g, C = _adjoint_data(_resolve(form))
        return analytic_conductor(C, g)
    if kind == "ad_x_theta":
        f = _resolve(form)
        g1, C1 = _adjoint_data(f)
        g2, C2 = _adjoint_data(f, field.D)
        return analytic_conductor(C1, g1) * analytic_conductor(C2, g2)
    if kind == "rs_pair_x_theta":
        f1, f2 = _resolve(form), _resolve(form2)
        g1, C1 = _pair_data(f1, f2)
        g2, C2 = _pair_data(f1, f2, field.D)
        return analytic_conductor(C1, g1) * analytic_conductor(C2, g2)
    raise ValueError(f"unknown kind {kind!r}")


def prime_sum(kind, x, field=None, form=None, form2=None):
    """sum_{p <= x} lambda(p)/p with the prime coefficient of the given kind."""
    total = 0.0
    for p in primes_up_to(int(x)):
        eta = kronecker(-field.D, p) if field is not None else 0
        if kind == "eta":
            c = eta
        elif kind == "ad":
            c = _resolve(form).lam_prime_power(p, 2)
        elif kind == "ad_x_theta":
            c = _resolve(form).lam_prime_power(p, 2) * (1 + eta)
        elif kind == "rs_pair_x_theta":
            c = _resolve(form).lam_prime(p) * _resolve(form2).lam_prime(p) * (1 + eta)
        else:
            raise ValueError(f"unknown kind {kind!r}")
        total += c / p
    return total


# --------------------------------------------------------- GRH majorants

def _chi_roots(chi, sp):
    if sp.kind == "inert":
        return (-1.0, 1.0)
    z = chi(sp.ideal_class)
    if sp.kind == "ramified":
        return (z, 0.0)
    return (z, np.conj(z))


def rs_log_conductor(form, D):
    """log Q_{pi x chi} with Q = N^2 D^2 (k/2)^4."""
    return log((form.level * D) ** 2 * (form.weight / 2) ** 4)


def chandee_rhs(form, chi, x):
    """Majorant for log L(1/2, pi x chi) from the four local roots at p^n <= x."""
    if x <= 1:
        raise ValueError("x must exceed 1")
    form = _resolve(form)
    field = chi.group.field
    lx = log(x)
    sig = 0.5 + 1 / lx
    total = 0.0
    for p in primes_up_to(int(x)):
        a = form.satake(p)
        xi = _chi_roots(chi, prime_splitting(field, p))
        n, q = 1, p
        while q <= x:
            s = (a[0] ** n + a[1] ** n) * (xi[0] ** n + xi[1] ** n)
            total += float(np.real(s)) / (n * q ** sig) * log(x / q) / lx
            n += 1
            q *= p
    return total + 10 * rs_log_conductor(form, field.D) / lx


CorollaryTerms = namedtuple("CorollaryTerms", "split_linear split_square mu remainder total")


def corollary_terms(form, chi, x, l_values=None):
    """Split-prime linear and square sums, mu_{j,D}(x) and 10 log Q / log x.

    l_values optionally supplies (L(1, eta), L(1, Ad), L(1, Ad x eta)).
    """
    form = _resolve(form)
    field = chi.group.field
    lx = log(x)
    lin = 0.0
    sq = 0.0
    chi2 = chi.power(2)
    for p in primes_up_to(int(x)):
        sp = prime_splitting(field, p)
        if sp.kind == "inert":
            continue
        if sp.kind == "split":
            ac = 2 * float(np.real(chi(sp.ideal_class)))
        else:
            ac = float(np.real(chi(sp.ideal_class)))
        lin += ac * form.lam_prime(p) / p ** (0.5 + 1 / lx) * log(x / p) / lx
        if sp.kind == "split" and p * p <= x:
            ac2 = 2 * float(np.real(chi2(sp.ideal_class)))
            sq += ac2 * (form.lam_prime_power(p, 2) - form.psi(p)) / p ** (1 + 2 / lx) \
                * log(x / p ** 2) / lx
    sq *= 0.5
    if l_values is None:
        l_values = (l_at_one("eta", field), l_at_one("ad", field, form),
                    l_at_one("ad_x_eta", field, form))
    le, la, lae = l_values
    mu = 0.5 * log(le) + 0.5 * log(la) - 0.5 * log(lae) - 0.5 * log(lx)
    rem = 10 * rs_log_conductor(form, field.D) / lx
    return CorollaryTerms(lin, sq, mu, rem, lin + sq + mu + rem)
