"""Character-sum combinatorics, moment quantities and period experiments.

Everything here is a finite computation over the class group of an
imaginary quadratic field.  Exact identities (orthogonality, Plancherel,
AM-GM) are checked to rounding; trends are fitted and reported.
"""

from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from math import comb, factorial, gcd, lgamma, log, sqrt

import numpy as np
from scipy.special import sph_harm_y

from .numtheory import factorize, fundamental_discriminants, kronecker, primes_up_to
from .quadratic_core import QuadField, characters, class_group, prime_splitting

__all__ = [
    "PreconditionError",
    "InvariantError",
    "CombinatoricsTable",
    "MomentParameters",
    "LValuesAtOne",
    "PeriodRecord",
    "FractionalMomentRecord",
    "R",
    "nu",
    "p_j",
    "B",
    "H_local",
    "H",
    "combinatorics",
    "combinatorial_identities",
    "orthogonality_bruteforce",
    "orthogonality_sweep",
    "moment_inequality_check",
    "inequality_corpus",
    "fac_check",
    "l_values_at_one",
    "mu_var",
    "moment_parameters",
    "var_lower_bound_fit",
    "twisted_period",
    "twisted_periods",
    "plancherel_check",
    "moment_sample",
    "fractional_moment_record",
    "fractional_moment_experiment",
    "loglog_slope",
    "waldspurger_ratio_probe",
    "real_spherical_harmonic",
    "gamma_symmetrized_harmonic",
    "joint_equidistribution_experiment",
    "FRACTIONAL_COLUMNS",
    "JOINT_COLUMNS",
]

FRACTIONAL_COLUMNS = ("D", "h", "alpha", "beta", "M", "mu_D", "var_D", "var_star_D",
                      "model", "clamped_count")
JOINT_COLUMNS = ("D", "h", "l", "m", "bin", "W1", "W2", "joint", "defect")


class PreconditionError(ValueError):
    pass


class InvariantError(ArithmeticError):
    """A finite identity that must hold exactly did not."""


# ------------------------------------------------------------ combinatorics

def _kind(field, p):
    return prime_splitting(field, p).kind


def R(n, field):
    """R(p^a) = C(a, a/2) at split p, 1 at ramified p (a even), else 0."""
    out = 1
    for p, a in factorize(n):
        if a % 2:
            return 0
        kind = _kind(field, p)
        if kind == "split":
            out *= comb(a, a // 2)
        elif kind == "inert":
            return 0
    return out


def nu(n):
    out = 1
    for _, a in factorize(n):
        out *= factorial(a)
    return out


def p_j(n, j):
    """Indicator of n having exactly j prime factors with multiplicity."""
    return int(sum(a for _, a in factorize(n)) == j) if n > 1 else int(j == 0)


@lru_cache(maxsize=None)
def B(alpha, beta, n, m):
    """The constrained double sum B_{alpha,beta}(n, m); alpha = beta is allowed."""
    if alpha < 1 or beta < 1 or n < 0 or not 0 <= m <= n:
        raise PreconditionError("need alpha, beta >= 1 and 0 <= m <= n")
    total = 0
    for r in range(m + 1):
        for s in range(n - m + 1):
            if 2 * alpha * r + (beta - alpha) * m - beta * n + 2 * beta * s == 0:
                total += comb(m, r) * comb(n - m, s)
    return comb(n, m) * total


def H_local(alpha, beta, v, b, c):
    """sum_m B(v, m) b^m c^(v-m); exact for int or Fraction inputs."""
    if alpha == beta:
        raise PreconditionError("H needs distinct alpha and beta")
    return sum(B(alpha, beta, v, m) * b ** m * c ** (v - m) for m in range(v + 1))


def H(alpha, beta, n, b, c):
    """Multiplicative extension; b and c map primes to numbers."""
    out = 1
    for p, v in factorize(n):
        out *= H_local(alpha, beta, v, b(p), c(p))
    return out


@dataclass
class CombinatoricsTable:
    n: int
    m: int
    R: object
    nu: int
    omega: int
    B: int
    H: object


def combinatorics(alpha, beta, n, m, field=None, b=None, c=None):
    """R(n), nu(n), Omega(n), B(n, m) and, given b and c, H(n)."""
    if n < 0 or m < 0:
        raise PreconditionError("n and m must be nonnegative")
    omega = sum(a for _, a in factorize(n)) if n > 1 else 0
    h_val = None
    if b is not None and c is not None and n >= 1:
        h_val = H(alpha, beta, n, b, c)
    return CombinatoricsTable(
        n=n, m=m,
        R=R(n, field) if field is not None and n >= 1 else None,
        nu=nu(n) if n >= 1 else 1,
        omega=omega,
        B=B(alpha, beta, n, m) if m <= n else 0,
        H=h_val,
    )


def _v2(a):
    return (a & -a).bit_length() - 1


def combinatorial_identities(nmax=12, abmax=4):
    """Check the vanishing at n = 1, the parity support, the trivial bound and
    the n = 2 rows.  Returns a dict of failure lists (all empty when fine)."""
    fails = {"n1": [], "parity": [], "trivial": [], "row2": []}
    for a in range(1, abmax + 1):
        for b in range(1, abmax + 1):
            if a != b and (B(a, b, 1, 0), B(a, b, 1, 1)) != (0, 0):
                fails["n1"].append((a, b))
            row2 = tuple(B(a, b, 2, m) for m in range(3))
            if row2 != ((2, 0, 2) if a != b else (2, 4, 2)):
                fails["row2"].append((a, b, row2))
            for n in range(nmax + 1):
                for m in range(n + 1):
                    val = B(a, b, n, m)
                    if val > comb(n, m) * 2 ** n:
                        fails["trivial"].append((a, b, n, m))
                    if _v2(a) == _v2(b):
                        allowed = n % 2 == 0
                    elif _v2(a) < _v2(b):
                        allowed = m % 2 == 0
                    else:
                        allowed = (n - m) % 2 == 0
                    if val and not allowed:
                        fails["parity"].append((a, b, n, m))
    return fails


# ------------------------------------------------------- character sums

@lru_cache(maxsize=64)
def _char_matrix_D(D):
    m = np.array([chi.values for chi in characters(class_group(QuadField(D)))])
    m.setflags(write=False)
    return m


def _char_matrix(group):
    return _char_matrix_D(group.field.D)


def _local_a(vals, sp, power):
    """a_{chi^power}(p) for every character as a vector."""
    if sp.kind == "inert":
        return np.zeros(vals.shape[0])
    z = vals[:, sp.ideal_class] ** power
    if sp.kind == "ramified":
        return z.real
    return 2 * z.real


def _has_torsion(h, beta):
    return gcd(h, 2 * beta) != 1


OrthogonalityResult = namedtuple("OrthogonalityResult", "D n params lhs rhs deviation")


def orthogonality_bruteforce(field, n, nu_exp=None, alpha=None, beta=None, b=None, c=None,
                             check_torsion=True):
    """Sum over all characters of a~_{chi^nu}(n), or of f_chi(n) for the mixed case.

    The mixed case takes alpha != beta and b, c as callables on split primes
    (integer values keep the comparison exact).
    """
    group = class_group(field)
    h = group.h
    D = field.D
    vals = _char_matrix(group)
    fac = factorize(n)
    if nu_exp is not None:
        if n >= (D / 4) ** (1 / nu_exp):
            raise PreconditionError(f"n = {n} is not below (D/4)^(1/{nu_exp})")
        if nu_exp % 2 == 0 and any(_kind(field, p) != "split" for p, _ in fac):
            raise PreconditionError("even nu needs n composed of split primes")
        prod = np.ones(h)
        for p, a in fac:
            prod = prod * _local_a(vals, prime_splitting(field, p), nu_exp) ** a
        lhs = float(prod.sum())
        rhs = R(n, field) * h
        params = ("nu", nu_exp)
    else:
        if alpha is None or beta is None or alpha == beta:
            raise PreconditionError("mixed case needs distinct alpha, beta")
        if n >= (D / 4) ** (1 / max(alpha, beta)):
            raise PreconditionError(f"n = {n} is not below (D/4)^(1/max(alpha, beta))")
        if check_torsion and _has_torsion(h, beta):
            raise PreconditionError(f"class number {h} has torsion dividing {2 * beta}")
        if any(_kind(field, p) != "split" for p, _ in fac):
            raise PreconditionError("b and c live on split primes only")
        prod = np.ones(h)
        for p, e in fac:
            sp = prime_splitting(field, p)
            f = _local_a(vals, sp, alpha) * b(p) + _local_a(vals, sp, beta) * c(p)
            prod = prod * f ** e
        lhs = float(prod.sum())
        rhs = H(alpha, beta, n, b, c) * h
        params = ("alpha,beta", (alpha, beta))
    return OrthogonalityResult(D, n, params, lhs, rhs, abs(lhs - rhs))


OrthogonalitySweep = namedtuple("OrthogonalitySweep", "D h cases max_deviation skipped")


def orthogonality_sweep(field, max_exp=3, seed=0, check_torsion=True):
    """Every in-precondition case with nu <= max_exp and distinct alpha, beta <= max_exp."""
    rng = np.random.default_rng(seed)
    D = field.D
    h = class_group(field).h
    cases = []
    skipped = []
    for v in range(1, max_exp + 1):
        top = (D / 4) ** (1 / v)
        for n in range(1, int(np.ceil(top))):
            if n >= top:
                continue
            try:
                cases.append(orthogonality_bruteforce(field, n, nu_exp=v))
            except PreconditionError:
                pass
    for a in range(1, max_exp + 1):
        for bb in range(1, max_exp + 1):
            if a == bb:
                continue
            if check_torsion and _has_torsion(h, bb):
                skipped.append((a, bb, "torsion"))
                continue
            top = (D / 4) ** (1 / max(a, bb))
            ns = [n for n in range(1, int(np.ceil(top))) if n < top
                  and all(_kind(field, p) == "split" for p, _ in factorize(n))]
            if not ns:
                skipped.append((a, bb, "no split-supported n"))
            for n in ns:
                ps = [p for p, _ in factorize(n)]
                bv = {p: int(rng.integers(-2, 3)) for p in ps}
                cv = {p: int(rng.integers(-2, 3)) for p in ps}
                cases.append(orthogonality_bruteforce(
                    field, n, alpha=a, beta=bb, b=bv.get, c=cv.get,
                    check_torsion=check_torsion))
    worst = max((r.deviation for r in cases), default=0.0)
    return OrthogonalitySweep(D, h, cases, worst, skipped)


# -------------------------------------------------- moment inequalities

InequalityResult = namedtuple("InequalityResult", "D h x k params lhs rhs holds")


def _prime_vectors(field, vals, x, power):
    ps = primes_up_to(int(x))
    sps = [prime_splitting(field, p) for p in ps]
    A = np.array([_local_a(vals, sp, power) for sp in sps]).T if ps else np.zeros((vals.shape[0], 0))
    return ps, sps, A


def moment_inequality_check(field, x, k, nu_exp=None, alpha=None, beta=None, b=None, c=None,
                            rtol=1e-9):
    """Exact 2k-th moment of the short prime sum against its closed-form bound.

    b and c are arrays over the primes <= x (zero where not allowed).
    """
    group = class_group(field)
    h, D = group.h, field.D
    vals = _char_matrix(group)
    if x < 2 or k < 1:
        raise PreconditionError("need x >= 2 and k >= 1")
    top = max(alpha or 0, beta or 0) if nu_exp is None else nu_exp
    if x ** (2 * k) >= (D / 4) ** (1 / top):
        raise PreconditionError(f"x^(2k) = {x ** (2 * k)} is not below (D/4)^(1/{top})")
    if b is None or (nu_exp is None and c is None):
        raise PreconditionError("coefficient arrays over the primes <= x are required")
    if nu_exp is not None:
        ps, sps, A = _prime_vectors(field, vals, x, nu_exp)
        bv = np.asarray(b, dtype=float)
        if nu_exp % 2 == 0:
            bv = bv * np.array([sp.kind == "split" for sp in sps])
        pa = np.array(ps, dtype=float)
        lhs = float(np.sum((A @ (bv / np.sqrt(pa))) ** (2 * k)))
        eta = np.array([kronecker(-D, p) for p in ps], dtype=float)
        base = 0.5 * np.sum((1 + eta) * bv ** 2 / pa)
        rhs = factorial(2 * k) / factorial(k) * base ** k * h
        params = ("nu", nu_exp)
    else:
        if alpha == beta:
            raise PreconditionError("mixed case needs distinct alpha, beta")
        ps, sps, A1 = _prime_vectors(field, vals, x, alpha)
        _, _, A2 = _prime_vectors(field, vals, x, beta)
        split = np.array([sp.kind == "split" for sp in sps])
        bv = np.asarray(b, dtype=float) * split
        cv = np.asarray(c, dtype=float) * split
        pa = np.array(ps, dtype=float)
        lhs = float(np.sum(((A1 @ (bv / np.sqrt(pa))) + (A2 @ (cv / np.sqrt(pa)))) ** (2 * k)))
        phi = np.sum((bv ** 2 + cv ** 2) / pa)
        if _v2(alpha) != _v2(beta):
            psi, step = np.sum(bv ** 2 * np.abs(cv) / pa ** 1.5), 3
        else:
            psi, step = np.sum((np.abs(bv) + np.abs(cv)) ** 4 / pa ** 2), 4
        total = 0.0
        for l2 in range(0, 2 * k // step + 1):
            rest = 2 * k - step * l2
            if rest % 2:
                continue
            l1 = rest // 2
            total += factorial(2 * k) / (factorial(l1) * factorial(l2)) * phi ** l1 * psi ** l2
        rhs = total * h
        params = ("alpha,beta", (alpha, beta))
    holds = lhs <= rhs * (1 + rtol) + rtol
    return InequalityResult(D, h, x, k, params, lhs, rhs, bool(holds))


_CORPUS_X = (2, 3, 5, 7, 11, 13, 17, 23, 31, 50, 100)


def _first_fundamental_above(bound, cap):
    lo = int(bound) + 1
    for D in fundamental_discriminants(lo, min(cap, lo + 400)):
        return D
    return None


def inequality_corpus(seed=0, draws=100, kmax=4, xmax=100, dcap=60000, extra_D=(47, 71, 163)):
    """The seeded randomized corpus: every (lemma, exponents, k, x) whose
    precondition admits a fundamental D <= dcap, using the smallest such D,
    plus the requested small discriminants wherever they qualify.

    Returns (results, skipped) where skipped lists (D, case) pairs that
    violate the precondition.
    """
    rng = np.random.default_rng(seed)
    exps = [("nu", v) for v in (1, 2, 3)] + [("ab", (a, b)) for a in (1, 2, 3)
                                              for b in (1, 2, 3) if a != b]
    results, skipped = [], []
    for kind, e in exps:
        top = e if kind == "nu" else max(e)
        for k in range(1, kmax + 1):
            for x in _CORPUS_X:
                if x > xmax:
                    continue
                need = 4 * x ** (2 * k * top)
                Ds = []
                if need < dcap:
                    D0 = _first_fundamental_above(need, dcap)
                    if D0 is not None:
                        Ds.append(D0)
                for D in extra_D:
                    if D not in Ds:
                        if D > need:
                            Ds.append(D)
                        else:
                            skipped.append((D, kind, e, k, x))
                for D in Ds:
                    field = QuadField(D)
                    npr = len(primes_up_to(x))
                    for _ in range(draws):
                        b = rng.uniform(-2, 2, npr)
                        c = rng.uniform(-2, 2, npr)
                        if kind == "nu":
                            results.append(moment_inequality_check(field, x, k, nu_exp=e, b=b))
                        else:
                            results.append(moment_inequality_check(
                                field, x, k, alpha=e[0], beta=e[1], b=b, c=c))
    return results, skipped


def fac_check(kmax=50):
    """(2k)!/k! <= sqrt(2) (4k/e)^k; returns the smallest log-margin."""
    worst = float("inf")
    for k in range(1, kmax + 1):
        lhs = lgamma(2 * k + 1) - lgamma(k + 1)
        rhs = 0.5 * log(2) + k * (log(4 * k) - 1)
        worst = min(worst, rhs - lhs)
    return worst


# ------------------------------------------------------ moment parameters

LValuesAtOne = namedtuple("LValuesAtOne", "eta ad ad_x_eta pair_x_theta methods")


def l_values_at_one(field, forms):
    """L(1, eta), L(1, Ad pi_j), L(1, Ad pi_j x eta) and L(1, pi1 x pi2 x theta)."""
    from .lfunctions import l_at_one

    methods = []
    ad, ade = [], []
    for f in forms:
        r1 = l_at_one("ad", field, f, detail=True)
        r2 = l_at_one("ad_x_eta", field, f, detail=True)
        ad.append(r1.value)
        ade.append(r2.value)
        methods += [r1.method, r2.method]
    pair = None
    if len(forms) == 2 and forms[0] != forms[1]:
        r = l_at_one("rs_pair_x_theta", field, forms[0], forms[1], detail=True)
        pair = r.value
        methods.append(r.method)
    return LValuesAtOne(l_at_one("eta", field), tuple(ad), tuple(ade), pair, tuple(methods))


def mu_var(lv, loglog_x):
    """(mu, var, var_star) from L-values at 1 and log log x.

    lv needs eta, ad, ad_x_eta (sequences over the two forms) and
    pair_x_theta (None gives var = nan).
    """
    mu = 0.5 * log(lv.eta) - 0.5 * loglog_x
    var_star = 0.5 * loglog_x + 0.5 * log(lv.eta)
    for a, ae in zip(lv.ad, lv.ad_x_eta):
        mu += 0.25 * log(a) - 0.25 * log(ae)
        var_star += 0.25 * log(a * ae)
    if lv.pair_x_theta is None:
        var = float("nan")
    else:
        var = var_star + 0.5 * log(lv.pair_x_theta)
    return mu, var, var_star


@dataclass
class MomentParameters:
    D: int
    x: float
    z: float
    Delta: float
    k: int
    V: float
    curlyC: float
    H_E: float
    mu_D: float
    var_D: float
    var_star_D: float
    eps: float = 0.1
    A: float = 1.0
    l_values: object = dc_field(default=None, repr=False)


def moment_parameters(D, forms=("11.2.a.a", "5.4.a.a"), x=None, eps=0.1, A=1.0, V=None,
                      l_values=None):
    """Fill in the finite ingredients of the fractional-moment argument.

    mu_D and var_D are evaluated at x = D.  The cutoff x defaults to
    D^{A/(eps V)} with V at the top of its range, z = x^{1/Delta} and
    k = min([((1 - 5 eps) V)^2 / (8 var)], [eps V Delta / (3 A)]).
    """
    from .lfunctions import builtin_form

    field = QuadField(D)
    lv = l_values or l_values_at_one(field, forms)
    llD = log(log(D))
    mu, var, var_star = mu_var(lv, llD)
    v_used = var if var == var else var_star
    if V is None:
        V = sqrt(log(D)) - mu
    if x is None:
        x = D ** (A / (eps * V))
    Delta = llD ** (1 / 3)
    z = x ** (1 / Delta)
    k = max(0, min(int(((1 - 5 * eps) * V) ** 2 / (8 * v_used)), int(eps * V * Delta / (3 * A))))
    qmax = max(builtin_form(f).analytic_conductor for f in forms)
    curlyC = llD + log(qmax) ** (1 / 3)
    H_E = lv.eta * sqrt(D)
    return MomentParameters(D, x, z, Delta, k, V, curlyC, H_E, mu, var, var_star, eps, A, lv)


def var_lower_bound_fit(records):
    """Smallest c with var_D >= (1/2) log log D - c log log log D on the records."""
    c = 0.0
    for r in records:
        lll = log(log(log(r.D)))
        gap = 0.5 * log(log(r.D)) - r.var_D
        if lll > 0:
            c = max(c, gap / lll)
    return c


# ------------------------------------------------------------- periods

def twisted_period(values, chi):
    """(1/h) sum_t f(t . base) conj(chi(t)), values indexed like the group."""
    values = np.asarray(values)
    return complex(np.mean(values * np.conj(chi.values)))


def twisted_periods(values, group):
    vals = _char_matrix(group)
    return np.conj(vals) @ np.asarray(values, dtype=complex) / group.h


@dataclass
class PeriodRecord:
    D: int
    observable: str
    periods: np.ndarray
    diagonal: complex
    marginals: tuple
    gap: float
    majorant: float


def plancherel_check(f1, f2, group, alpha=1, beta=1, observable=""):
    """Compare the diagonal average (1/h) sum_t f1(t^alpha) conj(f2(t^beta))
    with the sum over character pairs (chi, psi), chi^alpha = psi^beta, of
    P^chi(f1) conj(P^psi(f2)).  For alpha = beta = 1 this is the usual
    Plancherel identity."""
    h = group.h
    f1 = np.asarray(f1, dtype=complex)
    f2 = np.asarray(f2, dtype=complex)
    ia = [group.power(g, alpha) for g in range(h)]
    ib = [group.power(g, beta) for g in range(h)]
    diag = complex(np.mean(f1[ia] * np.conj(f2[ib])))
    chis = characters(group)
    P1 = twisted_periods(f1, group)
    P2 = twisted_periods(f2, group)
    if alpha == beta == 1:
        terms = P1 * np.conj(P2)
    else:
        pa = {chi.power(alpha).exponent_vector: [] for chi in chis}
        for j, psi in enumerate(chis):
            key = psi.power(beta).exponent_vector
            if key in pa:
                pa[key].append(j)
        terms = []
        for i, chi in enumerate(chis):
            for j in pa[chi.power(alpha).exponent_vector]:
                terms.append(P1[i] * np.conj(P2[j]))
        terms = np.array(terms)
    spectral = complex(np.sum(terms))
    majorant = float(np.sum(np.abs(terms)))
    return PeriodRecord(group.field.D, observable, P1, diag,
                        (complex(np.mean(f1)), complex(np.mean(f2))),
                        abs(diag - spectral), majorant)


# ---------------------------------------------------- fractional moments

def moment_sample(lo, hi, forms=("11.2.a.a", "5.4.a.a"), inert_at=None, odd=False):
    """Fundamental D in [lo, hi] coprime to the levels, inert at every prime
    dividing a level (so each twisted root number is +1)."""
    from .lfunctions import builtin_form

    levels = [builtin_form(f).level for f in forms]
    if inert_at is None:
        inert_at = sorted({p for N in levels for p, _ in factorize(N)} if any(
            N > 1 for N in levels) else set())
    prod = 1
    for N in levels:
        prod *= N
    out = []
    for D in fundamental_discriminants(lo, hi):
        if odd and D % 2 == 0:
            continue
        if gcd(D, prod) != 1:
            continue
        if all(kronecker(-D, p) == -1 for p in inert_at):
            out.append(D)
    return out


@dataclass
class FractionalMomentRecord:
    D: int
    h: int
    alpha: int
    beta: int
    M: float
    mu_D: float
    var_D: float
    var_star_D: float
    model: float
    clamped_count: int
    amgm: float = 0.0
    rescaled: float = 0.0
    window_hits: int = 0
    window_total: int = 0
    min_value: float = 0.0
    methods: tuple = ()

    def row(self):
        return tuple(getattr(self, c) for c in FRACTIONAL_COLUMNS)


def fractional_moment_record(D, form1="11.2.a.a", form2="5.4.a.a", alpha=1, beta=1,
                             c0=1.0, eps=0.0, clamp_tol=1e-6, X2=1.25, central=None,
                             l_values=None):
    """One discriminant of the fractional-moment experiment.

    central optionally supplies the two lists of central values (in
    character order) and l_values an LValuesAtOne, e.g. from a cache.
    Raises PreconditionError when the (a) path gets equal forms or the (b)
    path meets 2 beta torsion, and InvariantError if a central value is
    negative beyond clamp_tol.
    """
    from .lfunctions import central_values

    field = QuadField(D)
    group = class_group(field)
    h = group.h
    path_a = alpha == beta == 1
    if path_a and form1 == form2:
        raise PreconditionError("the alpha = beta = 1 path needs distinct forms")
    if not path_a and _has_torsion(h, beta):
        raise PreconditionError(f"h = {h} has torsion dividing {2 * beta}")
    chis = characters(group)
    idx = {chi.exponent_vector: i for i, chi in enumerate(chis)}
    if central is None:
        central = (central_values(form1, field, X2), central_values(form2, field, X2))
    L1 = np.array([r.value for r in central[0]])
    L2 = np.array([r.value for r in central[1]])
    low = min(L1.min(), L2.min())
    if low < -clamp_tol:
        raise InvariantError(f"D = {D}: central value {low} below -{clamp_tol}")
    ia = [idx[chi.power(alpha).exponent_vector] for chi in chis]
    ib = [idx[chi.power(beta).exponent_vector] for chi in chis]
    a1, a2 = L1[ia], L2[ib]
    clamped = int(np.sum(a1 < 0) + np.sum(a2 < 0))
    a1 = np.maximum(a1, 0.0)
    a2 = np.maximum(a2, 0.0)
    lv = l_values or l_values_at_one(field, (form1, form2) if form1 != form2 else (form1,))
    if len(lv.ad) == 1:
        lv = lv._replace(ad=lv.ad * 2, ad_x_eta=lv.ad_x_eta * 2)
    ad1, ad2 = lv.ad
    # the exp(-c0 |lambda_chi| / lambda_pi) weight is 1 for imaginary fields
    weight = np.array([np.exp(-c0 * abs(chi.lambda_chi)) for chi in chis])
    terms = weight * np.sqrt(a1 * a2 / (ad1 * ad2))
    M = float(np.sum(terms) / h)
    amgm = float(np.sum(weight * 0.5 * (a1 / ad1 + a2 / ad2)) / h)
    llD = log(log(D))
    mu, var, var_star = mu_var(lv, llD)
    v = var if path_a else var_star
    model = float(np.exp(mu + (0.5 + eps) * v) / sqrt(ad1 * ad2))
    # log-normal window per form: mean mu_j, variance s_j^2
    hits = 0
    total = 0
    for vals_j, a, ae in ((L1, ad1, lv.ad_x_eta[0]), (L2, ad2, lv.ad_x_eta[1])):
        mu_j = 0.5 * log(lv.eta) + 0.5 * log(a) - 0.5 * log(ae) - 0.5 * llD
        s_j = sqrt(max(llD + log(lv.eta) + log(a * ae), 1e-12))
        for val in vals_j:
            total += 1
            if val > 0 and abs(log(val) - mu_j) <= 3 * s_j:
                hits += 1
    return FractionalMomentRecord(
        D, h, alpha, beta, M, mu, var, var_star, model, clamped,
        amgm=amgm, rescaled=M * log(D) ** 0.25, window_hits=hits, window_total=total,
        min_value=float(low), methods=lv.methods)


def fractional_moment_experiment(D_list, form1="11.2.a.a", form2="5.4.a.a", alpha=1, beta=1,
                                 c0=1.0, eps=0.0, threads=1, clamp_tol=1e-6, provider=None):
    """Records for every D that meets the path preconditions, in input order.

    provider(D) may return (central, l_values) to bypass recomputation.
    Returns (records, skipped) where skipped holds (D, reason).
    """
    def one(D):
        try:
            central, lv = provider(D) if provider else (None, None)
            return fractional_moment_record(D, form1, form2, alpha, beta, c0, eps, clamp_tol,
                                            central=central, l_values=lv)
        except PreconditionError as exc:
            return (D, str(exc))

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            out = list(ex.map(one, D_list))
    else:
        out = [one(D) for D in D_list]
    recs = [r for r in out if isinstance(r, FractionalMomentRecord)]
    skipped = [r for r in out if not isinstance(r, FractionalMomentRecord)]
    return recs, skipped


def loglog_slope(D_values, y_values):
    """Least-squares slope of log y against log log D."""
    t = np.log(np.log(np.asarray(D_values, dtype=float)))
    y = np.log(np.asarray(y_values, dtype=float))
    return float(np.polyfit(t, y, 1)[0])


# ------------------------------------------------------ Waldspurger probe

WaldspurgerRow = namedtuple("WaldspurgerRow", "D chi_index period l_value ratio flag")
WaldspurgerSummary = namedtuple("WaldspurgerSummary", "D h mean std dispersion defined")


def waldspurger_ratio_probe(D_list, form="11.2.a.a", p=11, observable=None, l_floor=1e-8):
    """rho(chi) = |P^chi|^2 sqrt(D) L(1, eta)^2 L(1, Ad) / L(1/2, pi x chi)
    for the class-set observable paired with the form.

    The default observable is the mass-orthogonal vector (u_0, -u_1) on a
    two-element class set, where u_i are the unit-group orders.  Other
    pairings must be passed explicitly.
    """
    from .lfunctions import central_values, l_at_one
    from .quaternion_orders import class_set_map, left_ideal_classes

    cs = left_ideal_classes(p)
    if observable is None:
        if len(cs.ideals) != 2:
            raise PreconditionError("no default observable: pass the paired vector")
        observable = (cs.unit_orders[0], -cs.unit_orders[1])
    f = np.asarray(observable, dtype=float)
    if abs(sum(m * v for m, v in zip(cs.masses, observable))) > 1e-12:
        raise PreconditionError("observable must be orthogonal to constants")
    rows, summaries = [], []
    for D in D_list:
        field = QuadField(D)
        group = class_group(field)
        vals = f[class_set_map(p, D)]
        P = twisted_periods(vals, group)
        recs = central_values(form, field)
        le = l_at_one("eta", field)
        la = l_at_one("ad", field, form)
        good = []
        for i, r in enumerate(recs):
            L = r.value
            if L < l_floor:
                rows.append(WaldspurgerRow(D, i, P[i], L, float("nan"), "undefined"))
                continue
            rho = abs(P[i]) ** 2 * sqrt(D) * le ** 2 * la / L
            flag = "period-zero" if abs(P[i]) < 1e-12 else ""
            rows.append(WaldspurgerRow(D, i, P[i], L, rho, flag))
            if not flag:
                good.append(rho)
        if good:
            m, s = float(np.mean(good)), float(np.std(good))
            summaries.append(WaldspurgerSummary(D, group.h, m, s, s / m, len(good)))
        else:
            summaries.append(WaldspurgerSummary(D, group.h, float("nan"), float("nan"),
                                                float("nan"), 0))
    return rows, summaries


# ------------------------------------------- joint equidistribution

def real_spherical_harmonic(l, m, pts):
    """Real Y_{l,m} at unit vectors, scaled so the sphere mean of Y^2 is 1."""
    if abs(m) > l or l > 12:
        raise PreconditionError("need |m| <= l <= 12")
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if l == 0:
        return np.ones(len(pts))
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    phi = np.arctan2(y, x)
    Y = sph_harm_y(l, abs(m), theta, phi)
    if m == 0:
        val = Y.real
    elif m > 0:
        val = sqrt(2) * (-1) ** m * Y.real
    else:
        val = sqrt(2) * (-1) ** m * Y.imag
    return val * sqrt(4 * np.pi)


def gamma_symmetrized_harmonic(l, m, pts, rotations):
    """Average of Y_{l,m} over the unit-conjugation group, a function on the quotient."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    acc = np.zeros(len(pts))
    for M in rotations:
        acc += real_spherical_harmonic(l, m, pts @ np.asarray(M, dtype=float).T)
    return acc / len(rotations)


JointResult = namedtuple("JointResult", "rows slopes pooled_slope trivial_l zero_counts plancherel_gap")
_ZERO = 1e-12


def _joint_one(d, ls, alpha, beta):
    from .heegner import MODULAR_BINS, bin_target_masses, diagonal_orbit, modular_bin
    from .quaternion_orders import field_for_d, sphere_embedding
    from .ternary_forms import SUM_OF_THREE_SQUARES, enumerate_representations

    x0 = enumerate_representations(SUM_OF_THREE_SQUARES, d).points[0]
    emb = sphere_embedding(d, x0)
    group = class_group(emb.field)
    orbit = diagonal_orbit(d, emb, x0, group.elements[group.identity], alpha, beta)
    pts = np.array([p for p, _ in orbit.pairs], dtype=float) / sqrt(d)
    bins = [modular_bin(z.z) for _, z in orbit.pairs]
    target = bin_target_masses()
    rot = emb.order.unit_conjugations
    h = group.h
    D = emb.field.D
    rows = []
    gap = 0.0
    for l in ls:
        for m in range(-l, l + 1):
            Y = gamma_symmetrized_harmonic(l, m, pts, rot)
            W1 = float(np.mean(Y))
            for b in range(len(MODULAR_BINS)):
                ind = np.array([1.0 if bb == b else 0.0 for bb in bins]) - target[b]
                W2 = float(np.mean(ind))
                joint = float(np.mean(Y * ind))
                rows.append((D, h, l, m, b, W1, W2, joint, abs(joint - W1 * W2)))
                gap = max(gap, plancherel_check(Y, ind, group).gap)
    return rows, gap


def joint_equidistribution_experiment(d_list, ls=range(0, 7), alpha=1, beta=1, threads=1):
    """Weyl sums of Gamma-invariant harmonics and modular bins on diagonal orbits.

    Harmonic degrees whose invariant part vanishes identically are listed in
    trivial_l and left out of the slope fit.
    """
    ls = list(ls)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            chunks = list(ex.map(lambda d: _joint_one(d, ls, alpha, beta), d_list))
    else:
        chunks = [_joint_one(d, ls, alpha, beta) for d in d_list]
    rows = [r for ch, _ in chunks for r in ch]
    max_gap = max((g for _, g in chunks), default=0.0)
    slopes, trivial, zeros = {}, [], {}
    pooled = {}
    for l in ls:
        if l == 0:
            continue
        per_D = {}
        for r in rows:
            if r[2] == l and r[4] == 0:
                per_D.setdefault(r[0], []).append(r[5])
        amp = {D: sqrt(np.mean(np.square(v))) for D, v in per_D.items()}
        if max(amp.values()) < _ZERO:
            trivial.append(l)
            continue
        # sums that vanish by a symmetry of the orbit are exact zeros, not decay
        keep = sorted((D, a) for D, a in amp.items() if a >= _ZERO)
        zeros[l] = len(amp) - len(keep)
        for D, a in keep:
            pooled.setdefault(D, []).append(a)
        if len(keep) >= 2:
            t = np.log([D for D, _ in keep])
            y = np.log([a for _, a in keep])
            slopes[l] = float(np.polyfit(t, y, 1)[0])
    pooled_slope = float("nan")
    if len(pooled) >= 2:
        Ds = sorted(pooled)
        pooled_slope = float(np.polyfit(np.log(Ds), np.log([np.mean(pooled[D]) for D in Ds]), 1)[0])
    return JointResult(rows, slopes, pooled_slope, trivial, zeros, max_gap)


