import math

import numpy as np
import pytest

from toric_lab.lfunctions import (
    ConductorError,
    GammaFactor,
    afe,
    afe_terms,
    builtin_form,
    central_values,
    chandee_rhs,
    degree2_central_value,
    ec11a_eigenvalue,
    kind_conductor,
    l_at_one,
    l_at_one_exact_eta,
    prime_sum,
    read_eigenvalue_file,
    rs_coefficients,
    tau,
    write_eigenvalue_file,
)
from toric_lab.numtheory import kronecker, primes_up_to
from toric_lab.quadratic_core import QuadField, characters, class_group

# L(E, 1) for the conductor 11 curve, i.e. the central value in analytic normalisation
L_11A = 0.25384186085591068434
# Dirichlet beta(1/2)
BETA_HALF = 0.66769145718960917666


def dirichlet_coeffs(D, n):
    return np.array([0.0] + [kronecker(-D, k) for k in range(1, n + 1)])


def test_afe_dirichlet_beta():
    g = GammaFactor((1.0,), ())
    c = dirichlet_coeffs(4, afe_terms(4, g) + 2)
    r = afe(c, 4, g)
    assert r.epsilon == 1
    assert abs(r.value - BETA_HALF) < 1e-10
    r1 = afe(dirichlet_coeffs(4, afe_terms(4, g, s0=1.0) + 2), 4, g, s0=1.0)
    assert abs(r1.value - math.pi / 4) < 1e-10


def test_afe_needs_enough_terms():
    g = GammaFactor((1.0,), ())
    with pytest.raises(ValueError):
        afe(dirichlet_coeffs(4, 3), 4, g)


@pytest.mark.parametrize("D", [23, 47, 71, 199])
def test_l1_eta_class_number_formula_vs_afe(D):
    g = GammaFactor((1.0,), ())
    c = dirichlet_coeffs(D, afe_terms(D, g, s0=1.0) + 2)
    assert abs(afe(c, D, g, s0=1.0).value - l_at_one_exact_eta(QuadField(D))) < 1e-9


def test_11a_point_count_matches_eta_product():
    f = builtin_form("11a")
    for p in primes_up_to(400):
        assert abs(ec11a_eigenvalue(p) * math.sqrt(p) - f._ap[p]) < 1e-9, p


def test_tau_values_and_hecke_relation():
    assert [tau(n) for n in (1, 2, 3, 5, 11)] == [1, -24, 252, 4830, 534612]
    for p in (2, 3, 5, 7):
        assert tau(p * p) == tau(p) ** 2 - p ** 11
    assert tau(6) == tau(2) * tau(3)


def test_central_value_11a():
    r = degree2_central_value(builtin_form("11a"))
    assert r.epsilon == 1
    assert abs(r.value - L_11A) < 1e-9


@pytest.mark.parametrize("D", [23, 47])
def test_trivial_character_factorisation(D):
    f = builtin_form("11a")
    recs = central_values(f, QuadField(D))
    prod = degree2_central_value(f).value * degree2_central_value(f, D).value
    assert abs(recs[0].value - prod) < 1e-6
    assert all(r.consistency_gap < 1e-6 for r in recs)
    assert all(r.epsilon in (1, -1) for r in recs)


def test_conjugate_characters_agree():
    recs = central_values(builtin_form("11a"), QuadField(23))
    assert abs(recs[1].value - recs[2].value) < 1e-9


def test_rs_coefficients_trivial_character_convolution():
    f = builtin_form("11a")
    F = QuadField(23)
    chi0 = characters(class_group(F))[0]
    N = 400
    c = rs_coefficients(f, chi0, N).c
    lam = f.lam_table(N)
    for n in range(1, N + 1):
        conv = sum(lam[d] * lam[n // d] * kronecker(-23, n // d)
                   for d in range(1, n + 1) if n % d == 0)
        assert abs(c[n] - conv) < 1e-10, n


def test_level_must_be_coprime():
    F = QuadField(88)
    chi = characters(class_group(F))[0]
    with pytest.raises(ConductorError):
        rs_coefficients(builtin_form("11a"), chi, 10)


def test_eigenvalue_file_roundtrip(tmp_path):
    f = builtin_form("5.4.a.a")
    path = tmp_path / "f.txt"
    write_eigenvalue_file(f, path, bound=500)
    g = read_eigenvalue_file(str(path))
    assert (g.label, g.level, g.weight) == ("5.4.a.a", 5, 4)
    assert all(g.lam_prime(p) == f.lam_prime(p) for p in primes_up_to(500))
    # Hecke recursion from primes reproduces the q-expansion
    assert np.allclose(g.lam_table(499), f.lam_table(499), atol=1e-12)


def test_eigenvalue_file_errors(tmp_path):
    with pytest.raises(ValueError):
        read_eigenvalue_file("2\t-2\n3\t-1\n")
    with pytest.raises(ValueError):
        read_eigenvalue_file("# label x.2.a.a weight 2 level 11\n4\t1\n")


def test_chandee_majorant_holds():
    f = builtin_form("11a")
    F = QuadField(71)
    recs = central_values(f, F)
    x = max(3.0, math.log(71) ** 2)
    for chi, r in zip(characters(class_group(F)), recs):
        if r.value > 0:
            assert math.log(r.value) <= chandee_rhs(f, chi, x)


def test_prime_sum_close_to_log_l1():
    F = QuadField(47)
    f = builtin_form("11a")
    for kind, kw in (("eta", {"field": F}), ("ad", {"form": f})):
        x = math.log(kind_conductor(kind, **kw)) ** 3
        assert abs(prime_sum(kind, x, **kw) - math.log(l_at_one(kind, **kw))) < 3


def test_unknown_kind():
    with pytest.raises(ValueError):
        prime_sum("bogus", 10, field=QuadField(23))
