import itertools
import math

import numpy as np
import pytest

from toric_lab.numtheory import fundamental_discriminants, kronecker
from toric_lab.quadratic_core import (
    BinaryForm,
    QuadField,
    a_chi,
    characters,
    class_group,
    compose,
    ideal_class_counts,
    induced_orthogonality_check,
    prime_splitting,
    reduce_form,
)


def naive_class_number(D):
    """Count reduced primitive forms of discriminant -D by a direct loop."""
    h = 0
    for a in range(1, math.isqrt(D // 3) + 1):
        for b in range(-a + 1, a + 1):
            if (b * b + D) % (4 * a):
                continue
            c = (b * b + D) // (4 * a)
            if c < a or (c == a and b < 0):
                continue
            if math.gcd(math.gcd(a, b), c) == 1:
                h += 1
    return h


@pytest.mark.parametrize("D,h", [(20, 2), (23, 3), (47, 5), (71, 7), (84, 4), (163, 1), (3299, 27)])
def test_known_class_numbers(D, h):
    assert class_group(QuadField(D)).h == h


def test_class_numbers_match_naive_count():
    for D in fundamental_discriminants(5, 1500):
        assert class_group(QuadField(D)).h == naive_class_number(D), D


def test_non_fundamental_rejected():
    with pytest.raises(ValueError):
        QuadField(5)


def test_reduction_is_canonical():
    assert reduce_form(6, 5, 2) == BinaryForm(2, -1, 3)
    f = reduce_form(2, 1, 3)
    assert reduce_form(f.a, f.b, f.c) == f


def test_composition_is_a_group_law():
    G = class_group(QuadField(260))
    n = G.h
    for i, j, k in itertools.product(range(n), repeat=3):
        assert G.mul(G.mul(i, j), k) == G.mul(i, G.mul(j, k))
    for i in range(n):
        assert G.mul(i, G.identity) == i
        assert G.power(i, G.order(i)) == G.identity
        assert n % G.order(i) == 0


def test_compose_disc_preserved():
    F = QuadField(71)
    for f, g in itertools.product(class_group(F).elements, repeat=2):
        assert compose(f, g).disc == -71


def test_structure_of_84():
    G = class_group(QuadField(84))
    assert sorted(m for _, m in G.cycle_structure) == [2, 2]


def test_character_orthogonality():
    G = class_group(QuadField(1155))
    M = np.array([c.values for c in characters(G)])
    assert M.shape == (G.h, G.h)
    assert np.allclose(M @ M.conj().T, G.h * np.eye(G.h), atol=1e-10)


def test_character_power_and_triviality():
    G = class_group(QuadField(23))
    chis = characters(G)
    assert chis[0].is_trivial
    assert chis[1].power(3).is_trivial
    assert np.allclose(chis[1].power(2).values, chis[2].values)


@pytest.mark.parametrize("D", [23, 47, 84, 104])
def test_splitting_agrees_with_kronecker(D):
    F = QuadField(D)
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31):
        kind = prime_splitting(F, p).kind
        k = kronecker(-D, p)
        assert kind == {1: "split", -1: "inert", 0: "ramified"}[k]


def test_ideal_counts_sum_to_divisor_sum():
    F = QuadField(71)
    G = class_group(F)
    N = 300
    counts = ideal_class_counts(G, N)
    for n in range(1, N + 1):
        oracle = sum(kronecker(-71, d) for d in range(1, n + 1) if n % d == 0)
        assert counts[:, n].sum() == oracle


def test_a_chi_trivial_character_counts_ideals():
    F = QuadField(23)
    chi0 = characters(class_group(F))[0]
    assert abs(a_chi(chi0, 6) - 4) < 1e-12  # (1+eta(2))(1+eta(3)) with 2, 3 split


def test_induced_orthogonality_small():
    gap, count = induced_orthogonality_check(QuadField(23))
    assert gap < 1e-9 and count > 0
