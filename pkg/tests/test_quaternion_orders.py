import itertools
from fractions import Fraction

import numpy as np
import pytest

from toric_lab.numtheory import kronecker
from toric_lab.quadratic_core import BinaryForm, class_group
from toric_lab.quaternion_orders import (
    action_orbits,
    algebra_for_prime,
    class_action,
    class_set_map,
    gamma_canonical,
    gauss_check,
    ideal_from_class,
    left_ideal_classes,
    maximal_order,
    principal_generator,
    sphere_embedding,
)

PRIMES = (2, 3, 5, 7, 11, 13)


def eichler_class_number(p):
    """h(B_p) from the class number formula with the elliptic corrections."""
    if p == 2 or p == 3:
        return 1
    h = Fraction(p - 1, 12)
    h += Fraction(1, 4) * (1 - kronecker(-4, p))
    h += Fraction(1, 3) * (1 - kronecker(-3, p))
    return h


@pytest.mark.parametrize("p", PRIMES)
def test_norm_is_multiplicative(p):
    alg = algebra_for_prime(p)
    rng = np.random.default_rng(p)
    for _ in range(25):
        a = alg.q(*(Fraction(int(v), 2) for v in rng.integers(-6, 7, 4)))
        b = alg.q(*(Fraction(int(v), 2) for v in rng.integers(-6, 7, 4)))
        assert (a * b).norm() == a.norm() * b.norm()
        assert a * a.conj() == alg.q(a.norm())


@pytest.mark.parametrize("p", PRIMES)
def test_maximal_order_is_a_ring(p):
    O = maximal_order(p)
    assert O.discriminant == p
    assert O.contains(O.alg.one)
    for x, y in itertools.product(O.basis, repeat=2):
        assert O.contains(x * y)


@pytest.mark.parametrize("p,units", [(2, 24), (3, 12), (5, 6), (7, 4), (13, 2)])
def test_unit_groups(p, units):
    assert len(maximal_order(p).units) == units


def test_hurwitz_conjugation_group_has_twelve_rotations():
    mats = maximal_order(2).unit_conjugations
    assert len(mats) == 12
    for M in mats:
        M = np.array(M)
        assert (M.T @ M == np.eye(3, dtype=int)).all()
        assert round(np.linalg.det(M)) == 1


@pytest.mark.parametrize("p", PRIMES)
def test_class_numbers_and_mass(p):
    cs = left_ideal_classes(p)
    assert len(cs.ideals) == eichler_class_number(p)
    assert cs.total_mass == Fraction(p - 1, 24)
    assert sum(cs.masses) == 1


def test_p11_class_set():
    cs = left_ideal_classes(11)
    assert sorted(cs.unit_orders) == [4, 6]
    assert sorted(cs.masses) == [Fraction(2, 5), Fraction(3, 5)]


@pytest.mark.parametrize("d,count,h", [(11, 24, 1), (5, 24, 2), (13, 24, 2), (6, 24, 2)])
def test_gauss_small(d, count, h):
    r = gauss_check(d)
    assert (r.count, r.h) == (count, h)
    assert r.ratio == (24 if d % 8 == 3 else 12)


def test_gauss_rejects_inadmissible():
    for d in (7, 8, 12, 3):
        with pytest.raises(ValueError):
            gauss_check(d)


def test_embedding_square_and_optimality():
    emb = sphere_embedding(5, (0, 1, 2))
    assert emb.field.D == 20
    assert emb.image_of_sqrt * emb.image_of_sqrt == emb.order.alg.q(-5)
    assert emb.order.contains(emb.omega)


def test_ideal_from_class_norms():
    emb = sphere_embedding(5, (0, 1, 2))
    assert ideal_from_class(emb, BinaryForm(1, 0, 5)).norm == 1
    I = ideal_from_class(emb, BinaryForm(2, 2, 3))
    assert I.norm == 2
    q = principal_generator(I)
    assert I.order.nrd(q) == 2


def test_principal_class_acts_trivially():
    O = maximal_order(2)
    for d, x in [(5, (0, 1, 2)), (10, (0, 1, 3)), (11, (1, 1, 3))]:
        emb = sphere_embedding(d, x)
        G = class_group(emb.field)
        f = G.elements[G.identity]
        assert gamma_canonical(O, class_action(emb, (f.a, f.b, f.c), x)) == gamma_canonical(O, x)


def test_action_output_on_sphere():
    emb = sphere_embedding(5, (0, 1, 2))
    y = class_action(emb, (2, 2, 3), (0, 1, 2))
    assert sum(t * t for t in y) == 5
    assert gamma_canonical(emb.order, y) != gamma_canonical(emb.order, (0, 1, 2))


@pytest.mark.parametrize("d", [5, 10, 11, 14, 17, 19, 26, 29, 35, 41])
def test_action_is_free_and_associative(d):
    orbits, perms, G = action_orbits(d)
    ident = perms[G.identity]
    assert all(ident[x] == x for x in ident)
    for i in range(G.h):
        if i != G.identity:
            assert all(perms[i][x] != x for x in perms[i])
        for j in range(G.h):
            k = G.mul(i, j)
            assert all(perms[k][x] == perms[i][perms[j][x]] for x in ident)
    assert len(orbits) == (2 if d % 8 == 3 else 1)


def test_class_set_map_small():
    # 23 is inert at 11, h = 3; the map lands in the two-element class set
    idx = class_set_map(11, 23)
    assert len(idx) == 3 and set(idx) <= {0, 1}


def test_class_set_map_rejects_split():
    with pytest.raises(ValueError):
        class_set_map(11, 7)  # -7 is a square mod 11
