import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from toric_lab.ternary_forms import (
    SUM_OF_THREE_SQUARES,
    TernaryForm,
    admissible_sum_of_three_squares,
    automorphism_group,
    enumerate_representations,
    genus_weights,
    parse_form,
    proper_automorphisms,
)

GENUS_1 = ("3,11,1,0,1,0", "3,4,4,2,2,-3")
GENUS_2 = ("1,5,19,1,0,0", "4,5,6,2,1,5")


def value(coeffs, v):
    a11, a22, a33, c12, c13, c23 = coeffs
    x, y, z = v
    return a11 * x * x + a22 * y * y + a33 * z * z + c12 * x * y + c13 * x * z + c23 * y * z


def brute(coeffs, d, box):
    pts = []
    for v in itertools.product(range(-box, box + 1), repeat=3):
        if value(coeffs, v) == d and math.gcd(*v) == 1:
            pts.append(v)
    return sorted(pts)


@pytest.mark.parametrize("d,count", [(5, 24), (7, 0), (11, 24), (3, 8), (6, 24)])
def test_sum_of_three_squares_counts(d, count):
    assert len(enumerate_representations(SUM_OF_THREE_SQUARES, d).points) == count


def test_admissibility():
    assert not admissible_sum_of_three_squares(7)
    assert not admissible_sum_of_three_squares(28)
    assert admissible_sum_of_three_squares(5)
    for d in range(1, 300):
        any_rep = any(x * x + y * y + z * z == d
                      for x in range(18) for y in range(18) for z in range(18))
        assert admissible_sum_of_three_squares(d) == any_rep


def test_enumeration_matches_triple_loop():
    rng = np.random.default_rng(7)
    forms = ["2,3,5,1,1,1", "1,2,7,0,1,0"] + list(GENUS_1) + list(GENUS_2)[:1]
    for text in forms:
        f = parse_form(text)
        coeffs = tuple(int(t) for t in text.split(","))
        for d in rng.integers(1, 500, size=12):
            got = sorted(tuple(p) for p in enumerate_representations(f, int(d)).points)
            assert got == brute(coeffs, int(d), 23), (text, d)


def test_representations_stable_under_automorphisms():
    f = parse_form(GENUS_2[1])
    d = next(d for d in range(100, 200) if enumerate_representations(f, d).points)
    pts = {tuple(p) for p in enumerate_representations(f, d).points}
    for U in automorphism_group(f):
        U = np.asarray(U)
        assert {tuple(int(t) for t in U @ np.array(p)) for p in pts} == pts


def test_cube_automorphisms():
    assert len(automorphism_group(SUM_OF_THREE_SQUARES)) == 48
    assert len(proper_automorphisms(SUM_OF_THREE_SQUARES)) == 24


def test_automorphisms_preserve_gram():
    for text in GENUS_1 + GENUS_2:
        f = parse_form(text)
        G = np.array(f.gram, dtype=object)
        for U in automorphism_group(f):
            U = np.array(U, dtype=object)
            assert (U.T.dot(G).dot(U) == G).all()


def test_genus_orders():
    # full orthogonal group; the proper subgroup has half the size
    assert [len(automorphism_group(parse_form(t))) for t in GENUS_1 + GENUS_2] == [8, 12, 8, 4]
    assert [len(proper_automorphisms(parse_form(t))) for t in GENUS_1 + GENUS_2] == [4, 6, 4, 2]


def test_genus_weights_exact():
    w1 = genus_weights([parse_form(t) for t in GENUS_1]).weights
    w2 = genus_weights([parse_form(t) for t in GENUS_2]).weights
    assert w1 == [Fraction(3, 5), Fraction(2, 5)]
    assert w2 == [Fraction(1, 3), Fraction(2, 3)]
    assert genus_weights([SUM_OF_THREE_SQUARES]).weights == [Fraction(1)]


def test_parse_form_roundtrip_and_errors():
    f = parse_form("3,11,1,0,1,0")
    assert isinstance(f, TernaryForm)
    assert str(f) == "3,11,1,0,1,0"
    with pytest.raises(ValueError):
        parse_form("1,2,3")
    with pytest.raises(ValueError):
        parse_form("1,1,-1,0,0,0")


def test_bad_d():
    with pytest.raises(ValueError):
        enumerate_representations(SUM_OF_THREE_SQUARES, 0)
