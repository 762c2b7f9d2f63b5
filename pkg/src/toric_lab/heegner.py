"""Heegner points on the modular surface and joint orbits with sphere points."""

from collections import namedtuple
from math import gcd, pi, sqrt

from .quadratic_core import class_group, compose, reduce_form

__all__ = [
    "HeegnerPoint",
    "DiagonalOrbit",
    "TorsionObstruction",
    "heegner_point",
    "heegner_points",
    "reduce_to_fundamental_domain",
    "in_fundamental_domain",
    "diagonal_orbit",
    "MODULAR_BINS",
    "modular_bin",
    "bin_target_masses",
]

_TIE = 1e-12


class TorsionObstruction(ValueError):
    pass


HeegnerPoint = namedtuple("HeegnerPoint", "z source_form")
DiagonalOrbit = namedtuple("DiagonalOrbit", "d pairs classes")


def heegner_point(form):
    a, b, c = form
    D = 4 * a * c - b * b
    return HeegnerPoint(complex(-b / (2 * a), sqrt(D) / (2 * a)), form)


def heegner_points(field):
    return [heegner_point(f) for f in class_group(field).elements]


def reduce_to_fundamental_domain(z):
    """SL2(Z) translate of z into {|Re z| <= 1/2, |z| >= 1}.

    Boundary ties go to the right half: Re z = -1/2 is moved to +1/2 and
    points on the unit circle with Re z < 0 are reflected by z -> -1/z.
    """
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("z must lie in the upper half plane")
    for _ in range(10000):
        x = z.real - round(z.real)
        if abs(x + 0.5) < _TIE:
            x = 0.5
        z = complex(x, z.imag)
        r = abs(z) ** 2
        if r < 1 - _TIE:
            z = -1 / z
            continue
        if abs(r - 1) <= _TIE and z.real < -_TIE:
            z = complex(-z.real, z.imag)
        return z
    raise RuntimeError("reduction did not converge")


def in_fundamental_domain(z):
    return abs(z.real) <= 0.5 + _TIE and abs(z) >= 1 - _TIE


def diagonal_orbit(d, emb, base_sphere, base_class, alpha=1, beta=1):
    """Pairs (cls^beta . base_sphere, Heegner point of cls^alpha * base_class).

    Sphere components are returned as canonical representatives of their
    unit-conjugation orbit.
    """
    from .quaternion_orders import class_action, gamma_canonical

    G = class_group(emb.field)
    if (alpha, beta) != (1, 1) and gcd(G.h, 2 * beta) != 1:
        raise TorsionObstruction(
            f"class group of order {G.h} has torsion at a prime dividing {2 * beta}")
    base_idx = G.element_of(base_class)
    pairs, classes = [], []
    for g in range(G.h):
        s = G.elements[G.power(g, beta)]
        x = gamma_canonical(emb.order, class_action(emb, s, base_sphere))
        t = G.elements[G.mul(G.power(g, alpha), base_idx)]
        pairs.append((x, heegner_point(t)))
        classes.append(g)
    return DiagonalOrbit(d, pairs, classes)


# fixed partition of the truncated domain {Im z <= 10} by height and sign of Re z
_HEIGHTS = (1.0, 1.5, 2.5, 10.0)
MODULAR_BINS = tuple((h, s) for h in range(4) for s in (0, 1))


def modular_bin(z):
    """Bin index of a reduced point, or None above the truncation height."""
    w = reduce_to_fundamental_domain(z)
    y = w.imag
    if y > _HEIGHTS[-1]:
        return None
    h = next(i for i, top in enumerate(_HEIGHTS) if y < top or (i == 3 and y <= top))
    s = 0 if w.real < 0 else 1
    return 2 * h + s


def bin_target_masses():
    """Hyperbolic area of each bin divided by the area pi/3 of the domain."""
    areas = [pi / 3 - 1]
    for lo, hi in zip(_HEIGHTS[:-1], _HEIGHTS[1:]):
        areas.append(1 / lo - 1 / hi)
    out = []
    for a in areas:
        out += [a / 2 / (pi / 3)] * 2
    return out
