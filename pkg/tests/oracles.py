"""Independent reference implementations used only by the tests.

None of these share code with the package: they use exact rationals,
itertools, or mpmath, and are kept as short and literal as possible.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import mpmath as mp

# Values frozen from the oracles below (recompute with `python tests/oracles.py`).
# Average density of the Cantor measure at 0, from the limit of the lower-bound
# sums and from direct quadrature; both routes agree to 1e-12.
AVG_DENSITY_ZERO = 0.8178051489545
# Moran root for ratios (1/2, 1/4): u = (1/2)^s solves u + u^2 = 1.
MORAN_HALF_QUARTER = float(mp.log((mp.sqrt(5) - 1) / 2) / mp.log(mp.mpf(1) / 2))


def cantor_interval_mass(lo: Fraction, hi: Fraction, depth: int, lo_open=True, hi_open=True):
    """Enclosure ``(low, high)`` of the Cantor measure of an interval.

    Walks every level-``depth`` cylinder [a, a + 3**-depth] exactly.
    """
    low = high = Fraction(0)
    w = Fraction(1, 2 ** depth)
    size = Fraction(1, 3 ** depth)
    for digits in itertools.product((0, 2), repeat=depth):
        a = sum(Fraction(d, 3 ** (j + 1)) for j, d in enumerate(digits))
        b = a + size
        inside_lo = a > lo or (a == lo and not lo_open)
        inside_hi = b < hi or (b == hi and not hi_open)
        if inside_lo and inside_hi:
            low += w
            high += w
        elif b >= lo and a <= hi:
            high += w
    return low, high


def brute_survival(points, weights, radii, x):
    total = Fraction(0)
    for combo in itertools.product(range(len(points)), repeat=len(radii)):
        if all(abs(x - points[c]) >= r for c, r in zip(combo, radii)):
            total += math.prod(Fraction(weights[c]) for c in combo)
    return total


def brute_crux(points, weights, radii, A, x, y):
    """``(P(y in F | A in U, x in F), P(y in F | x in F))`` as exact fractions."""
    def covered(z, combo):
        return any(abs(z - points[c]) < r for c, r in zip(combo, radii))

    num_a = den_a = num = den = Fraction(0)
    for combo in itertools.product(range(len(points)), repeat=len(radii)):
        p = math.prod(Fraction(weights[c]) for c in combo)
        fx = not covered(x, combo)
        fy = not covered(y, combo)
        ina = all(covered(a, combo) for a in A)
        if fx:
            den += p
            num += p if fy else 0
            if ina:
                den_a += p
                num_a += p if fy else 0
    ratio = lambda n, d: n / d if d else None  # noqa: E731
    return ratio(num_a, den_a), ratio(num, den)


def mp_avg_density_zero_lower(k: int) -> mp.mpf:
    """Lower-bound sum at 0 evaluated literally in multiprecision."""
    mp.mp.dps = 30
    s = mp.log(2) / mp.log(3)
    total = mp.mpf(0)
    for tail in itertools.product((0, 2), repeat=k):
        pi = mp.mpf(2) / 3 + sum(mp.mpf(d) / mp.mpf(3) ** (j + 2) for j, d in enumerate(tail))
        total += mp.mpf(2) ** -(k + 1) * (pi + mp.mpf(3) ** -(k + 1)) ** -s
    return total / (s * mp.log(3))


def mp_nstep_dimension(weights, n: int) -> mp.mpf:
    mp.mp.dps = 30
    return -mp.fsum(mp.mpf(w) * mp.log(w) for w in weights) / (n * mp.log(3))


def continuum_torus_energy(radii) -> float:
    """Energy of Lebesgue on the circle: ``integral_0^1/2 2 exp(sum max(2 r_n - d, 0)) dd``."""
    radii = sorted(radii, reverse=True)
    knots = sorted({0.0, 0.5, *[min(2 * r, 0.5) for r in radii]})

    def f(d):
        return 2.0 * mp.e ** mp.fsum(max(2 * r - d, 0.0) for r in radii)

    return float(mp.quad(f, knots))


if __name__ == "__main__":
    print("A(0) lower bound at k=16:", mp_avg_density_zero_lower(16))
    print("Moran (1/2, 1/4):", MORAN_HALF_QUARTER)
