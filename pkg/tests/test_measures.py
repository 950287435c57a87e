import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covlab.conformal import SelfSimilarIFS, natural_measure
from covlab.errors import InvalidArgument, OutOfRange
from covlab.measures import (
    AtomicMeasure,
    ExplicitRadii,
    Interval,
    PolynomialRadii,
    SelfSimilarMeasure,
    StepDensityMeasure,
    ball_measure,
    ball_measures,
    interval_measure,
    radius_at,
    sample_point,
    sample_points,
)
from covlab.streams import stream

from oracles import cantor_interval_mass

S = math.log(2) / math.log(3)
CANTOR = natural_measure(SelfSimilarIFS.cantor())
LEB = StepDensityMeasure.lebesgue()
THREE = AtomicMeasure([0.0, 0.5, 1.0])


@pytest.mark.parametrize("mu, x, r, expected", [
    (CANTOR, 0.0, 1 / 3, 0.5),
    (LEB, 0.5, 0.2, 0.4),
    (CANTOR, 1 / 3, 1 / 9, 0.25),
    (AtomicMeasure.dirac(0.0), 0.1, 0.2, 1.0),
])
def test_ball_measure_examples(mu, x, r, expected):
    # 1/3 and 1/9 are not exact binary64 numbers; the missing sliver has mass ~1e-11
    assert ball_measure(mu, x, r) == pytest.approx(expected, abs=1e-10)


def test_truncated_radius_misses_a_holder_sized_sliver():
    # 0.3333333333 stops 3.3e-11 short of 1/3; the Cantor mass of that gap is about eps**s
    eps = 1 / 3 - 0.3333333333
    missing = 0.5 - ball_measure(CANTOR, 0.0, 0.3333333333)
    assert 0.1 * eps ** S < missing < 10 * eps ** S


@pytest.mark.parametrize("iv, expected", [
    (Interval.closed(0.0, 0.5), 2 / 3),
    (Interval(0.0, 0.5, True, False), 1 / 3),
    (Interval(0.0, 0.5, False, True), 1 / 3),
    (Interval.open(0.0, 1.0), 1 / 3),
])
def test_atomic_interval_endpoint_flags(iv, expected):
    assert interval_measure(THREE, iv) == pytest.approx(expected, abs=1e-15)


def test_cantor_open_interval():
    assert interval_measure(CANTOR, Interval.open(2 / 9, 4 / 9)) == pytest.approx(0.25, abs=1e-10)


def test_boundary_points_not_in_open_ball():
    assert ball_measure(THREE, 0.0, 0.5) == pytest.approx(1 / 3)
    assert ball_measure(THREE, 0.25, 0.25) == 0.0


@pytest.mark.parametrize("bad", [math.nan, math.inf])
def test_non_finite_arguments_rejected(bad):
    with pytest.raises(InvalidArgument):
        ball_measure(CANTOR, bad, 0.1)
    with pytest.raises(InvalidArgument):
        ball_measure(CANTOR, 0.1, bad)


def test_nonpositive_radius_rejected():
    with pytest.raises(InvalidArgument):
        ball_measure(LEB, 0.5, 0.0)


@settings(max_examples=200, deadline=None)
@given(x=st.floats(-0.5, 1.5), r1=st.floats(1e-6, 2.0), r2=st.floats(1e-6, 2.0))
def test_monotone_in_radius(x, r1, r2):
    lo, hi = sorted((r1, r2))
    for mu in (CANTOR, LEB, THREE, StepDensityMeasure([0, 0.3, 1], [2.0, 4 / 7])):
        assert ball_measure(mu, x, lo) <= ball_measure(mu, x, hi) + 1e-14


@pytest.mark.parametrize("mu", [CANTOR, LEB, THREE])
def test_large_ball_has_full_mass(mu):
    lo, hi = mu.support
    R = (hi - lo) + abs(0.3 - (lo + hi) / 2) + 1e-9
    assert ball_measure(mu, 0.3, R) == 1.0


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_dyadic_masses_match_exact_recursion(k):
    rng = np.random.default_rng(k)
    for _ in range(5):
        digits = rng.integers(0, 2, k + 3) * 2
        x = sum(Fraction(int(d), 3 ** (j + 1)) for j, d in enumerate(digits))
        r = Fraction(1, 3 ** k)
        got = ball_measure(CANTOR, float(x), float(r))
        low, high = cantor_interval_mass(x - r, x + r, k + 4)
        assert float(low) - 1e-9 <= got <= float(high) + 1e-9
        # a dyadic rational with denominator dividing 2**(k+1), up to float rounding of x and r
        scaled = got * 2 ** (k + 1)
        assert abs(scaled - round(scaled)) < 1e-6


def test_tolerance_is_respected():
    rng = np.random.default_rng(3)
    for x, r in zip(rng.random(20), rng.random(20) * 0.3 + 1e-3):
        low, high = cantor_interval_mass(Fraction(x - r), Fraction(x + r), 8)
        got = ball_measure(CANTOR, x, r, tol=1e-3)
        assert float(low) - 1e-3 <= got <= float(high) + 1e-3


def test_ahlfors_band_small_sample():
    rng = np.random.default_rng(11)
    x = sample_points(CANTOR, stream(11), 500)
    r = rng.random(500)
    ratio = ball_measures(CANTOR, x, r) / r ** S
    assert ratio.min() >= 0.05 and ratio.max() <= 20


def test_torus_wrap():
    T = StepDensityMeasure.lebesgue(torus=True)
    assert ball_measure(T, 0.05, 0.1) == pytest.approx(0.2, abs=1e-15)
    assert ball_measure(T, 0.99, 0.02) == pytest.approx(0.04, abs=1e-15)
    assert ball_measure(T, 0.3, 0.7) == 1.0


def test_step_density_validation():
    with pytest.raises(InvalidArgument):
        StepDensityMeasure([0, 1], [2.0])
    with pytest.raises(InvalidArgument):
        AtomicMeasure([0, 0], [0.5, 0.5])


def test_self_similar_weight_validation():
    with pytest.raises(InvalidArgument):
        SelfSimilarMeasure(SelfSimilarIFS.cantor(), [1.0, 0.0])
    with pytest.raises(InvalidArgument):
        SelfSimilarMeasure(SelfSimilarIFS.cantor(), [0.6, 0.6])


def test_sample_point_examples():
    assert sample_point(AtomicMeasure.dirac(0.0), stream(5)) == 0.0
    two = AtomicMeasure([0.0, 1.0])
    a = sample_point(two, stream(9))
    assert a in (0.0, 1.0) and sample_point(two, stream(9)) == a


def test_cantor_samples_lie_on_the_set():
    pts = sample_points(CANTOR, stream(2), 2000, depth=40)
    words = [SelfSimilarIFS.cantor().code(p, depth=30) for p in pts[:50]]
    for p, w in zip(pts, words):
        lo, hi = SelfSimilarIFS.cantor().cylinder(w)
        assert lo - 3.0 ** -30 <= p <= hi + 3.0 ** -30


def test_cantor_sample_mean():
    pts = sample_points(CANTOR, stream(1), 10 ** 5)
    se = pts.std() / math.sqrt(pts.size)
    assert abs(pts.mean() - 0.5) <= 4 * se


def test_sampling_ignores_interleaving():
    a = [sample_points(CANTOR, stream(3, i), 4) for i in range(5)]
    b = [sample_points(CANTOR, stream(3, i), 4) for i in reversed(range(5))][::-1]
    for u, v in zip(a, b):
        assert np.array_equal(u, v)


@pytest.mark.parametrize("seq, n, expected", [
    (PolynomialRadii(1.0, 1.0), 1, 1.0),
    (PolynomialRadii(1.0, 0.5), 4, 0.5),
    (ExplicitRadii([0.3, 0.2, 0.1]), 2, 0.2),
])
def test_radius_at(seq, n, expected):
    assert radius_at(seq, n) == expected


def test_radius_errors():
    with pytest.raises(OutOfRange):
        radius_at(ExplicitRadii([0.3, 0.2, 0.1]), 4)
    with pytest.raises(InvalidArgument):
        ExplicitRadii([0.1, 0.2])
    with pytest.raises(InvalidArgument):
        PolynomialRadii(-1.0, 1.0)


def test_first_index_below_handles_exact_ties():
    seq = PolynomialRadii(1.0, 1 / S)
    # r_n < 3**-3 first happens at n = 9 since r_8 = 3**-3 up to rounding
    assert seq.first_index_below(3.0 ** -3) == 9
    assert seq.first_index_below(1.0) == 2
