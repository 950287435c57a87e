"""Acceptance gate: one check per criterion, each reported as a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py`` (the lines appear in the terminal
summary) or ``python tests/test_acceptance.py``. Criteria 2 and 5 are known
to fail at the stated truncation level; the INFO lines show the finer
evaluations they are compared against.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from covlab.cantor_bounds import (  # noqa: E402
    S,
    BernoulliSpec,
    alpha0_estimate,
    avg_density_zero_lower,
    bernoulli_measure,
    critical_constant_bounds,
    optimize_bernoulli,
    typical_density_bounds,
)
from covlab.conformal import SelfSimilarIFS, moran_dimension, natural_measure, pw_billard_series  # noqa: E402
from covlab.covering import crux_check_exact, empirical_survival, martingale_moments  # noqa: E402
from covlab.energy import (  # noqa: E402
    ball_mass_power_series,
    intersection_masses,
    jk_enumerate_oracle,
    jk_second_moment,
    shepp_series,
)
from covlab.errors import DegenerateDenominator  # noqa: E402
from covlab.measures import (  # noqa: E402
    AtomicMeasure,
    ExplicitRadii,
    PolynomialRadii,
    StepDensityMeasure,
    ball_measures,
    sample_points,
)
from covlab.numerics import ceil_decimals, floor_decimals  # noqa: E402
from covlab.streams import stream  # noqa: E402

CANTOR_IFS = SelfSimilarIFS.cantor()
CANTOR = natural_measure(CANTOR_IFS)
TORUS = StepDensityMeasure.lebesgue(torus=True)

RESULTS: list[str] = []


def random_atomic(rng, m):
    pts = np.sort(rng.choice(np.arange(21) / 20, m, replace=False))
    return AtomicMeasure(pts, rng.dirichlet(np.ones(m)))


def criterion_1():
    err = abs(moran_dimension(CANTOR_IFS) - math.log(2) / math.log(3))
    return err <= 1e-12, f"|s - log2/log3| = {err:.2e}"


def criterion_2():
    v = avg_density_zero_lower(5)
    return floor_decimals(v) == 0.81781, f"avg_density_zero_lower(5) = {v:.10f}, floored {floor_decimals(v):.5f}"


def criterion_3():
    _, up = typical_density_bounds(BernoulliSpec.published(), 3)
    return ceil_decimals(up) == 0.96091, f"upper = {up:.10f}, ceiled {ceil_decimals(up):.5f}"


def criterion_4():
    rep = critical_constant_bounds(BernoulliSpec.published(), 3, 5)
    return rep.constant_lower == 1.06126, f"constant_lower = {rep.constant_lower:.5f} (raw {rep.constant_lower_raw:.10f})"


def criterion_5(k_zero=5):
    rep = critical_constant_bounds(BernoulliSpec.published(), 3, k_zero)
    raw = rep.constant_upper_raw
    ok = abs(raw - 1.37546) <= 2e-5 and ceil_decimals(raw) == 1.37546
    return ok, f"k_zero={k_zero}: constant_upper raw = {raw:.10f}, ceiled {ceil_decimals(raw):.5f}"


def criterion_6():
    a = alpha0_estimate()
    trivial = (1 / a.value) ** (1 / S)
    ok = abs(a.value - 0.9654) <= 5e-4 and a.upper - a.lower < 5e-4 and abs(trivial - 1.0573) <= 1e-3
    return ok, f"alpha0 in [{a.lower:.6f}, {a.upper:.6f}] at k={a.k}, trivial constant {trivial:.6f}"


def criterion_7():
    rng = np.random.default_rng(2024)
    worst, done, skipped = 0.0, 0, 0
    while done < 100:
        mu = random_atomic(rng, int(rng.integers(2, 4)))
        nu = random_atomic(rng, int(rng.integers(1, 5)))
        k = int(rng.integers(1, 7))
        seq = ExplicitRadii(np.sort(rng.choice([0.05, 0.1, 0.15, 0.2, 0.3, 0.45], k))[::-1])
        try:
            a = jk_second_moment(nu, mu, seq, k)
        except DegenerateDenominator:
            # a full-mass ball: the oracle must refuse the instance too
            with pytest.raises(DegenerateDenominator):
                jk_enumerate_oracle(nu, mu, seq, k)
            skipped += 1
            continue
        b = jk_enumerate_oracle(nu, mu, seq, k)
        worst = max(worst, abs(a - b) / abs(b))
        done += 1
    return worst <= 1e-12, f"max relative error {worst:.2e} over {done} instances ({skipped} degenerate redrawn)"


def criterion_8():
    nu = AtomicMeasure(np.arange(8) / 8 + 0.03, np.full(8, 1 / 8))
    seq = PolynomialRadii(0.3, 1.0)
    m = martingale_moments(nu, TORUS, seq, 20, 10 ** 5, seed=8)
    exact = jk_second_moment(nu, TORUS, seq, 20)
    z = (m.second - exact) / m.second_stderr
    return abs(z) <= 4, f"sample {m.second:.6f} vs J_20 {exact:.6f}, z = {z:.2f}"


def criterion_9():
    rng = np.random.default_rng(99)
    worst = math.inf
    defined = 0
    for _ in range(200):
        m = int(rng.integers(2, 5))
        mu = random_atomic(rng, m)
        k = int(rng.integers(1, 6))
        seq = ExplicitRadii(np.sort(rng.integers(1, 9, k) / 20)[::-1])
        x = int(rng.integers(1, 19)) / 20
        y = int(rng.integers(int(x * 20) + 1, 21)) / 20
        A = sorted({int(v) / 20 for v in rng.integers(-4, int(x * 20), int(rng.integers(0, 3)))})
        r = crux_check_exact(mu, seq, k, A, x, y)
        for ok, slack in ((r.defined_i, r.slack_i), (r.defined_ii, r.slack_ii)):
            if ok:
                defined += 1
                worst = min(worst, slack)
    return worst >= -1e-12, f"min slack {worst:.3e} over {defined} defined inequalities (200 instances)"


def criterion_10(c=1.0):
    rep = empirical_survival(CANTOR, PolynomialRadii(c, 1 / S), 0.0, 50, 10 ** 5, seed=10)
    diff = abs(rep.empirical - rep.analytic)
    return diff <= 4 * rep.stderr, (f"c={c}: analytic {rep.analytic:.6g}, empirical {rep.empirical:.6g}, "
                                    f"stderr {rep.stderr:.2e}")


def criterion_11():
    rng = np.random.default_rng(11)
    x, y = rng.random(1000), rng.random(1000)
    r = rng.uniform(1e-6, 0.25, 1000)
    d = np.abs(x - y)
    d = np.minimum(d, 1 - d)
    err = float(np.max(np.abs(intersection_masses(TORUS, x, y, r) - np.maximum(2 * r - d, 0))))
    return err <= 1e-12, f"max error {err:.2e} (r <= 1/4)"


def criterion_12():
    got = {c: shepp_series(PolynomialRadii(c, 1.0), 10 ** 5).classification for c in (0.3, 0.5, 0.7)}
    ok = got == {0.3: "converging", 0.5: "diverging", 0.7: "diverging"}
    xs = [0.0, 0.25, 2 / 3, 20 / 27]
    above = [ball_mass_power_series(CANTOR, PolynomialRadii(1.0, 1 / S + 0.1), x, 1.0, N=10 ** 5)
             for x in xs]
    below = [ball_mass_power_series(CANTOR, PolynomialRadii(1.0, 1 / S - 0.1), x, 1.02, N=10 ** 5)
             for x in xs]
    ok = ok and all(p.classification == "converging" for p in above)
    ok = ok and all(p.classification == "diverging" for p in below)
    detail = (f"shepp {got}; t=1/s+0.1 exponents {[round(p.exponent, 3) for p in above]}; "
              f"t=1/s-0.1 power 1.02 exponents {[round(p.exponent, 3) for p in below]}")
    return ok, detail


def criterion_13():
    nu = bernoulli_measure(BernoulliSpec.published())
    mu = natural_measure(nu.ifs)
    res = {c: pw_billard_series(nu, mu, PolynomialRadii(c, 1 / mu.ifs.dimension), K=60, seed=0).probe
           for c in (1.0, 1.1)}
    ok = res[1.0].classification == "converging" and res[1.1].classification == "diverging"
    return ok, f"rate {res[1.0].exponent:.4f} at c=1.0, {res[1.1].exponent:.4f} at c=1.1"


def criterion_14():
    cold = optimize_bernoulli(3, budget=10 ** 4, seed=0)
    warm = optimize_bernoulli(3, budget=10 ** 4, seed=0, start=BernoulliSpec.published())
    ok = cold.bound >= 1.0600 and warm.bound >= 1.06126
    return ok, f"cold start {cold.bound:.5f}, seeded {warm.bound:.5f}"


def criterion_15():
    x = sample_points(CANTOR, stream(15), 10 ** 4)
    r = stream(15, 0, 1).random(10 ** 4)
    ratio = ball_measures(CANTOR, x, r) / r ** S
    return bool(ratio.min() >= 0.05 and ratio.max() <= 20), f"ratio range [{ratio.min():.4f}, {ratio.max():.4f}]"


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 16)}

INFO = {
    "5 at k_zero=12": lambda: criterion_5(12),
    "10 at c=0.5": lambda: criterion_10(0.5),
}


def evaluate(label, check):
    t0 = time.perf_counter()
    ok, detail = check()
    line = f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail} [{time.perf_counter() - t0:.1f} s]"
    RESULTS.append(line)
    return ok, line


@pytest.mark.parametrize("n", list(CRITERIA))
def test_criterion(n):
    ok, line = evaluate(str(n), CRITERIA[n])
    print(line)
    assert ok, line


@pytest.mark.parametrize("label", list(INFO))
def test_informational(label):
    ok, line = evaluate(label, INFO[label])
    RESULTS[-1] = "INFO " + line
    print(line)
    assert ok, line


if __name__ == "__main__":
    for n, check in CRITERIA.items():
        print(evaluate(str(n), check)[1], flush=True)
    for label, check in INFO.items():
        print("INFO " + evaluate(label, check)[1], flush=True)
