"""Bounds on the critical covering constant for the middle-thirds Cantor measure.

Radii ``c n**(-1/s)`` with ``s = log 2 / log 3``. The constant is bracketed by

* an upper bound from the average density at 0, the minimum over the set;
* a lower bound ``(dim nu / (s alpha'))**(1/s)`` from an n-step Bernoulli
  witness ``nu`` and an upper bound ``alpha'`` on its typical average density.

Positions of level-m Cantor cylinders are handled as integers ``P`` with
``pi = P / 3**m``. Since ``3**s = 2`` every power ``3**(s m)`` cancels against
a mass ``2**-m``, so the only floating-point step is ``P**-s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .conformal import SelfSimilarIFS
from .errors import BudgetExceeded, InvalidArgument
from .measures import SelfSimilarMeasure
from .numerics import ceil_decimals, floor_decimals
from .streams import stream

S = math.log(2) / math.log(3)
TERM_BUDGET = 10 ** 8
ALPHA0_GAP = 5e-4

PUBLISHED_WEIGHTS = {
    "000": 0.1431125, "111": 0.1431125,
    "001": 0.1243875, "110": 0.1243875,
    "010": 0.1081125, "101": 0.1081125,
    "011": 0.1243875, "100": 0.1243875,
}


def mirror_index(index: int, n: int) -> int:
    """Index of the block with every binary digit flipped."""
    return index ^ ((1 << n) - 1)


@dataclass(frozen=True)
class BernoulliSpec:
    """Weights of an n-step Bernoulli measure, indexed by blocks read as binary numbers."""

    n: int
    weights: tuple[float, ...]
    symmetric: bool = False

    def __post_init__(self):
        if not 1 <= self.n <= 8:
            raise InvalidArgument("block length n must lie in 1..8")
        w = tuple(float(v) for v in self.weights)
        object.__setattr__(self, "weights", w)
        if len(w) != 2 ** self.n:
            raise InvalidArgument(f"need {2 ** self.n} weights for n={self.n}, got {len(w)}")
        if any(not math.isfinite(v) or v < 0 for v in w):
            raise InvalidArgument("weights must be finite and non-negative")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise InvalidArgument(f"weights must sum to 1 within 1e-12, got {math.fsum(w)!r}")
        if self.symmetric:
            for i in range(len(w)):
                if w[i] != w[mirror_index(i, self.n)]:
                    raise InvalidArgument(f"weights of block {i} and its mirror differ")

    @classmethod
    def uniform(cls, n: int) -> BernoulliSpec:
        return cls(n, tuple([2.0 ** -n] * 2 ** n), True)

    @classmethod
    def published(cls) -> BernoulliSpec:
        """The published 3-step witness."""
        return cls(3, tuple(PUBLISHED_WEIGHTS[format(i, "03b")] for i in range(8)), True)

    @classmethod
    def from_orbits(cls, n: int, orbit_weights) -> BernoulliSpec:
        """Symmetric spec from one weight per mirror pair (blocks starting with 0)."""
        v = np.asarray(orbit_weights, dtype=float)
        if v.size != 2 ** (n - 1):
            raise InvalidArgument(f"need {2 ** (n - 1)} orbit weights")
        w = np.empty(2 ** n)
        half = v / (2.0 * math.fsum(v))
        for i in range(2 ** (n - 1)):
            w[i] = w[mirror_index(i, n)] = half[i]
        return cls(n, tuple(w.tolist()), True)

    def mirrored(self) -> BernoulliSpec:
        return BernoulliSpec(self.n, tuple(self.weights[mirror_index(i, self.n)]
                                           for i in range(2 ** self.n)), self.symmetric)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights)


def bernoulli_measure(spec: BernoulliSpec) -> SelfSimilarMeasure:
    """The n-step measure as a Bernoulli measure on the n-fold iterated Cantor IFS."""
    return SelfSimilarMeasure(SelfSimilarIFS.cantor().iterate(spec.n), spec.weights)


def cantor_positions(m: int) -> np.ndarray:
    """Integers ``3**m * pi(w)`` for all binary words of length m, lexicographic."""
    P = np.zeros(1, dtype=np.int64)
    for _ in range(m):
        P = (3 * P[:, None] + np.array([0, 2], dtype=np.int64)[None, :]).ravel()
    return P


def avg_density_zero_lower(k: int) -> float:
    """Lower bound for the average density of the Cantor measure at 0.

    Sums ``2**-(k+1) (pi(w) + 3**-(k+1))**-s / (s log 3)`` over words ``w`` of
    length k+1 that start with the digit 1.
    """
    if not 1 <= k <= 24:
        raise BudgetExceeded(f"k must lie in 1..24 (2**k terms), got {k}")
    P = cantor_positions(k)
    terms = (2 * 3 ** k + P + 1).astype(float) ** -S
    return math.fsum(terms) / math.log(2)


def nstep_dimension(spec: BernoulliSpec) -> float:
    p = spec.as_array()
    if np.any(p <= 0):
        raise InvalidArgument("dimension formula needs every block weight positive")
    return -math.fsum(p * np.log(p)) / (spec.n * math.log(3))


@lru_cache(maxsize=16)
def _density_kernels(n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-target-word sums for the upper and lower typical-density bounds.

    Entry ``l`` (a word of length ``m=(k+1)n``) of the upper kernel is
    ``sum_w (|P_w - P_l| - 1)**-s / (n log 2)`` over words ``w`` whose first
    n-block differs from that of ``l``; the lower kernel uses ``+ 2``.
    """
    m = (k + 1) * n
    if 4 ** m > TERM_BUDGET:
        raise BudgetExceeded(f"4**{m} pair terms exceed the budget {TERM_BUDGET:.0e}")
    P = cantor_positions(m)
    blocks = 2 ** n
    rest = 2 ** (m - n)
    up = np.zeros(P.size)
    lo = np.zeros(P.size)
    for i in range(blocks):
        K = P[i * rest:(i + 1) * rest]
        others = np.ones(P.size, dtype=bool)
        others[i * rest:(i + 1) * rest] = False
        L = P[others]
        for start in range(0, K.size, 256):
            D = np.abs(K[start:start + 256, None] - L[None, :])
            if np.any(D <= 1):
                raise AssertionError("distinct blocks produced adjacent positions")
            up[others] += ((D - 1).astype(float) ** -S).sum(axis=0)
            lo[others] += ((D + 2).astype(float) ** -S).sum(axis=0)
    scale = 1.0 / (n * math.log(2))
    return up * scale, lo * scale


def _product_weights(spec: BernoulliSpec, k: int) -> np.ndarray:
    q = spec.as_array()
    p = q
    for _ in range(k):
        p = np.kron(p, q)
    return p


def typical_density_bounds(spec: BernoulliSpec, k: int) -> tuple[float, float]:
    """``(lower, upper)`` bounds on the nu-typical average density of the Cantor measure."""
    if k < 0:
        raise InvalidArgument("refinement level k must be non-negative")
    up, lo = _density_kernels(spec.n, k)
    p = _product_weights(spec, k)
    return math.fsum(p * lo), math.fsum(p * up)


@dataclass(frozen=True)
class Alpha0Estimate:
    value: float
    lower: float
    upper: float
    k: int


@lru_cache(maxsize=4)
def alpha0_estimate(gap: float = ALPHA0_GAP, k_max: int = 11) -> Alpha0Estimate:
    """Typical average density for the Cantor measure itself (uniform 1-step witness)."""
    spec = BernoulliSpec.uniform(1)
    for k in range(1, k_max + 1):
        lo, up = typical_density_bounds(spec, k)
        if up - lo < gap:
            break
    return Alpha0Estimate(0.5 * (lo + up), lo, up, k)


@dataclass(frozen=True)
class BoundsReport:
    s: float
    alpha0_estimate: float
    alpha_min_lower: float
    alpha_prime_upper: float
    alpha_prime_lower: float
    dim_nu: float
    constant_lower_raw: float
    constant_upper_raw: float
    trivial_constant: float
    k_density: int
    k_zero: int
    constant_lower: float = field(init=False)
    constant_upper: float = field(init=False)
    alpha_min_lower_rounded: float = field(init=False)
    alpha_prime_upper_rounded: float = field(init=False)
    rounding: tuple[tuple[str, str], ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "constant_lower", floor_decimals(self.constant_lower_raw))
        object.__setattr__(self, "constant_upper", ceil_decimals(self.constant_upper_raw))
        object.__setattr__(self, "alpha_min_lower_rounded", floor_decimals(self.alpha_min_lower))
        object.__setattr__(self, "alpha_prime_upper_rounded", ceil_decimals(self.alpha_prime_upper))
        object.__setattr__(self, "rounding", (
            ("constant_lower", "floor"), ("constant_upper", "ceiling"),
            ("alpha_min_lower", "floor"), ("alpha_prime_upper", "ceiling")))

    def items(self):
        """Flat ``(key, value)`` pairs for reports."""
        return [
            ("s", self.s),
            ("k_density", self.k_density),
            ("k_zero", self.k_zero),
            ("alpha0_estimate", self.alpha0_estimate),
            ("alpha_min_lower", self.alpha_min_lower),
            ("alpha_min_lower_floor5", self.alpha_min_lower_rounded),
            ("alpha_prime_lower", self.alpha_prime_lower),
            ("alpha_prime_upper", self.alpha_prime_upper),
            ("alpha_prime_upper_ceil5", self.alpha_prime_upper_rounded),
            ("dim_nu", self.dim_nu),
            ("trivial_constant", self.trivial_constant),
            ("constant_lower_raw", self.constant_lower_raw),
            ("constant_lower", self.constant_lower),
            ("constant_upper_raw", self.constant_upper_raw),
            ("constant_upper", self.constant_upper),
        ]


def lower_constant(spec: BernoulliSpec, k: int) -> float:
    """``(dim nu / (s alpha'))**(1/s)`` before rounding."""
    _, up = typical_density_bounds(spec, k)
    return (nstep_dimension(spec) / (S * up)) ** (1.0 / S)


def critical_constant_bounds(spec: BernoulliSpec, k_density: int = 3, k_zero: int = 5) -> BoundsReport:
    lo, up = typical_density_bounds(spec, k_density)
    dim = nstep_dimension(spec)
    a_min = avg_density_zero_lower(k_zero)
    a0 = alpha0_estimate()
    return BoundsReport(
        s=S,
        alpha0_estimate=a0.value,
        alpha_min_lower=a_min,
        alpha_prime_upper=up,
        alpha_prime_lower=lo,
        dim_nu=dim,
        constant_lower_raw=(dim / (S * up)) ** (1.0 / S),
        constant_upper_raw=(1.0 / a_min) ** (1.0 / S),
        trivial_constant=(1.0 / a0.value) ** (1.0 / S),
        k_density=k_density,
        k_zero=k_zero,
    )


# --- optimizer --------------------------------------------------------------


def default_levels(n: int) -> tuple[int, int]:
    """``(k_screen, k_confirm)``: confirm with the finest k whose words fit 12 digits."""
    k_confirm = max(1, 12 // n - 1)
    return max(0, k_confirm - 1), k_confirm


@dataclass(frozen=True)
class OptimizationResult:
    spec: BernoulliSpec
    bound: float
    bound_raw: float
    k: int
    evaluations: int
    trace: tuple[tuple[int, tuple[float, ...], float], ...]


def _objective(n: int, k: int):
    up_kernel, _ = _density_kernels(n, k)
    blocks = 2 ** n

    def value(v: np.ndarray) -> float:
        w = np.empty(blocks)
        half = v / (2.0 * v.sum())
        for i in range(blocks // 2):
            w[i] = w[mirror_index(i, n)] = half[i]
        if np.any(w <= 0):
            return -math.inf
        p = w
        for _ in range(k):
            p = np.kron(p, w)
        up = float(p @ up_kernel)
        dim = float(-(w * np.log(w)).sum() / (n * math.log(3)))
        return (dim / (S * up)) ** (1.0 / S)

    return value


def _pattern_search(f, v0: np.ndarray, budget: int, step: float = 0.05, min_step: float = 1e-7):
    """Compass search over mass transfers between orbit pairs; keeps the simplex."""
    v = v0 / v0.sum()
    best = f(v)
    evals = 1
    d = v.size
    pairs = [(i, j) for i in range(d) for j in range(d) if i != j]
    while step > min_step and evals < budget:
        improved = False
        for i, j in pairs:
            if evals >= budget:
                break
            h = min(step, v[j] * 0.999)
            if h <= 0:
                continue
            cand = v.copy()
            cand[i] += h
            cand[j] -= h
            val = f(cand)
            evals += 1
            if val > best:
                v, best, improved = cand, val, True
        if not improved:
            step *= 0.5
    return v, best, evals


def optimize_bernoulli(n: int, budget: int = 10_000, seed: int = 0,
                       start: BernoulliSpec | None = None, restarts: int | None = None
                       ) -> OptimizationResult:
    """Maximize the lower constant over symmetric n-step Bernoulli weights.

    Random restarts (Dirichlet perturbations of the uniform vector, plus
    ``start`` when given) are each polished by compass search at the screening
    level, then re-polished at the confirming level. The best confirmed value
    wins. Randomness comes from ``seed`` only.
    """
    if not 1 <= n <= 4:
        raise InvalidArgument("optimizer supports block lengths 1..4")
    k_screen, k_confirm = default_levels(n)
    orbits = 2 ** (n - 1)
    f_confirm = _objective(n, k_confirm)
    trace = []
    if orbits == 1:
        v = np.ones(1)
        val = f_confirm(v)
        spec = BernoulliSpec.from_orbits(n, v)
        trace.append((0, spec.weights, val))
        return OptimizationResult(spec, floor_decimals(val), val, k_confirm, 1, tuple(trace))
    f_screen = _objective(n, k_screen)
    if restarts is None:
        restarts = 8
    per_restart = max(10, budget // (2 * (restarts + (start is not None))))
    starts = []
    if start is not None:
        if start.n != n:
            raise InvalidArgument("start vector has the wrong block length")
        starts.append(2.0 * start.as_array()[:orbits])
    for r in range(restarts):
        rng = stream(seed, r, 0)
        jitter = rng.dirichlet(np.full(orbits, 8.0))
        starts.append(0.5 * jitter + 0.5 / orbits)
    evaluations = 0
    best_v, best_val = None, -math.inf
    for it, v0 in enumerate(starts):
        v = np.asarray(v0, dtype=float)
        e1 = 0
        if start is None or it > 0:
            v, _, e1 = _pattern_search(f_screen, v, per_restart)
        v, val, e2 = _pattern_search(f_confirm, v, per_restart, step=0.01)
        evaluations += e1 + e2
        trace.append((it, tuple((v / (2 * v.sum())).tolist()), val))
        if val > best_val:
            best_v, best_val = v, val
    spec = BernoulliSpec.from_orbits(n, best_v)
    # recompute through the public path so the reported bound matches the spec exactly
    raw = lower_constant(spec, k_confirm)
    return OptimizationResult(spec, floor_decimals(raw), raw, k_confirm, evaluations, tuple(trace))

