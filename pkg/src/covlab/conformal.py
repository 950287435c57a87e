"""Affine self-similar systems on the line and the analysis built on them.

An IFS is a finite list of contractions ``g_i(x) = a_i x + b_i``. Words are
tuples of symbols; ``g_w = g_{w_1} o ... o g_{w_k}`` and the empty word is the
identity. The projection of a finite word is ``g_w(z0)`` where ``z0`` is the
fixed point of ``g_0``, so ``w`` stands for the point coded by ``w000...``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidArgument, PreconditionFailed
from .measures import (
    DEFAULT_TOL,
    AtomicMeasure,
    Interval,
    PolynomialRadii,
    ProbabilityMeasure,
    SelfSimilarMeasure,
    StepDensityMeasure,
    ball_measures,
)
from .series import SeriesProbe, probe_geometric
from .streams import stream

Word = tuple[int, ...]


def moran_dimension(system) -> float:
    """Root ``s`` of ``sum |a_i|**s = 1``.

    Accepts an IFS or a bare sequence of contraction ratios, so that systems
    without strong separation (such as two halves of the unit interval) can
    still be evaluated.
    """
    ratios = system.ratios if isinstance(system, SelfSimilarIFS) else system
    r = np.abs(np.asarray(ratios, dtype=float))
    if r.size < 2 or np.any(r <= 0) or np.any(r >= 1):
        raise InvalidArgument("need at least two ratios with 0 < |a| < 1")

    def pressure(s):
        return math.fsum(r ** s) - 1.0

    hi = 1.0
    while pressure(hi) > 0:
        hi *= 2.0
    return float(brentq(pressure, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))


class SelfSimilarIFS:
    """Affine IFS with strong separation; caches hull, dimension and separation."""

    def __init__(self, ratios, offsets):
        a = np.asarray(ratios, dtype=float).ravel()
        b = np.asarray(offsets, dtype=float).ravel()
        if a.size < 2:
            raise InvalidArgument("an IFS needs at least two maps")
        if b.size != a.size:
            raise InvalidArgument("ratios and offsets differ in length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InvalidArgument("ratios and offsets must be finite")
        if np.any(a == 0) or np.any(np.abs(a) >= 1):
            raise InvalidArgument("every ratio must satisfy 0 < |a| < 1")
        a.flags.writeable = False
        b.flags.writeable = False
        self.ratios = a
        self.offsets = b
        self.hull = self._find_hull()
        self._check_separation()
        self.dimension = moran_dimension(a)
        self.separation = self._separation_constant()
        self.anchor_seed = float(b[0] / (1.0 - a[0]))

    @classmethod
    def cantor(cls) -> SelfSimilarIFS:
        """Middle-thirds Cantor set: ``x/3`` and ``x/3 + 2/3``."""
        return cls([1 / 3, 1 / 3], [0.0, 2 / 3])

    def __repr__(self):
        return f"SelfSimilarIFS(ratios={self.ratios.tolist()}, offsets={self.offsets.tolist()})"

    def __eq__(self, other):
        return (isinstance(other, SelfSimilarIFS)
                and np.array_equal(self.ratios, other.ratios)
                and np.array_equal(self.offsets, other.offsets))

    def __hash__(self):
        return hash((self.ratios.tobytes(), self.offsets.tobytes()))

    @property
    def n_symbols(self) -> int:
        return self.ratios.size

    @property
    def diameter(self) -> float:
        return self.hull[1] - self.hull[0]

    def _images(self, lo, hi):
        e0 = self.ratios * lo + self.offsets
        e1 = self.ratios * hi + self.offsets
        return np.minimum(e0, e1), np.maximum(e0, e1)

    def _find_hull(self) -> tuple[float, float]:
        fixed = self.offsets / (1.0 - self.ratios)
        lo, hi = float(fixed.min()), float(fixed.max())
        for _ in range(10_000):
            l, h = self._images(lo, hi)
            nlo, nhi = min(lo, float(l.min())), max(hi, float(h.max()))
            if nlo == lo and nhi == hi:
                break
            lo, hi = nlo, nhi
        return lo, hi

    def _check_separation(self):
        l, h = self._images(*self.hull)
        order = np.argsort(l)
        if np.any(l[order][1:] <= h[order][:-1]):
            raise InvalidArgument("strong separation fails: level-1 hull images intersect")

    def _separation_constant(self) -> float:
        best = math.inf
        for level in (1, 2):
            A, B = self.level_maps(level)
            e0 = A * self.hull[0] + B
            e1 = A * self.hull[1] + B
            lo, hi = np.minimum(e0, e1), np.maximum(e0, e1)
            gap = np.maximum(lo[None, :] - hi[:, None], lo[:, None] - hi[None, :])
            np.fill_diagonal(gap, np.inf)
            best = min(best, float((gap / (hi - lo)[:, None]).min()))
        return best

    def check_word(self, w) -> Word:
        w = tuple(int(i) for i in w)
        if any(i < 0 or i >= self.n_symbols for i in w):
            raise InvalidArgument(f"word {w} has symbols outside 0..{self.n_symbols - 1}")
        return w

    def word_map(self, w) -> tuple[float, float]:
        """``(A, B)`` with ``g_w(x) = A x + B``."""
        A, B = 1.0, 0.0
        for i in self.check_word(w):
            B += A * self.offsets[i]
            A *= self.ratios[i]
        return A, B

    def level_maps(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        """Maps of all words of length ``level`` in lexicographic order."""
        A = np.ones(1)
        B = np.zeros(1)
        for _ in range(level):
            B = (B[:, None] + A[:, None] * self.offsets[None, :]).ravel()
            A = (A[:, None] * self.ratios[None, :]).ravel()
        return A, B

    def words(self, level: int) -> list[Word]:
        return list(itertools.product(range(self.n_symbols), repeat=level))

    def iterate(self, n: int) -> SelfSimilarIFS:
        """The system of all length-``n`` compositions, symbols in lexicographic order."""
        if n < 1:
            raise InvalidArgument("iteration count must be at least 1")
        A, B = self.level_maps(n)
        return SelfSimilarIFS(A, B)

    def cylinder(self, w) -> tuple[float, float]:
        A, B = self.word_map(w)
        e0, e1 = A * self.hull[0] + B, A * self.hull[1] + B
        return min(e0, e1), max(e0, e1)

    def anchor(self, w) -> float:
        A, B = self.word_map(w)
        return A * self.anchor_seed + B

    def code(self, x: float, depth: int = 64) -> Word:
        """Greedy coding of a real point; ties go to the leftmost cylinder."""
        word = []
        A, B = 1.0, 0.0
        for _ in range(depth):
            e0 = A * self.ratios * self.hull[0] + A * self.offsets + B
            e1 = A * self.ratios * self.hull[1] + A * self.offsets + B
            lo, hi = np.minimum(e0, e1), np.maximum(e0, e1)
            inside = np.nonzero((lo <= x) & (x <= hi))[0]
            if inside.size == 0:
                dist = np.maximum(lo - x, x - hi)
                i = int(np.argmin(dist))
            else:
                i = int(inside[np.argmin(lo[inside])])
            word.append(i)
            B += A * self.offsets[i]
            A *= self.ratios[i]
        return tuple(word)


def parse_word(text: str, n_symbols: int | None = None) -> Word:
    """``"0110"`` or ``"3,0,7"``; the empty string is the empty word."""
    text = text.strip()
    if not text:
        return ()
    parts = text.split(",") if "," in text else list(text)
    try:
        w = tuple(int(p) for p in parts)
    except ValueError as exc:
        raise InvalidArgument(f"cannot parse word {text!r}") from exc
    if n_symbols is not None and any(i < 0 or i >= n_symbols for i in w):
        raise InvalidArgument(f"word {text!r} uses symbols outside 0..{n_symbols - 1}")
    return w


@dataclass(frozen=True)
class CylinderGeometry:
    interval: Interval
    anchor: float
    diameter: float


def cylinder_geometry(ifs: SelfSimilarIFS, w) -> CylinderGeometry:
    A, _ = ifs.word_map(w)
    lo, hi = ifs.cylinder(w)
    return CylinderGeometry(Interval.closed(float(lo), float(hi)), float(ifs.anchor(w)),
                            float(abs(A) * ifs.diameter))


def natural_measure(ifs: SelfSimilarIFS) -> SelfSimilarMeasure:
    p = np.abs(ifs.ratios) ** ifs.dimension
    return SelfSimilarMeasure(ifs, p / math.fsum(p))


def cylinder_mass(mu: SelfSimilarMeasure, w) -> float:
    return math.prod(mu.weights[i] for i in mu.ifs.check_word(w))


def cylinder_discretization(mu: SelfSimilarMeasure, depth: int) -> AtomicMeasure:
    """Depth-``depth`` cylinder masses placed at the cylinder hull midpoints."""
    A, B = mu.ifs.level_maps(depth)
    m = np.ones(1)
    for _ in range(depth):
        m = (m[:, None] * mu.weights[None, :]).ravel()
    h0, h1 = mu.ifs.hull
    mid = A * (h0 + h1) / 2 + B
    order = np.argsort(mid)
    return AtomicMeasure(mid[order], m[order] / math.fsum(m))


def step_discretization(mu: StepDensityMeasure, cells: int) -> AtomicMeasure:
    """Masses of ``cells`` equal subintervals of the support at their midpoints."""
    lo, hi = mu.support
    edges = np.linspace(lo, hi, cells + 1)
    m = np.diff(mu.cdf(edges))
    keep = m > 0
    mid = (edges[:-1] + edges[1:]) / 2
    return AtomicMeasure(mid[keep], m[keep] / math.fsum(m[keep]))


def index_bounds(seq: PolynomialRadii, ifs: SelfSimilarIFS, w) -> tuple[int, int]:
    """``(n_lower, n_upper)`` for the length-k word ``w``.

    ``n_lower`` is the first n with ``r_n < diam g_{w|k-1}(X)`` (1 for the empty
    word) and ``n_upper`` the first n with ``r_n < delta * diam g_w(X)``.
    """
    if not isinstance(seq, PolynomialRadii):
        raise InvalidArgument("index bounds need polynomial radii")
    w = ifs.check_word(w)
    A, _ = ifs.word_map(w)
    n_upper = seq.first_index_below(ifs.separation * abs(A) * ifs.diameter)
    if not w:
        return 1, n_upper
    Ap, _ = ifs.word_map(w[:-1])
    return seq.first_index_below(abs(Ap) * ifs.diameter), n_upper


def critical_exponent(mu: ProbabilityMeasure) -> float:
    """Supremum of lower local dimensions over the support."""
    if isinstance(mu, AtomicMeasure):
        return 0.0
    if isinstance(mu, StepDensityMeasure):
        return 1.0
    if isinstance(mu, SelfSimilarMeasure):
        return float(np.max(np.log(mu.weights) / np.log(np.abs(mu.ifs.ratios))))
    raise InvalidArgument(f"unsupported measure type {type(mu).__name__}")


# --- moments of ball masses -------------------------------------------------


def _moments(mu: SelfSimilarMeasure) -> tuple[float, float]:
    """Mean and variance of ``mu`` from the self-similarity equations."""
    a, b, p = mu.ifs.ratios, mu.ifs.offsets, mu.weights
    mean = math.fsum(p * b) / (1.0 - math.fsum(p * a))
    second = math.fsum(p * (2 * a * b * mean + b * b)) / (1.0 - math.fsum(p * a * a))
    return mean, max(second - mean * mean, 0.0)


def ball_mass_moment(mu: SelfSimilarMeasure, x: float, a: float, b: float, beta: float,
                     tol: float = 1e-11) -> float:
    """``integral_a^b mu(B(x, r)) r**(-beta-1) dr`` with absolute error about ``tol``.

    By Fubini the integral equals ``integral f(|x-y|) dmu(y)`` with
    ``f(d) = (max(a, min(d, b))**-beta - b**-beta) / beta``. Cylinders are split
    breadth first; a cylinder on one side of ``x`` and inside the smooth range
    of ``f`` is integrated by a second-order expansion about its centre of
    mass once the third-order remainder bound is below ``tol``; cylinders
    meeting a kink of ``f`` are accepted once the oscillation of ``f`` on them
    is below ``2 tol``.
    """
    if not 0 < a < b:
        raise InvalidArgument("need 0 < a < b")
    ra, rb = a ** -beta, b ** -beta

    def f(d):
        return (np.maximum(a, np.minimum(d, b)) ** -beta - rb) / beta

    mean, var = _moments(mu)
    rat, off, p = mu.ifs.ratios, mu.ifs.offsets, mu.weights
    h0, h1 = mu.ifs.hull
    A = np.ones(1)
    B = np.zeros(1)
    m = np.ones(1)
    parts = []
    flat_value = (ra - rb) / beta
    c2 = (beta + 1.0)
    c3 = (beta + 1.0) * (beta + 2.0) / 6.0
    for _ in range(400):
        e0 = A * h0 + B
        e1 = A * h1 + B
        cl, cr = np.minimum(e0, e1), np.maximum(e0, e1)
        straddle = (cl < x) & (x < cr)
        dl, dr = np.abs(x - cl), np.abs(x - cr)
        dmin = np.where(straddle, 0.0, np.minimum(dl, dr))
        dmax = np.maximum(dl, dr)
        far = dmin >= b
        near = dmax <= a
        smooth = ~straddle & (dmin >= a) & (dmax <= b) & ~far & ~near
        kink = ~(far | near | smooth)

        value = np.where(near, m * flat_value, 0.0)
        accept = far | near

        width = cr - cl
        var_u = A * A * var
        dbar = np.abs(x - (A * mean + B))
        with np.errstate(divide="ignore", invalid="ignore"):
            remainder = c3 * np.where(smooth, dmin, 1.0) ** (-beta - 3.0) * width * var_u
            taylor = f(dbar) + 0.5 * c2 * np.where(smooth, dbar, 1.0) ** (-beta - 2.0) * var_u
        ok_smooth = smooth & (remainder <= tol)
        value = np.where(ok_smooth, m * taylor, value)

        fmin, fmax = f(dmax), f(dmin)
        ok_kink = kink & (fmax - fmin <= 2 * tol)
        value = np.where(ok_kink, m * 0.5 * (fmin + fmax), value)
        accept = accept | ok_smooth | ok_kink
        parts.append(math.fsum(value[accept]))
        split = ~accept
        if not np.any(split):
            break
        A, B, m = A[split], B[split], m[split]
        B = (B[:, None] + A[:, None] * off[None, :]).ravel()
        A = (A[:, None] * rat[None, :]).ravel()
        m = (m[:, None] * p[None, :]).ravel()
    return math.fsum(parts)


# --- average densities ------------------------------------------------------


@dataclass(frozen=True)
class AverageDensity:
    value: float
    error_bound: float
    t_min: float
    trace: tuple[tuple[float, float, float], ...]
    cells: int
    converged: bool = True
    notes: tuple[str, ...] = field(default=())


def _power_weight(lo, hi, s):
    """``integral_lo^hi r**(-s-1) dr`` without cancellation for narrow cells."""
    return -(lo ** -s) * np.expm1(s * np.log(lo / hi)) / s


def average_density(ifs: SelfSimilarIFS, x, t_min: float, quad_tol: float = 1e-8,
                    mu: SelfSimilarMeasure | None = None, max_cells: int = 2_000_000,
                    tol: float = DEFAULT_TOL) -> AverageDensity:
    """``(1/-log t) * integral_t^1 mu(B(x,r)) r**(-s-1) dr`` with certified error.

    ``r -> mu(B(x, r))`` is non-decreasing, so on a cell ``[lo, hi]`` the
    integral lies between ``F(lo) W`` and ``F(hi) W`` where ``W`` is the exact
    weight integral. Cells carrying the largest enclosure gaps are bisected
    until the total gap is at most ``2 * quad_tol * (-log t)``. The reported
    value is the enclosure midpoint. ``x`` may be a word (its projection is
    used) or a real number.
    """
    if not 0 < t_min < 1:
        raise InvalidArgument("t_min must lie in (0, 1)")
    if mu is None:
        mu = natural_measure(ifs)
    if not isinstance(x, (int, float, np.floating, np.integer)):
        x = ifs.anchor(x)
    x = float(x)
    s = ifs.dimension
    log_span = -math.log(t_min)
    target = 2.0 * quad_tol * log_span

    decades = [10.0 ** -j for j in range(0, int(math.floor(-math.log10(t_min))) + 1)]
    edges = sorted({t_min, 1.0, *[d for d in decades if t_min < d < 1.0]})
    fine = np.unique(np.concatenate([np.geomspace(lo, hi, 17) for lo, hi in zip(edges, edges[1:])]))
    lo, hi = fine[:-1], fine[1:]
    F = ball_measures(mu, x, fine, tol)
    Flo, Fhi = F[:-1], F[1:]
    converged = True
    while True:
        W = _power_weight(lo, hi, s)
        gap = (Fhi - Flo) * W
        total_gap = math.fsum(gap)
        if total_gap <= target:
            break
        if lo.size >= max_cells:
            converged = False
            break
        order = np.argsort(gap)[::-1]
        cum = np.cumsum(gap[order])
        count = int(np.searchsorted(cum, total_gap - target / 2)) + 1
        chosen = np.zeros(lo.size, dtype=bool)
        chosen[order[:count]] = True
        mid = 0.5 * (lo[chosen] + hi[chosen])
        Fmid = ball_measures(mu, x, mid, tol)
        lo = np.concatenate([lo[~chosen], lo[chosen], mid])
        hi = np.concatenate([hi[~chosen], mid, hi[chosen]])
        Flo = np.concatenate([Flo[~chosen], Flo[chosen], Fmid])
        Fhi = np.concatenate([Fhi[~chosen], Fmid, Fhi[chosen]])
    W = _power_weight(lo, hi, s)
    est = 0.5 * (Flo + Fhi) * W
    trace = []
    for blo, bhi in zip(edges, edges[1:]):
        sel = (lo >= blo) & (hi <= bhi)
        trace.append((blo, bhi, math.fsum(est[sel])))
    notes = () if converged else (f"cell budget {max_cells} reached before quad_tol",)
    return AverageDensity(
        value=math.fsum(est) / log_span,
        error_bound=0.5 * total_gap / log_span,
        t_min=t_min,
        trace=tuple(trace),
        cells=int(lo.size),
        converged=converged,
        notes=notes,
    )


# --- regularity constants and the pointwise Billard series -------------------


class _BallSumEngine:
    """Sums ``sum_{n <= N} mu(B(x, r_n))`` for a deep word ``w`` and huge ``N``.

    Terms with ``n <= exact_terms`` are evaluated one by one. Beyond that the
    sum is replaced by the midpoint-rule integral of ``u -> mu(B(x, r(u)))``;
    after the substitution ``r = c u**-t`` this is a ball-mass moment, which
    is evaluated band by band after zooming into the deepest cylinder of ``w``
    that still isolates the ball (radius at most ``delta`` times its diameter).
    """

    def __init__(self, mu: SelfSimilarMeasure, seq: PolynomialRadii, word: Word,
                 exact_terms: int = 1 << 14, tol: float = DEFAULT_TOL,
                 moment_tol: float = 1e-11):
        self.mu = mu
        self.ifs = mu.ifs
        self.seq = seq
        self.word = word
        self.beta = 1.0 / seq.t
        self.exact_terms = exact_terms
        self.moment_tol = moment_tol
        self.x = self.ifs.anchor(word)
        g = ball_measures(mu, self.x, seq.first(exact_terms), tol)
        self.prefix = np.concatenate([[0.0], np.cumsum(g)])
        ratios = np.abs(self.ifs.ratios[list(word)])
        self.log_rho = np.concatenate([[0.0], np.cumsum(np.log(ratios))])
        self.log_mass = np.concatenate([[0.0], np.cumsum(np.log(mu.weights[list(word)]))])
        self.isolating = self.ifs.separation * self.ifs.diameter * np.exp(self.log_rho)
        self._tail_cache: dict[float, float] = {}

    def radius(self, u: float) -> float:
        return self.seq.c * u ** -self.seq.t

    def zoom_level(self, r_hi: float) -> int:
        ok = np.nonzero(self.isolating >= r_hi)[0]
        return int(ok[-1]) if ok.size else 0

    def band_integral(self, r_lo: float, r_hi: float) -> float:
        """``integral mu(B(x,r)) r**(-beta-1) dr`` over ``[r_lo, r_hi]``."""
        j = self.zoom_level(r_hi)
        if j > len(self.word) - 2:
            raise PreconditionFailed("word too short for the requested scale")
        rho = math.exp(self.log_rho[j])
        xz = self.ifs.anchor(self.word[j:])
        inner = ball_mass_moment(self.mu, xz, r_lo / rho, r_hi / rho, self.beta, self.moment_tol)
        return math.exp(self.log_mass[j] - self.beta * self.log_rho[j]) * inner

    def sums(self, n_tops: list[int]) -> np.ndarray:
        """Partial sums at increasing indices ``n_tops``."""
        out = np.empty(len(n_tops))
        c_beta = self.seq.c ** self.beta * self.beta
        tail = 0.0
        prev_r = self.radius(self.exact_terms + 0.5)
        for idx, n in enumerate(n_tops):
            if n <= self.exact_terms:
                out[idx] = self.prefix[n]
                continue
            r = self.radius(float(n) + 0.5)
            if r < prev_r:
                # split at isolating radii so every band sits within one zoom level
                cuts = self.isolating[(self.isolating > r) & (self.isolating < prev_r)]
                edges = [prev_r, *sorted(cuts.tolist(), reverse=True), r]
                for hi_r, lo_r in zip(edges, edges[1:]):
                    tail += c_beta * self.band_integral(lo_r, hi_r)
                prev_r = r
            out[idx] = self.prefix[self.exact_terms] + tail
        return out


@dataclass(frozen=True)
class RegularityReport:
    c1: float
    c2: float
    c1_by_level: tuple[float, ...]
    c2_by_level: tuple[float, ...]
    words_checked: int
    growing: bool


def _regularity_words(ifs: SelfSimilarIFS, depth: int, max_words: int, seed: int) -> list[Word]:
    if ifs.n_symbols ** depth <= max_words:
        return ifs.words(depth)
    words = {tuple([i] * depth) for i in range(ifs.n_symbols)}
    rng = stream(seed, 0, 1)
    while len(words) < max_words:
        words.add(tuple(int(v) for v in rng.integers(0, ifs.n_symbols, depth)))
    return sorted(words)


def regularity_constants(ifs: SelfSimilarIFS, seq: PolynomialRadii, depth: int,
                         max_words: int = 1024, seed: int = 0,
                         mu: SelfSimilarMeasure | None = None) -> RegularityReport:
    """Empirical maxima of the cylinder sums and index products over words.

    For each word ``w`` of length ``depth`` (all of them, or a seeded sample
    plus the constant words when there are more than ``max_words``) and each
    ``k <= depth - 2``, the sum of ``mu(B(pi(w), r_n))`` over
    ``delta diam g_{w|k} X <= r_n < diam g_{w|k-1} X`` and the product
    ``n_lower * |g'_{w|k-1}|**s`` are recorded. ``growing`` flags a cylinder-sum
    maximum over the deeper half of the levels exceeding 1.25 times the
    maximum over the shallower half.
    """
    if not 3 <= depth <= 20:
        raise InvalidArgument("depth must lie in 3..20")
    if not isinstance(seq, PolynomialRadii):
        raise InvalidArgument("regularity constants need polynomial radii")
    if mu is None:
        mu = natural_measure(ifs)
    s = ifs.dimension
    words = _regularity_words(ifs, depth, max_words, seed)
    levels = depth - 2
    c1 = np.zeros(levels)
    c2 = np.zeros(levels)
    for w in words:
        bounds = [index_bounds(seq, ifs, w[:k]) for k in range(1, levels + 1)]
        tops = sorted({n for lo_hi in bounds for n in (lo_hi[0] - 1, lo_hi[1] - 1)})
        engine = _BallSumEngine(mu, seq, w, exact_terms=min(1 << 12, max(tops) + 1))
        sums = dict(zip(tops, engine.sums(tops)))
        for k, (n_lo, n_hi) in enumerate(bounds):
            total = sums[n_hi - 1] - sums[n_lo - 1] if n_hi > n_lo else 0.0
            c1[k] = max(c1[k], total)
            A, _ = ifs.word_map(w[:k])
            c2[k] = max(c2[k], n_lo * abs(A) ** s)
    half = levels // 2
    growing = bool(c1[half:].max() > 1.25 * c1[:half].max() + 1e-12) if half else False
    return RegularityReport(float(c1.max()), float(c2.max()), tuple(c1.tolist()),
                            tuple(c2.tolist()), len(words), growing)


def annulus_masses(nu: SelfSimilarMeasure, word: Word, K: int) -> np.ndarray:
    """``nu(A_k)`` for ``k = 0..K``: level-k cylinder of ``word`` minus level k+1."""
    word = nu.ifs.check_word(word)
    if len(word) < K + 1:
        raise InvalidArgument(f"need a word of length at least {K + 1}")
    cyl = np.concatenate([[1.0], np.cumprod(nu.weights[list(word[:K + 1])])])
    return cyl[:-1] - cyl[1:]


def extend_word(nu: SelfSimilarMeasure, prefix, length: int, seed: int) -> Word:
    """Pad ``prefix`` to ``length`` symbols drawn i.i.d. from the weights of ``nu``."""
    prefix = nu.ifs.check_word(prefix)
    if len(prefix) >= length:
        return prefix
    rng = stream(seed, 0, 2)
    extra = rng.choice(nu.weights.size, size=length - len(prefix), p=nu.weights)
    return prefix + tuple(int(i) for i in extra)


@dataclass(frozen=True)
class BillardSeries:
    probe: SeriesProbe
    word: Word
    log_terms: tuple[float, ...]
    ball_sums: tuple[float, ...]
    n_upper: tuple[int, ...]
    regularity: RegularityReport


def pw_billard_series(nu: SelfSimilarMeasure, mu: SelfSimilarMeasure, seq: PolynomialRadii,
                      x=(), K: int = 60, seed: int = 0, regularity_depth: int = 4,
                      exact_terms: int = 1 << 14) -> BillardSeries:
    """Terms ``nu(A_k(x)) * exp(sum_{n <= n_upper(k)} mu(B(x, r_n)))`` for k = 1..K.

    ``x`` is a word prefix; it is extended with nu-distributed symbols from
    ``seed`` so that the point is nu-typical below the prefix. Terms are
    carried as logarithms and classified with the geometric model.
    """
    if not isinstance(nu, SelfSimilarMeasure) or not isinstance(mu, SelfSimilarMeasure):
        raise InvalidArgument("both measures must be self-similar")
    if nu.ifs != mu.ifs:
        raise InvalidArgument("nu and mu must live on the same IFS")
    if np.max(nu.weights) >= 1.0:
        raise PreconditionFailed("nu has an atom (a Bernoulli weight equals 1)")
    if not isinstance(seq, PolynomialRadii):
        raise InvalidArgument("the pointwise Billard series needs polynomial radii")
    ifs = mu.ifs
    reg = regularity_constants(ifs, seq, regularity_depth, mu=mu)
    if not (math.isfinite(reg.c1) and math.isfinite(reg.c2)) or reg.growing:
        raise PreconditionFailed(
            f"regularity constants not bounded (C1={reg.c1:.6g}, C2={reg.c2:.6g}, growing={reg.growing})")
    word = extend_word(nu, x, K + 6, seed)
    annuli = annulus_masses(nu, word, K)[1:]
    n_up = [index_bounds(seq, ifs, word[:k])[1] for k in range(1, K + 1)]
    engine = _BallSumEngine(mu, seq, word, exact_terms=exact_terms)
    sums = engine.sums(n_up)
    log_terms = np.log(annuli) + sums
    probe = probe_geometric(log_terms)
    return BillardSeries(probe, word, tuple(log_terms.tolist()), tuple(sums.tolist()),
                         tuple(n_up), reg)
