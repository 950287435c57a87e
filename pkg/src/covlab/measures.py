"""Probability measures on the line with exact ball and interval masses.

Three families are representable: finitely many atoms, piecewise-constant
densities (optionally wrapped on the unit torus) and self-similar Bernoulli
measures on an affine IFS with strong separation. Balls are open.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import InvalidArgument, OutOfRange
from .numerics import CompensatedArray

if TYPE_CHECKING:
    from .conformal import SelfSimilarIFS

DEFAULT_TOL = 1e-14
_MASS_TOL = 1e-12
# Bits of one uniform a Bernoulli descent may consume before drawing a fresh one.
_BITS_PER_UNIFORM = 45


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise InvalidArgument("interval endpoints must not be NaN")
        if self.lo > self.hi:
            raise InvalidArgument(f"interval lower endpoint {self.lo} exceeds upper {self.hi}")

    @classmethod
    def open(cls, lo: float, hi: float) -> Interval:
        return cls(lo, hi, False, False)

    @classmethod
    def closed(cls, lo: float, hi: float) -> Interval:
        return cls(lo, hi, True, True)

    @classmethod
    def ball(cls, x: float, r: float) -> Interval:
        return cls(x - r, x + r, False, False)

    @property
    def length(self) -> float:
        return self.hi - self.lo


def _as_probability_vector(weights, what: str) -> np.ndarray:
    w = np.asarray(weights, dtype=float).ravel()
    if w.size == 0 or not np.all(np.isfinite(w)):
        raise InvalidArgument(f"{what} must be a non-empty finite vector")
    if np.any(w < 0):
        raise InvalidArgument(f"{what} must be non-negative")
    if abs(math.fsum(w) - 1.0) > _MASS_TOL:
        raise InvalidArgument(f"{what} must sum to 1 within {_MASS_TOL}, got {math.fsum(w)!r}")
    return w


class ProbabilityMeasure:
    """Common interface. Subclasses implement vectorized interval masses and sampling."""

    torus = False

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def distance(self, x, y):
        """Metric used for balls: |x - y|, or arc distance on the unit torus."""
        d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        if self.torus:
            d = np.mod(d, 1.0)
            d = np.minimum(d, 1.0 - d)
        return d

    def masses(self, lo, hi, lo_closed=False, hi_closed=False, tol=DEFAULT_TOL) -> np.ndarray:
        raise NotImplementedError

    def ball_masses(self, x, r, tol=DEFAULT_TOL) -> np.ndarray:
        return self.masses(x - r, x + r, False, False, tol)

    def draws_per_point(self, depth: int) -> int:
        return 1

    def points_from_uniforms(self, u: np.ndarray, depth: int) -> np.ndarray:
        """Map rows of uniforms, shape ``(..., draws_per_point)``, to sample points."""
        raise NotImplementedError


class AtomicMeasure(ProbabilityMeasure):
    def __init__(self, points, weights=None):
        pts = np.asarray(points, dtype=float).ravel()
        if pts.size == 0 or not np.all(np.isfinite(pts)):
            raise InvalidArgument("atom positions must be a non-empty finite vector")
        if np.any(np.diff(pts) <= 0):
            raise InvalidArgument("atom positions must be strictly increasing")
        if weights is None:
            weights = np.full(pts.size, 1.0 / pts.size)
        w = _as_probability_vector(weights, "atom weights")
        if w.size != pts.size:
            raise InvalidArgument("atom weights and positions differ in length")
        if np.any(w == 0):
            raise InvalidArgument("atom weights must be positive")
        self.points = pts
        self.weights = w
        self._cum = np.concatenate([[0.0], np.cumsum(w)])
        self._cum[-1] = 1.0

    @classmethod
    def dirac(cls, x: float) -> AtomicMeasure:
        return cls([x], [1.0])

    def __repr__(self):
        return f"AtomicMeasure(points={self.points.tolist()}, weights={self.weights.tolist()})"

    @property
    def support(self):
        return float(self.points[0]), float(self.points[-1])

    def masses(self, lo, hi, lo_closed=False, hi_closed=False, tol=DEFAULT_TOL):
        lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
        il = np.searchsorted(self.points, lo, side="left" if lo_closed else "right")
        iu = np.searchsorted(self.points, hi, side="right" if hi_closed else "left")
        iu = np.maximum(iu, il)
        if lo.ndim == 0:
            return np.asarray(math.fsum(self.weights[int(il):int(iu)]))
        return np.clip(self._cum[iu] - self._cum[il], 0.0, 1.0)

    def ball_masses(self, x, r, tol=DEFAULT_TOL):
        # compare distances, not the rounded endpoints x - r and x + r, so that
        # boundary ties agree with the coverage test used in simulations
        x, r = np.broadcast_arrays(np.asarray(x, float), np.asarray(r, float))
        inside = np.abs(x[..., None] - self.points) < r[..., None]
        if x.ndim == 0:
            return np.asarray(1.0 if inside.all() else math.fsum(self.weights[inside]))
        out = np.clip(inside @ self.weights, 0.0, 1.0)
        out[inside.all(axis=-1)] = 1.0
        return out

    def points_from_uniforms(self, u, depth):
        idx = np.searchsorted(self._cum, u[..., 0], side="right") - 1
        return self.points[np.clip(idx, 0, self.points.size - 1)]


class StepDensityMeasure(ProbabilityMeasure):
    """Density constant on each cell ``[b_j, b_{j+1})``."""

    def __init__(self, breakpoints, densities, torus: bool = False):
        b = np.asarray(breakpoints, dtype=float).ravel()
        d = np.asarray(densities, dtype=float).ravel()
        if b.size < 2 or not np.all(np.isfinite(b)) or np.any(np.diff(b) <= 0):
            raise InvalidArgument("breakpoints must be finite and strictly increasing (at least two)")
        if d.size != b.size - 1 or not np.all(np.isfinite(d)) or np.any(d < 0):
            raise InvalidArgument("need one non-negative finite density per cell")
        cell = d * np.diff(b)
        if abs(math.fsum(cell) - 1.0) > _MASS_TOL:
            raise InvalidArgument(f"step density must integrate to 1 within {_MASS_TOL}")
        if torus and (b[0] != 0.0 or b[-1] != 1.0):
            raise InvalidArgument("a torus-wrapped density must live on [0, 1]")
        self.breakpoints = b
        self.densities = d
        self.torus = bool(torus)
        self._cum = np.concatenate([[0.0], np.cumsum(cell)])
        self._cum[-1] = 1.0

    @classmethod
    def lebesgue(cls, torus: bool = False) -> StepDensityMeasure:
        return cls([0.0, 1.0], [1.0], torus=torus)

    def __repr__(self):
        return (f"StepDensityMeasure(breakpoints={self.breakpoints.tolist()}, "
                f"densities={self.densities.tolist()}, torus={self.torus})")

    @property
    def support(self):
        nz = np.nonzero(self.densities)[0]
        return float(self.breakpoints[nz[0]]), float(self.breakpoints[nz[-1] + 1])

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        b = self.breakpoints
        j = np.clip(np.searchsorted(b, x, side="right") - 1, 0, b.size - 2)
        val = self._cum[j] + self.densities[j] * (np.clip(x, b[0], b[-1]) - b[j])
        return np.clip(val, 0.0, 1.0)

    def masses(self, lo, hi, lo_closed=False, hi_closed=False, tol=DEFAULT_TOL):
        lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
        if not self.torus:
            return np.clip(self.cdf(hi) - self.cdf(lo), 0.0, 1.0)
        length = hi - lo
        start = np.mod(lo, 1.0)
        end = start + length
        inside = self.cdf(np.minimum(end, 1.0)) - self.cdf(start)
        wrapped = np.where(end > 1.0, self.cdf(np.clip(end - 1.0, 0.0, 1.0)), 0.0)
        out = np.where(length >= 1.0, 1.0, inside + wrapped)
        return np.clip(out, 0.0, 1.0)

    def points_from_uniforms(self, u, depth):
        u = u[..., 0]
        j = np.clip(np.searchsorted(self._cum, u, side="right") - 1, 0, self.densities.size - 1)
        dens = self.densities[j]
        safe = np.where(dens > 0, dens, 1.0)
        x = self.breakpoints[j] + (u - self._cum[j]) / safe
        return np.clip(x, self.breakpoints[j], self.breakpoints[j + 1])


class SelfSimilarMeasure(ProbabilityMeasure):
    """Bernoulli measure with weights ``p`` on the attractor of a separated affine IFS."""

    def __init__(self, ifs: SelfSimilarIFS, weights):
        p = _as_probability_vector(weights, "Bernoulli weights")
        if p.size != ifs.n_symbols:
            raise InvalidArgument(f"need {ifs.n_symbols} Bernoulli weights, got {p.size}")
        if np.any(p == 0):
            raise InvalidArgument("Bernoulli weights must be positive")
        self.ifs = ifs
        self.weights = p
        self._cum = np.concatenate([[0.0], np.cumsum(p)])
        self._cum[-1] = 1.0
        self._levels_per_uniform = max(1, int(_BITS_PER_UNIFORM / math.log2(1.0 / p.min()))) \
            if p.min() < 1.0 else 1

    def __repr__(self):
        return f"SelfSimilarMeasure({self.ifs!r}, weights={self.weights.tolist()})"

    @property
    def support(self):
        return self.ifs.hull

    def masses(self, lo, hi, lo_closed=False, hi_closed=False, tol=DEFAULT_TOL):
        lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
        out = _cylinder_interval_masses(self, lo.ravel(), hi.ravel(), tol)
        return out.reshape(lo.shape)

    def draws_per_point(self, depth):
        return -(-int(depth) // self._levels_per_uniform)

    def points_from_uniforms(self, u, depth):
        a, b = self.ifs.ratios, self.ifs.offsets
        shape = u.shape[:-1]
        flat = u.reshape(-1, u.shape[-1])
        A = np.ones(flat.shape[0])
        B = np.zeros(flat.shape[0])
        cur = None
        last = self.weights.size - 1
        for level in range(int(depth)):
            if level % self._levels_per_uniform == 0:
                cur = flat[:, level // self._levels_per_uniform].copy()
            i = np.clip(np.searchsorted(self._cum, cur, side="right") - 1, 0, last)
            cur = np.clip((cur - self._cum[i]) / self.weights[i], 0.0, np.nextafter(1.0, 0.0))
            B = B + A * b[i]
            A = A * a[i]
        return (A * self.ifs.anchor_seed + B).reshape(shape)


def _cylinder_interval_masses(mu: SelfSimilarMeasure, lo, hi, tol) -> np.ndarray:
    """Breadth-first cylinder descent shared by all queries of one call.

    A cylinder fully inside a query interval adds its mass, one disjoint from it
    adds nothing, and one straddling an endpoint is split unless its mass is at
    most tol/2, in which case half its mass is added. At most two straddling
    cylinders survive per level, so the error stays below tol/2.
    """
    a, b, p = mu.ifs.ratios, mu.ifs.offsets, mu.weights
    h0, h1 = mu.ifs.hull
    nq = lo.size
    acc = CompensatedArray(nq)
    qid = np.arange(nq)
    A = np.ones(nq)
    B = np.zeros(nq)
    m = np.ones(nq)
    cutoff = tol / 2.0
    while qid.size:
        e0 = A * h0 + B
        e1 = A * h1 + B
        cl = np.minimum(e0, e1)
        cr = np.maximum(e0, e1)
        ql = lo[qid]
        qh = hi[qid]
        outside = (cr <= ql) | (cl >= qh)
        inside = ~outside & (cl >= ql) & (cr <= qh)
        straddle = ~outside & ~inside
        small = straddle & (m <= cutoff)
        add = np.where(inside, m, 0.0) + np.where(small, 0.5 * m, 0.0)
        if np.any(add):
            acc.add_at(qid, add)
        keep = straddle & ~small
        if not np.any(keep):
            break
        qid, A, B, m = qid[keep], A[keep], B[keep], m[keep]
        qid = np.repeat(qid, a.size)
        B = (B[:, None] + A[:, None] * b[None, :]).ravel()
        A = (A[:, None] * a[None, :]).ravel()
        m = (m[:, None] * p[None, :]).ravel()
    return np.clip(acc.result(), 0.0, 1.0)


def _check_finite(**values):
    for name, v in values.items():
        if not np.all(np.isfinite(np.asarray(v, dtype=float))):
            raise InvalidArgument(f"{name} must be finite")


def _check_tol(tol):
    if not (tol > 0 and math.isfinite(tol)):
        raise InvalidArgument(f"tol must be a positive finite number, got {tol!r}")


def ball_measure(mu: ProbabilityMeasure, x: float, r: float, tol: float = DEFAULT_TOL) -> float:
    """Mass of the open ball B(x, r)."""
    _check_finite(x=x, r=r)
    if r <= 0:
        raise InvalidArgument(f"radius must be positive, got {r!r}")
    _check_tol(tol)
    return float(mu.ball_masses(x, r, tol))


def ball_measures(mu: ProbabilityMeasure, x, r, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Vectorized :func:`ball_measure`; ``x`` and ``r`` broadcast."""
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    _check_finite(x=x, r=r)
    if np.any(r <= 0):
        raise InvalidArgument("radii must be positive")
    _check_tol(tol)
    return mu.ball_masses(x, r, tol)


def interval_measure(mu: ProbabilityMeasure, iv: Interval, tol: float = DEFAULT_TOL) -> float:
    _check_finite(lo=iv.lo, hi=iv.hi)
    _check_tol(tol)
    return float(mu.masses(iv.lo, iv.hi, iv.lo_closed, iv.hi_closed, tol))


def sample_point(mu: ProbabilityMeasure, stream: np.random.Generator, depth: int = 40) -> float:
    """One mu-distributed point drawn from ``stream``."""
    u = stream.random(mu.draws_per_point(depth))
    return float(mu.points_from_uniforms(u[None, :], depth)[0])


def sample_points(mu: ProbabilityMeasure, stream: np.random.Generator, size: int,
                  depth: int = 40) -> np.ndarray:
    """``size`` consecutive draws; identical to calling :func:`sample_point` ``size`` times."""
    d = mu.draws_per_point(depth)
    u = stream.random(size * d).reshape(size, d)
    return mu.points_from_uniforms(u, depth)


class RadiusSequence:
    length: int | None = None

    def at(self, n: int) -> float:
        raise NotImplementedError

    def first(self, k: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class PolynomialRadii(RadiusSequence):
    """r_n = c * n**(-t)."""

    c: float
    t: float

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise InvalidArgument(f"radius scale c must be positive, got {self.c!r}")
        if not (self.t > 0 and math.isfinite(self.t)):
            raise InvalidArgument(f"radius exponent t must be positive, got {self.t!r}")

    def at(self, n: int) -> float:
        return float(self.c * np.float64(n) ** -self.t)

    def first(self, k: int) -> np.ndarray:
        return self.c * np.arange(1, int(k) + 1, dtype=float) ** -self.t

    def first_index_below(self, bound: float) -> int:
        """Smallest n with r_n < bound, solved in closed form.

        ``(c/bound)**(1/t)`` within 1e-9 (relative) of an integer is snapped to it,
        so exact ties such as n**(-1/s) = 3**(-k) are resolved as equalities.
        """
        if bound <= 0:
            raise InvalidArgument("bound must be positive")
        x = (self.c / bound) ** (1.0 / self.t)
        if x < 1.0:
            return 1
        nearest = round(x)
        if abs(x - nearest) <= 1e-9 * x:
            x = float(nearest)
        return int(math.floor(x)) + 1


@dataclass(frozen=True)
class ExplicitRadii(RadiusSequence):
    values: tuple[float, ...]

    def __init__(self, values):
        vals = tuple(float(v) for v in values)
        if not vals:
            raise InvalidArgument("explicit radius list must be non-empty")
        if any(not (v > 0 and math.isfinite(v)) for v in vals):
            raise InvalidArgument("explicit radii must be positive and finite")
        if any(b > a for a, b in zip(vals, vals[1:])):
            raise InvalidArgument("explicit radii must be non-increasing")
        object.__setattr__(self, "values", vals)

    @property
    def length(self) -> int:
        return len(self.values)

    def at(self, n: int) -> float:
        if n < 1:
            raise InvalidArgument("radius index starts at 1")
        if n > len(self.values):
            raise OutOfRange(f"radius index {n} past explicit list of length {len(self.values)}")
        return self.values[n - 1]

    def first(self, k: int) -> np.ndarray:
        if k > len(self.values):
            raise OutOfRange(f"requested {k} radii from an explicit list of length {len(self.values)}")
        return np.asarray(self.values[:k], dtype=float)


def radius_at(seq: RadiusSequence, n: int) -> float:
    if n < 1:
        raise InvalidArgument("radius index starts at 1")
    return seq.at(n)
