"""Correlation ratios, second moments, truncated energies and series probes.

Notation: ``m_x = mu(B(x, r_n))`` and ``m_xy = mu(B(x, r_n) ∩ B(y, r_n))``.
The joint-survival ratio is

    p_k(x, y) = prod_{n<=k} (1 - m_x - m_y + m_xy) / ((1 - m_x)(1 - m_y)),

and each factor equals ``1 + (m_xy - m_x m_y) / ((1 - m_x)(1 - m_y))``.
That form is what gets evaluated, so small masses keep full precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covering import ENUMERATION_BUDGET, _atom_factors, enumerate_tuples
from .errors import DegenerateDenominator, InvalidArgument
from .measures import (
    DEFAULT_TOL,
    AtomicMeasure,
    ExplicitRadii,
    ProbabilityMeasure,
    RadiusSequence,
    ball_measures,
)
from .numerics import CompensatedArray
from .series import SeriesProbe, dyadic_checkpoints, probe_power

LOG_OVERFLOW = 700.0
LOG_SPACE_ABOVE = 64


def intersection_masses(mu: ProbabilityMeasure, x, y, r, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Vectorized ``mu(B(x, r) ∩ B(y, r))``; disjoint pairs give exactly 0."""
    x, y, r = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, r)))
    x, y = np.minimum(x, y), np.maximum(x, y)  # exact symmetry
    if np.any(r <= 0):
        raise InvalidArgument("radii must be positive")
    out = np.zeros(x.shape)
    d = mu.distance(x, y)
    live = d < 2.0 * r
    if not np.any(live):
        return out
    xl, yl, rl = x[live], y[live], r[live]
    if isinstance(mu, AtomicMeasure):
        inside = ((np.abs(xl[:, None] - mu.points) < rl[:, None])
                  & (np.abs(yl[:, None] - mu.points) < rl[:, None]))
        out[live] = np.clip(inside @ mu.weights, 0.0, 1.0)
        return out
    if not mu.torus:
        out[live] = mu.masses(np.maximum(xl, yl) - rl, np.minimum(xl, yl) + rl, tol=tol)
        return out
    # On the circle, place y at its nearest lift and intersect with its neighbours too:
    # two arcs of length 2r < 1 can overlap in two pieces.
    shift = yl - xl
    shift -= np.round(shift)
    vals = np.zeros(xl.shape)
    for j in (-1.0, 0.0, 1.0):
        lo = np.maximum(xl - rl, xl + shift + j - rl)
        hi = np.minimum(xl + rl, xl + shift + j + rl)
        ok = hi > lo
        if np.any(ok):
            vals[ok] += mu.masses(lo[ok], hi[ok], tol=tol)
    out[live] = np.where(rl >= 0.5, 1.0, np.minimum(vals, 1.0))
    return out


def intersection_mass(mu: ProbabilityMeasure, x: float, y: float, r: float,
                      tol: float = DEFAULT_TOL) -> float:
    return float(intersection_masses(mu, x, y, r, tol))


def _log_pk_factors(mx, my, mxy):
    if np.any(mx >= 1.0) or np.any(my >= 1.0):
        raise DegenerateDenominator("a ball has full mass, so the correlation ratio is undefined")
    excess = (mxy - mx * my) / ((1.0 - mx) * (1.0 - my))
    with np.errstate(divide="ignore"):
        return np.log1p(np.maximum(excess, -1.0))


def _pair_masses(mu, seq, x, y, k, tol):
    radii = seq.first(k)
    return (ball_measures(mu, x, radii, tol), ball_measures(mu, y, radii, tol),
            intersection_masses(mu, x, y, radii, tol))


def pk_value(mu: ProbabilityMeasure, seq: RadiusSequence, x: float, y: float, k: int,
             tol: float = DEFAULT_TOL) -> float:
    """Joint-survival correlation ratio ``P(x, y in F_k) / (P(x in F_k) P(y in F_k))``."""
    if k < 0:
        raise InvalidArgument("k must be non-negative")
    if k == 0:
        return 1.0
    mx, my, mxy = _pair_masses(mu, seq, x, y, k, tol)
    logs = _log_pk_factors(mx, my, mxy)
    if k > LOG_SPACE_ABOVE:
        total = math.fsum(logs)
        return math.exp(total) if total < LOG_OVERFLOW else math.inf
    return float(math.prod(np.exp(logs).tolist()))


def moment_exp_ratio(mu: ProbabilityMeasure, seq: RadiusSequence, x: float, y: float, k: int,
                     tol: float = DEFAULT_TOL) -> float:
    """``p_k(x, y) / exp(sum_{n<=k} m_xy)``, formed as a difference of logs."""
    if k == 0:
        return 1.0
    mx, my, mxy = _pair_masses(mu, seq, x, y, k, tol)
    return math.exp(math.fsum(_log_pk_factors(mx, my, mxy)) - math.fsum(mxy))


def _check_atomic(nu):
    if not isinstance(nu, AtomicMeasure):
        raise InvalidArgument("nu must be atomic (use a cylinder or step discretization)")


def jk_sequence(nu: AtomicMeasure, mu: ProbabilityMeasure, seq: RadiusSequence, k: int,
                tol: float = DEFAULT_TOL) -> np.ndarray:
    """``J_1, ..., J_k``: the nu x nu integrals of ``p_j`` for every ``j <= k``."""
    _check_atomic(nu)
    if k < 1:
        return np.zeros(0)
    radii = seq.first(k)
    pts, w = nu.points, nu.weights
    # same-x masses are shared across rows
    m_all = ball_measures(mu, pts[:, None], radii[None, :], tol)
    out = np.zeros((pts.size, k))
    for i, x in enumerate(pts):
        mxy = intersection_masses(mu, x, pts[:, None], radii[None, :], tol)
        logs = np.cumsum(_log_pk_factors(m_all[i][None, :], m_all, mxy), axis=1)
        with np.errstate(over="ignore"):
            out[i] = w[i] * (w[:, None] * np.exp(logs)).sum(axis=0)
    return np.array([math.fsum(out[:, j]) for j in range(k)])


def jk_second_moment(nu: AtomicMeasure, mu: ProbabilityMeasure, seq: RadiusSequence, k: int,
                     tol: float = DEFAULT_TOL) -> float:
    """``J_k(nu) = E(M_{k,nu}^2)``; equals 1 for ``k = 0``."""
    if k < 0:
        raise InvalidArgument("k must be non-negative")
    if k == 0:
        return 1.0
    return float(jk_sequence(nu, mu, seq, k, tol)[-1])


def jk_enumerate_oracle(nu: AtomicMeasure, mu: AtomicMeasure, seq: ExplicitRadii, k: int,
                        budget: int = ENUMERATION_BUDGET, tol: float = DEFAULT_TOL) -> float:
    """``E(M_{k,nu}^2)`` summed over every centre tuple; shares no code with ``p_k``."""
    _check_atomic(nu)
    _check_atomic(mu)
    if k > 10:
        raise InvalidArgument("enumeration oracle supports k <= 10")
    radii = seq.first(k)
    weights = nu.weights * np.exp(_atom_factors(nu, mu, radii, tol))
    # hit[n, c, a]: ball n centred at atom c of mu covers atom a of nu
    hit = mu.distance(mu.points[:, None], nu.points[None, :])[None] < radii[:, None, None]
    parts = []
    for idx, p in enumerate_tuples(mu, k, budget):
        covered = np.zeros((idx.shape[0], nu.points.size), dtype=bool)
        for n in range(k):
            covered |= hit[n, idx[:, n]]
        m = np.where(covered, 0.0, weights).sum(axis=1)
        parts.append(math.fsum(p * m * m))
    return math.fsum(parts)


@dataclass(frozen=True)
class EnergyResult:
    """Truncated energy with per-atom diagonal sums for judging truncation.

    ``diagonal_sums[i, j]`` is ``sum_{n <= checkpoints[j]} mu(B(x_i, r_n))``.
    A last block increment that does not shrink signals a diverging diagonal.
    """

    value: float
    N: int
    checkpoints: tuple[int, ...]
    diagonal_sums: np.ndarray
    overflow: bool

    @property
    def capacity_lower_bound(self) -> float:
        return 0.0 if self.overflow else 1.0 / self.value

    @property
    def last_block_increment(self) -> np.ndarray:
        if len(self.checkpoints) < 2:
            return self.diagonal_sums[:, -1]
        return self.diagonal_sums[:, -1] - self.diagonal_sums[:, -2]


def energy_truncated(nu: AtomicMeasure, mu: ProbabilityMeasure, seq: RadiusSequence, N: int,
                     tol: float = DEFAULT_TOL) -> EnergyResult:
    """``sum_x sum_y nu(x) nu(y) exp(sum_{n<=N} m_xy)``.

    For each pair only the indices with ``2 r_n`` beyond the pair distance can
    contribute, so with non-increasing radii the work is the sum of those counts
    rather than ``N`` per pair.
    """
    _check_atomic(nu)
    if N < 1:
        raise InvalidArgument("N must be at least 1")
    radii = seq.first(N)
    if np.any(np.diff(radii) > 0):
        raise InvalidArgument("energy_truncated needs non-increasing radii")
    pts, w = nu.points, nu.weights
    neg_diam = -2.0 * radii
    row_values = np.zeros(pts.size)
    overflow = False
    for i, x in enumerate(pts):
        d = mu.distance(x, pts)
        counts = np.searchsorted(neg_diam, -d, side="left")
        total = int(counts.sum())
        if total == 0:
            continue
        pair = np.repeat(np.arange(pts.size), counts)
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        n_idx = np.arange(total) - starts
        masses = intersection_masses(mu, x, pts[pair], radii[n_idx], tol)
        acc = CompensatedArray(pts.size)
        acc.add_at(pair, masses)
        sums = acc.result()
        if np.any(sums > LOG_OVERFLOW):
            overflow = True
            break
        row_values[i] = w[i] * math.fsum(w * np.exp(sums))
    cps = dyadic_checkpoints(N)
    diag = np.cumsum(ball_measures(mu, pts[:, None], radii[None, :], tol), axis=1)
    diag = diag[:, np.asarray(cps) - 1]
    value = math.inf if overflow else math.fsum(row_values)
    return EnergyResult(value, N, tuple(cps), diag, overflow)


def ball_mass_power_series(mu: ProbabilityMeasure, seq: RadiusSequence, x: float, power: float,
                           scale: float = 1.0, N: int = 10 ** 5, tol: float = DEFAULT_TOL
                           ) -> SeriesProbe:
    """Probe ``sum_n mu(B(x, scale r_n))**power``."""
    if N < 10:
        raise InvalidArgument("N must be at least 10")
    if power < 1:
        raise InvalidArgument("power must be at least 1")
    if not 0 < scale <= 1:
        raise InvalidArgument("scale must lie in (0, 1]")
    terms = ball_measures(mu, x, scale * seq.first(N), tol) ** power
    return probe_power(terms)


def shepp_log_terms(seq: RadiusSequence, N: int) -> np.ndarray:
    n = np.arange(1, N + 1, dtype=float)
    return 2.0 * np.cumsum(seq.first(N)) - 2.0 * np.log(n)


def shepp_series(seq: RadiusSequence, N: int = 10 ** 5) -> SeriesProbe:
    """Probe ``sum_n n**-2 exp(2 sum_{k<=n} r_k)``; huge terms become ``inf``."""
    if N < 10:
        raise InvalidArgument("N must be at least 10")
    lt = shepp_log_terms(seq, N)
    terms = np.where(lt > LOG_OVERFLOW, math.inf, np.exp(np.minimum(lt, LOG_OVERFLOW)))
    return probe_power(terms)
