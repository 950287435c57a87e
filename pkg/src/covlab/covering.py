"""Random covering realizations, survival probabilities and exact oracles.

Centres ``w_1, w_2, ...`` are i.i.d. with law ``mu``; ball ``n`` has radius
``r_n``. ``U_k`` is the union of the first k open balls and ``F_k`` its
complement. Trial ``j`` of master seed ``seed`` draws all of its centres,
in index order, from the counter-based stream ``(seed, j)``, so the first k
centres of a trial do not depend on how many more are drawn afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, DegenerateDenominator, InvalidArgument
from .measures import (
    DEFAULT_TOL,
    AtomicMeasure,
    ExplicitRadii,
    ProbabilityMeasure,
    RadiusSequence,
    ball_measures,
)
from .streams import check_seed, stream

ENUMERATION_BUDGET = 10 ** 7
_CHUNK = 1 << 18


@dataclass(frozen=True, eq=False)
class Realization:
    seed: int
    k: int
    centers: np.ndarray
    radii: np.ndarray
    trial: int = 0
    torus: bool = False

    def __eq__(self, other):
        return (isinstance(other, Realization) and self.seed == other.seed and self.k == other.k
                and self.trial == other.trial and np.array_equal(self.centers, other.centers)
                and np.array_equal(self.radii, other.radii))

    def __hash__(self):
        return hash((self.seed, self.k, self.trial, self.centers.tobytes()))

    def prefix(self, k: int) -> Realization:
        return Realization(self.seed, k, self.centers[:k], self.radii[:k], self.trial, self.torus)

    def _distance(self, x, centers):
        d = np.abs(np.asarray(x, dtype=float)[..., None] - centers)
        if self.torus:
            d = np.mod(d, 1.0)
            d = np.minimum(d, 1.0 - d)
        return d

    def covered(self, points) -> np.ndarray:
        """Boolean mask of points lying in some open ball (boundary points are not covered)."""
        pts = np.asarray(points, dtype=float)
        if self.k == 0:
            return np.zeros(pts.shape, dtype=bool)
        return np.any(self._distance(pts, self.centers) < self.radii, axis=-1)


def sample_centers(mu: ProbabilityMeasure, k: int, seed: int, trials=range(1), depth: int = 40
                   ) -> np.ndarray:
    """Centres of shape ``(len(trials), k)``, row j from stream ``(seed, trials[j])``."""
    seed = check_seed(seed)
    d = mu.draws_per_point(depth)
    u = np.empty((len(trials), k, d))
    for row, trial in enumerate(trials):
        u[row] = stream(seed, trial).random(k * d).reshape(k, d)
    return mu.points_from_uniforms(u, depth)


def simulate_realization(mu: ProbabilityMeasure, seq: RadiusSequence, k: int, seed: int,
                         trial: int = 0, depth: int = 40) -> Realization:
    if k < 0:
        raise InvalidArgument("ball count k must be non-negative")
    centers = sample_centers(mu, k, seed, range(trial, trial + 1), depth)[0] if k else np.zeros(0)
    radii = seq.first(k) if k else np.zeros(0)
    return Realization(check_seed(seed), k, centers, radii, trial, mu.torus)


def uncovered_fraction(real: Realization, grid) -> float:
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise InvalidArgument("grid must be non-empty")
    return float(np.mean(~real.covered(grid)))


def _check_k(k):
    if k < 0:
        raise InvalidArgument("ball count k must be non-negative")


def survival_probability(mu: ProbabilityMeasure, seq: RadiusSequence, x: float, k: int,
                         tol: float = DEFAULT_TOL) -> float:
    """``P(x in F_k) = prod_{n<=k} (1 - mu(B(x, r_n)))``."""
    _check_k(k)
    if k == 0:
        return 1.0
    m = ball_measures(mu, x, seq.first(k), tol)
    factors = 1.0 - m
    if np.any(factors <= 0):
        return 0.0
    if k <= 64:
        return float(math.prod(factors.tolist()))
    return math.exp(math.fsum(np.log(factors)))


@dataclass(frozen=True)
class SurvivalReport:
    analytic: float
    empirical: float
    trials: int
    seed: int
    k: int
    x: float

    @property
    def stderr(self) -> float:
        f = self.empirical
        return math.sqrt(f * (1.0 - f) / self.trials)

    @property
    def z_score(self) -> float:
        """Deviation in units of the binomial standard error at the analytic value."""
        p = self.analytic
        se = math.sqrt(p * (1.0 - p) / self.trials)
        if se == 0.0:
            return 0.0 if self.empirical == p else math.inf
        return (self.empirical - p) / se


def _trial_batches(trials: int, batch: int = 4096):
    for start in range(0, trials, batch):
        yield range(start, min(trials, start + batch))


def empirical_survival(mu: ProbabilityMeasure, seq: RadiusSequence, x: float, k: int,
                       trials: int, seed: int, depth: int = 40) -> SurvivalReport:
    if trials < 100:
        raise InvalidArgument("need at least 100 trials")
    _check_k(k)
    radii = seq.first(k)
    survived = 0
    for batch in _trial_batches(trials):
        centers = sample_centers(mu, k, seed, batch, depth)
        hit = mu.distance(x, centers) < radii
        survived += int(np.count_nonzero(~np.any(hit, axis=1)))
    return SurvivalReport(survival_probability(mu, seq, x, k), survived / trials, trials,
                          seed, k, float(x))


def _atom_factors(nu: AtomicMeasure, mu: ProbabilityMeasure, radii: np.ndarray, tol: float):
    """Per-atom reciprocal survival ``prod 1/(1 - mu(B(x, r_n)))`` in log form."""
    masses = ball_measures(mu, nu.points[:, None], radii[None, :], tol)
    if np.any(masses >= 1.0):
        bad = np.argwhere(masses >= 1.0)[0]
        raise DegenerateDenominator(
            f"mu(B(x, r_n)) = 1 at atom x={nu.points[bad[0]]!r}, n={bad[1] + 1}")
    return -np.log1p(-masses).sum(axis=1)


def martingale_values(nu: AtomicMeasure, mu: ProbabilityMeasure, radii: np.ndarray,
                      centers: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """``M_{k,nu}`` for each row of ``centers`` (shape ``(trials, k)``)."""
    log_recip = _atom_factors(nu, mu, radii, tol)
    weights = nu.weights * np.exp(log_recip)
    out = np.zeros(centers.shape[0])
    for j, x in enumerate(nu.points):
        alive = ~np.any(mu.distance(x, centers) < radii, axis=1)
        out += np.where(alive, weights[j], 0.0)
    return out


def martingale_value(nu: AtomicMeasure, mu: ProbabilityMeasure, seq: RadiusSequence,
                     real: Realization, tol: float = DEFAULT_TOL) -> float:
    if not isinstance(nu, AtomicMeasure):
        raise InvalidArgument("nu must be atomic")
    radii = seq.first(real.k) if real.k else np.zeros(0)
    return float(martingale_values(nu, mu, radii, real.centers[None, :], tol)[0])


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    mean_stderr: float
    second: float
    second_stderr: float
    trials: int


def martingale_moments(nu: AtomicMeasure, mu: ProbabilityMeasure, seq: RadiusSequence, k: int,
                       trials: int, seed: int, depth: int = 40) -> MomentEstimate:
    """Monte Carlo first and second moments of ``M_{k,nu}``."""
    radii = seq.first(k)
    vals = np.concatenate([martingale_values(nu, mu, radii, sample_centers(mu, k, seed, b, depth))
                           for b in _trial_batches(trials)])
    sq = vals * vals
    return MomentEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(trials)),
                          float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(trials)), trials)


# --- exact enumeration ------------------------------------------------------


def enumerate_tuples(mu: AtomicMeasure, k: int, budget: int = ENUMERATION_BUDGET):
    """Yield ``(indices, weights)`` chunks covering all ``m**k`` centre tuples."""
    m = mu.points.size
    total = m ** k
    if total > budget:
        raise BudgetExceeded(f"{m}**{k} = {total} tuples exceed the budget {budget}")
    powers = m ** np.arange(k - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, _CHUNK):
        code = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        idx = (code[:, None] // powers[None, :]) % m
        yield idx, np.prod(mu.weights[idx], axis=1)


def survival_probability_enumerated(mu: AtomicMeasure, seq: RadiusSequence, x: float, k: int,
                                    budget: int = ENUMERATION_BUDGET) -> float:
    """``P(x in F_k)`` by summing tuple weights; independent of the product formula."""
    radii = seq.first(k)
    cov = mu.distance(x, mu.points)[None, :] < radii[:, None]
    parts = []
    for idx, w in enumerate_tuples(mu, k, budget):
        hit = np.any(cov[np.arange(k), idx], axis=1)
        parts.append(math.fsum(w[~hit]))
    return math.fsum(parts)


@dataclass(frozen=True)
class CruxResult:
    lhs_i: float
    rhs_i: float
    lhs_ii: float
    rhs_ii: float
    defined_i: bool
    defined_ii: bool

    @property
    def slack_i(self) -> float:
        return self.lhs_i - self.rhs_i

    @property
    def slack_ii(self) -> float:
        return self.lhs_ii - self.rhs_ii


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else math.nan


def crux_check_exact(mu: AtomicMeasure, seq: ExplicitRadii, k: int, A, x: float, y: float,
                     A_right=None, budget: int = ENUMERATION_BUDGET) -> CruxResult:
    """Both conditional-probability inequalities by full enumeration.

    Part i: ``P(y in F | A in U, x in F)`` against ``P(y in F | x in F)`` for
    ``A`` left of ``x``. Part ii swaps the roles of ``x`` and ``y`` with a set
    right of ``y``: ``A_right`` if given, else the mirror image of ``A`` about
    ``(x + y)/2``. Undefined conditionals (zero-probability events) are NaN
    and flagged.
    """
    if not isinstance(mu, AtomicMeasure):
        raise InvalidArgument("crux check needs an atomic measure")
    if not x < y:
        raise InvalidArgument("need x < y")
    A = np.asarray(sorted(A), dtype=float)
    if np.any(A >= x):
        raise InvalidArgument("every point of A must lie left of x")
    A2 = np.asarray(sorted(A_right), dtype=float) if A_right is not None else np.sort(x + y - A)
    if np.any(A2 <= y):
        raise InvalidArgument("every point of A_right must lie right of y")
    radii = seq.first(k)
    kk = np.arange(k)

    def cover_table(pt):
        return mu.distance(pt, mu.points)[None, :] < radii[:, None]

    cx, cy = cover_table(x), cover_table(y)
    cA = [cover_table(a) for a in A]
    cA2 = [cover_table(a) for a in A2]
    keys = ("x", "xy", "Ax", "Axy", "y", "A2y", "A2xy")
    acc = {key: [] for key in keys}
    for idx, w in enumerate_tuples(mu, k, budget):
        fx = ~np.any(cx[kk, idx], axis=1)
        fy = ~np.any(cy[kk, idx], axis=1)
        inA = np.ones(idx.shape[0], dtype=bool)
        for c in cA:
            inA &= np.any(c[kk, idx], axis=1)
        inA2 = np.ones(idx.shape[0], dtype=bool)
        for c in cA2:
            inA2 &= np.any(c[kk, idx], axis=1)
        for key, mask in (("x", fx), ("xy", fx & fy), ("Ax", inA & fx), ("Axy", inA & fx & fy),
                          ("y", fy), ("A2y", inA2 & fy), ("A2xy", inA2 & fx & fy)):
            acc[key].append(math.fsum(w[mask]))
    P = {key: math.fsum(v) for key, v in acc.items()}
    lhs_i, rhs_i = _ratio(P["Axy"], P["Ax"]), _ratio(P["xy"], P["x"])
    lhs_ii, rhs_ii = _ratio(P["A2xy"], P["A2y"]), _ratio(P["xy"], P["y"])
    return CruxResult(lhs_i, rhs_i, lhs_ii, rhs_ii,
                      not (math.isnan(lhs_i) or math.isnan(rhs_i)),
                      not (math.isnan(lhs_ii) or math.isnan(rhs_ii)))
