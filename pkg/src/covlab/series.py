"""Checkpointed partial sums of non-negative series and a trend classifier.

No infinite series is decided here. A probe records partial sums at
checkpoints and fits how the tail behaves:

* ``power`` model: block increments between checkpoints are regressed on
  ``log n``; for terms of size ``n**e`` the slope is ``e + 1``.
* ``geometric`` model: ``log(term_k)`` is regressed on ``k``; the slope is the
  per-step growth rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CONVERGING = "converging"
DIVERGING = "diverging"
INCONCLUSIVE = "inconclusive"

# Power model: exponents at or above -1 - TIE count as harmonic-or-slower decay.
POWER_TIE = 0.01
POWER_MARGIN = 0.05
GEOMETRIC_MARGIN = 0.005
# Blocks starting before this index are ignored by the power fit.
FIT_START = 32


@dataclass(frozen=True)
class SeriesProbe:
    checkpoints: tuple[int, ...]
    partial_sums: tuple[float, ...]
    exponent: float
    classification: str
    model: str = "power"
    notes: tuple[str, ...] = field(default=())

    @property
    def final_sum(self) -> float:
        return self.partial_sums[-1]

    def rows(self):
        for n, s in zip(self.checkpoints, self.partial_sums):
            yield n, s


def dyadic_checkpoints(n_max: int, start: int = 1) -> list[int]:
    """Powers of two in ``[start, n_max]`` followed by ``n_max`` itself."""
    pts = [1 << j for j in range(int(n_max).bit_length()) if start <= (1 << j) <= n_max]
    if not pts or pts[-1] != n_max:
        pts.append(int(n_max))
    return pts


def _fit_slope(x: np.ndarray, y: np.ndarray) -> float:
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def classify_power(checkpoints, partial_sums, margin: float = POWER_MARGIN,
                   tie: float = POWER_TIE) -> tuple[float, str, tuple[str, ...]]:
    """Fit the term exponent from dyadic block increments; pure in its inputs."""
    n = np.asarray(checkpoints, dtype=float)
    s = np.asarray(partial_sums, dtype=float)
    if np.isinf(s[-1]):
        return math.inf, DIVERGING, ("partial sums overflowed",)
    inc = np.diff(s)
    left, right = n[:-1], n[1:]
    # only full doubling blocks in the tail, so block-shape constants cancel
    use = (left >= FIT_START) & (right == 2 * left)
    if use.sum() < 3:
        return math.nan, INCONCLUSIVE, ("fewer than three tail blocks",)
    inc, left, right = inc[use], left[use], right[use]
    if np.all(inc <= 0):
        return -math.inf, CONVERGING, ("tail increments vanish",)
    if np.any(inc <= 0):
        return math.nan, INCONCLUSIVE, ("some tail increments vanish",)
    # Normalize by block width so the slope matches index exponents exactly.
    y = np.log(inc) - np.log(right - left)
    e = _fit_slope(np.log(np.sqrt(left * right)), y)
    if e >= -1.0 - tie:
        return e, DIVERGING, ()
    if e <= -1.0 - margin:
        return e, CONVERGING, ()
    return e, INCONCLUSIVE, (f"exponent within margin {margin} of -1",)


def classify_geometric(log_terms, margin: float = GEOMETRIC_MARGIN, skip: int | None = None
                       ) -> tuple[float, str, tuple[str, ...]]:
    """Fit ``log(term_k) = a + rate*k`` over the tail (after ``skip`` terms)."""
    lt = np.asarray(log_terms, dtype=float)
    if skip is None:
        skip = lt.size // 4
    k = np.arange(1, lt.size + 1, dtype=float)[skip:]
    lt = lt[skip:]
    if lt.size < 3:
        return math.nan, INCONCLUSIVE, ("fewer than three tail terms",)
    if np.any(lt == math.inf):
        return math.inf, DIVERGING, ("terms overflowed",)
    if np.any(~np.isfinite(lt)):
        return math.nan, INCONCLUSIVE, ("vanishing or undefined terms",)
    rate = _fit_slope(k, lt)
    if rate >= margin:
        return rate, DIVERGING, ()
    if rate <= -margin:
        return rate, CONVERGING, ()
    return rate, INCONCLUSIVE, (f"rate within margin {margin} of 0",)


def probe_power(terms, first_index: int = 1, checkpoints=None,
                margin: float = POWER_MARGIN) -> SeriesProbe:
    """Probe for terms ``a_n``, ``n = first_index, first_index + 1, ...``."""
    terms = np.asarray(terms, dtype=float)
    last = first_index + terms.size - 1
    if checkpoints is None:
        checkpoints = dyadic_checkpoints(last, first_index)
    cps = [int(c) for c in checkpoints if first_index <= c <= last]
    sums = partial_sums_at(terms, first_index, cps)
    e, cls, notes = classify_power(cps, sums, margin)
    return SeriesProbe(tuple(cps), tuple(sums), e, cls, "power", notes)


def probe_geometric(log_terms, margin: float = GEOMETRIC_MARGIN) -> SeriesProbe:
    """Probe for terms given by their logarithms (they may underflow otherwise)."""
    log_terms = np.asarray(log_terms, dtype=float)
    with np.errstate(over="ignore"):
        terms = np.exp(log_terms)
    cps = list(range(1, terms.size + 1))
    sums = partial_sums_at(terms, 1, cps)
    rate, cls, notes = classify_geometric(log_terms, margin)
    return SeriesProbe(tuple(cps), tuple(sums), rate, cls, "geometric", notes)


def partial_sums_at(terms: np.ndarray, first_index: int, checkpoints) -> list[float]:
    """Compensated partial sums of ``terms`` up to each checkpoint index."""
    out = []
    total = 0.0
    prev = 0
    for c in checkpoints:
        hi = c - first_index + 1
        chunk = terms[prev:hi]
        total = math.fsum((total, math.fsum(chunk))) if np.all(np.isfinite(chunk)) else math.inf
        out.append(total)
        prev = hi
    return out
