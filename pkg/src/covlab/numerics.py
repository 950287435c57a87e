"""Small numerical helpers: compensated accumulation and directed decimal rounding."""

from __future__ import annotations

from decimal import ROUND_CEILING, ROUND_FLOOR, Decimal

import numpy as np


class CompensatedArray:
    """Elementwise Neumaier accumulator over a fixed-length float array."""

    __slots__ = ("total", "_comp")

    def __init__(self, size: int):
        self.total = np.zeros(size)
        self._comp = np.zeros(size)

    def add(self, values: np.ndarray) -> None:
        t = self.total + values
        big = np.abs(self.total) >= np.abs(values)
        self._comp += np.where(big, (self.total - t) + values, (values - t) + self.total)
        self.total = t

    def add_at(self, index: np.ndarray, values: np.ndarray) -> None:
        """Add ``values`` into slots ``index`` (repeated indices are summed first)."""
        self.add(np.bincount(index, weights=values, minlength=self.total.size))

    def result(self) -> np.ndarray:
        return self.total + self._comp


def floor_decimals(value: float, places: int = 5) -> float:
    """Round ``value`` toward -inf at ``places`` decimals, using its exact binary value."""
    q = Decimal(1).scaleb(-places)
    return float(Decimal(value).quantize(q, rounding=ROUND_FLOOR))


def ceil_decimals(value: float, places: int = 5) -> float:
    """Round ``value`` toward +inf at ``places`` decimals."""
    q = Decimal(1).scaleb(-places)
    return float(Decimal(value).quantize(q, rounding=ROUND_CEILING))
