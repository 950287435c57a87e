"""Counter-based random streams.

Every stream is a Philox generator whose key is the master seed and whose
starting counter encodes ``(trial, index)``. A stream is therefore a pure
function of those integers: it does not matter in which order, or on which
worker, streams are created.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgument

_MASK64 = (1 << 64) - 1


def check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise InvalidArgument(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= _MASK64:
        raise InvalidArgument(f"seed must fit in 64 unsigned bits, got {seed}")
    return seed


def stream(seed: int, trial: int = 0, index: int = 0) -> np.random.Generator:
    """Generator for the ``(trial, index)`` block of master ``seed``.

    The two high counter words hold ``trial`` and ``index``; the two low words
    are left for the generator to advance, so each block has 2**128 draws.
    """
    seed = check_seed(seed)
    if trial < 0 or index < 0 or trial > _MASK64 or index > _MASK64:
        raise InvalidArgument("trial and index must be 64-bit non-negative integers")
    counter = (int(trial) << 192) | (int(index) << 128)
    return np.random.Generator(np.random.Philox(key=seed, counter=counter))


def trial_uniforms(seed: int, trials: range, count: int, index: int = 0) -> np.ndarray:
    """Array of shape ``(len(trials), count)``; row ``j`` is the first ``count``
    uniforms of stream ``(seed, trials[j], index)``."""
    out = np.empty((len(trials), count))
    for row, trial in enumerate(trials):
        out[row] = stream(seed, trial, index).random(count)
    return out
