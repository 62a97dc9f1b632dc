"""Small statistical helpers shared across modules."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc

_SQRT2 = math.sqrt(2.0)


def q_function(x):
    """Gaussian tail probability Q(x) = 0.5 * erfc(x / sqrt(2)).

    Accepts scalars or arrays; accurate to better than 1e-12 relative on
    [0, 8].
    """
    return 0.5 * erfc(np.asarray(x, dtype=float) / _SQRT2) if np.ndim(x) \
        else 0.5 * float(erfc(x / _SQRT2))


def binomial_ci_halfwidth(errors: int, trials: int,
                          z: float = 1.959963984540054) -> float:
    """95% half-width for an error-rate estimate.

    Wald interval with a continuity guard; switches to the Wilson interval
    half-width when fewer than 30 events were observed (stable at
    rare-event tails).
    """
    if trials <= 0:
        return 0.0
    p = errors / trials
    if errors >= 30 and trials - errors >= 30:
        return z * math.sqrt(max(p * (1.0 - p), 1.0 / trials ** 2) / trials)
    # Wilson interval half-width
    denom = 1.0 + z ** 2 / trials
    halfwidth = (z / denom) * math.sqrt(
        p * (1.0 - p) / trials + z ** 2 / (4.0 * trials ** 2))
    return halfwidth
