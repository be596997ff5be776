"""Signed log-magnitude arithmetic.

Indicator values span many decades over a tau sweep, so magnitudes are
carried as (log|x|, sign) pairs.  sign is -1, 0 or +1; a zero value has
log magnitude -inf by convention.
"""

from __future__ import annotations

import numpy as np

NEG_INF = -np.inf


def from_float(x: float) -> tuple[float, int]:
    """Decompose a float into (log|x|, sign)."""
    if x == 0.0 or not np.isfinite(x):
        if not np.isfinite(x):
            raise ValueError(f"cannot take log-representation of {x}")
        return (NEG_INF, 0)
    return (float(np.log(abs(x))), 1 if x > 0 else -1)


def to_float(logmag: float, sign: int) -> float:
    """Inverse of :func:`from_float`; may under/overflow for extreme logs."""
    if sign == 0:
        return 0.0
    return sign * float(np.exp(logmag))


def signed_log_sum(logmags, signs) -> tuple[float, int]:
    """Sum of values given in (log|x|, sign) form, returned the same way.

    Uses a shifted accumulation (log-sum-exp style with sign tracking) so
    that summands spanning hundreds of decades do not underflow.
    """
    logmags = np.asarray(logmags, dtype=float)
    signs = np.asarray(signs, dtype=float)
    live = signs != 0
    if not np.any(live):
        return (NEG_INF, 0)
    lm = logmags[live]
    sg = signs[live]
    m = float(np.max(lm))
    acc = float(np.sum(sg * np.exp(lm - m)))
    if acc == 0.0:
        return (NEG_INF, 0)
    return (m + float(np.log(abs(acc))), 1 if acc > 0 else -1)


def log_abs(x: float) -> float:
    return from_float(x)[0]
