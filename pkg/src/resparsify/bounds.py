"""Closed-form right-hand sides of the matrix Chernoff and Freedman tail bounds.

Only the expressions are evaluated here, for side-by-side comparison with
empirical tails in run reports. Values are also returned as ``log10`` since
they routinely underflow.
"""

from __future__ import annotations

import math

LN10 = math.log(10.0)


def _pack(log_value: float) -> dict:
    return {"value": math.exp(log_value) if log_value > -745 else 0.0,
            "log10": log_value / LN10}


def chernoff_tail(d: int, delta: float, mu_max: float, R: float) -> dict:
    """``d * (e^delta / (1+delta)^(1+delta))^(mu_max/R)`` for a sum of independent PSD matrices."""
    if delta < 0 or mu_max <= 0 or R <= 0:
        raise ValueError("need delta >= 0, mu_max > 0, R > 0")
    log_value = math.log(d) + (mu_max / R) * (delta - (1 + delta) * math.log1p(delta))
    out = {"d": d, "delta": delta, "mu_max": mu_max, "R": R}
    out.update(_pack(log_value))
    return out


def freedman_tail(d: int, t: float, sigma2: float, R: float) -> dict:
    """``d * exp(-(t^2/2) / (sigma^2 + R t / 3))`` for a matrix martingale.

    This is the decaying form; a display with a doubled minus sign in the
    exponent would not be a tail bound at all.
    """
    if t <= 0 or sigma2 <= 0 or R <= 0:
        raise ValueError("need t, sigma2, R > 0")
    log_value = math.log(d) - (t * t / 2) / (sigma2 + R * t / 3)
    out = {"d": d, "t": t, "sigma2": sigma2, "R": R}
    out.update(_pack(log_value))
    return out


def game_bounds(d: int, epsilon: float, c: float) -> dict:
    """Both bounds at the parameters used for the game analysis.

    Chernoff: ``mu_max = 2/c``, ``R = 1/c^2``, ``delta = 2/(c mu_max)`` (tail at ``4/c``).
    Freedman: ``t = eps``, ``sigma^2 = 8/c``, ``R = 1/c``.
    """
    mu = 2.0 / c
    return {
        "chernoff": chernoff_tail(d, 2.0 / (c * mu), mu, 1.0 / c ** 2),
        "freedman": freedman_tail(d, epsilon, 8.0 / c, 1.0 / c),
    }
