"""Small statistical toolbox: exact binomial intervals and log-space fits."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import stats as sps


def clopper_pearson(successes: int, n: int, confidence: float = 0.95) -> tuple:
    """Two-sided exact (Clopper-Pearson) confidence interval for a proportion."""
    if not 0 <= successes <= n or n < 1:
        raise ValueError(f"need 0 <= successes <= n with n >= 1, got {successes}/{n}")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    alpha = 1.0 - confidence
    lo = 0.0 if successes == 0 else float(sps.beta.ppf(alpha / 2, successes, n - successes + 1))
    hi = 1.0 if successes == n else float(sps.beta.ppf(1 - alpha / 2, successes + 1, n - successes))
    return lo, hi


def clopper_pearson_lower(successes: int, n: int, confidence: float = 0.95) -> float:
    """One-sided exact lower confidence bound; equals alpha**(1/n) when all succeed."""
    if not 0 <= successes <= n or n < 1:
        raise ValueError(f"need 0 <= successes <= n with n >= 1, got {successes}/{n}")
    alpha = 1.0 - confidence
    if successes == 0:
        return 0.0
    return float(sps.beta.ppf(alpha, successes, n - successes + 1))


def fit_power_law(x: Sequence[float], y: Sequence[float]) -> tuple:
    """Slope and intercept of log y against log x (y ~ exp(b) * x**slope)."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if lx.size < 2:
        raise ValueError("power-law fit needs at least two points")
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


def fit_exponential(x: Sequence[float], y: Sequence[float]) -> tuple:
    """Slope and intercept of log y against x (y ~ exp(b) * exp(slope * x))."""
    xa = np.asarray(x, dtype=float)
    ly = np.log(np.asarray(y, dtype=float))
    if xa.size < 2:
        raise ValueError("exponential fit needs at least two points")
    slope, intercept = np.polyfit(xa, ly, 1)
    return float(slope), float(intercept)


def mean_interval(samples: Sequence[float], confidence: float = 0.95) -> tuple:
    """Sample mean with a t-based confidence interval (degenerate for n = 1)."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValueError("mean of an empty sample")
    mean = float(arr.mean())
    if arr.size == 1:
        return mean, mean, mean
    half = float(sps.t.ppf(0.5 + confidence / 2, arr.size - 1)) * float(arr.std(ddof=1)) / math.sqrt(arr.size)
    return mean, mean - half, mean + half
