"""Pure statistical kernel: moments, correlation, beta, Sharpe, skewness variants,
and Fisher confidence intervals for correlations.

All functions are pure and operate on 1-D array-likes. Volatility uses the
sample (n-1) estimator; the two skewness statistics use population (1/n)
moments, which is the conventional normalization for shape statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

ArrayLike = Union[Sequence[float], np.ndarray]

# 97.5% normal quantile used for two-sided 95% intervals.
Z_95 = 1.959964


@dataclass(frozen=True)
class WindowStats:
    """Per-asset summary statistics measured over one window."""

    mean: float
    volatility: float
    sharpe: Optional[float]
    skewness: float
    revised_skewness: float
    start: Optional[object] = None
    end: Optional[object] = None


@dataclass(frozen=True)
class CorrelationEstimate:
    """A correlation with its 95% confidence interval."""

    rho: float
    ci_low: float
    ci_high: float
    n: int

    def __post_init__(self) -> None:
        if not (-1.0 <= self.ci_low <= self.rho <= self.ci_high <= 1.0):
            raise ValueError(
                f"ill-ordered correlation estimate: "
                f"({self.ci_low}, {self.rho}, {self.ci_high})"
            )


def _vec(x: ArrayLike, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        arr = arr.ravel()
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def mean(x: ArrayLike) -> float:
    """Arithmetic mean of a return series (per-day return)."""
    return float(_vec(x).mean())


def volatility(x: ArrayLike) -> float:
    """Sample standard deviation (n-1 denominator, per-day units)."""
    arr = _vec(x)
    if arr.size < 2:
        raise ValueError("volatility needs at least 2 observations")
    centered = arr - arr.mean()
    return float(math.sqrt(float(centered @ centered) / (arr.size - 1)))


def sharpe(x: ArrayLike) -> float:
    """Mean/volatility ratio; undefined (raises) for constant series."""
    arr = _vec(x)
    vol = volatility(arr)
    if vol == 0.0:
        raise ValueError("sharpe undefined: zero volatility")
    return float(arr.mean() / vol)


def correlation(x: ArrayLike, y: ArrayLike) -> float:
    """Pearson correlation of two equal-length, nonconstant series."""
    xa, ya = _vec(x, "x"), _vec(y, "y")
    if xa.size != ya.size:
        raise ValueError(f"length mismatch: {xa.size} vs {ya.size}")
    if xa.size < 3:
        raise ValueError("correlation needs at least 3 observations")
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("correlation undefined for constant input")
    rho = float(xc @ yc) / math.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, rho)))


def beta(x: ArrayLike, b: ArrayLike) -> float:
    """Least-squares slope of x on benchmark b; equals corr(x,b)*vol(x)/vol(b)."""
    xa, ba = _vec(x, "x"), _vec(b, "benchmark")
    if xa.size != ba.size:
        raise ValueError(f"length mismatch: {xa.size} vs {ba.size}")
    if xa.size < 3:
        raise ValueError("beta needs at least 3 observations")
    bc = ba - ba.mean()
    sbb = float(bc @ bc)
    if sbb == 0.0:
        raise ValueError("beta undefined for constant benchmark")
    xc = xa - xa.mean()
    return float(xc @ bc) / sbb


def skewness(x: ArrayLike) -> float:
    """Third standardized moment with population (1/n) normalization."""
    arr = _vec(x)
    if arr.size < 3:
        raise ValueError("skewness needs at least 3 observations")
    centered = arr - arr.mean()
    m2 = float(centered @ centered) / arr.size
    if m2 == 0.0:
        raise ValueError("skewness undefined: zero volatility")
    m3 = float((centered**3).sum()) / arr.size
    return m3 / m2**1.5


def revised_skewness(x: ArrayLike) -> float:
    """Rank-by-magnitude cumulative-area asymmetry statistic.

    Standardize to zero mean and unit (population) variance, sort by absolute
    value ascending (negative first on exact magnitude ties, then original
    order), cumulatively sum, and return -(2/n^2) times the summed cumulative
    curve. Few steep drawdowns leave a large positive area, so crash-prone
    series score negative; right-skewed series score positive.
    """
    arr = _vec(x)
    n = arr.size
    if n < 3:
        raise ValueError("revised skewness needs at least 3 observations")
    centered = arr - arr.mean()
    sd = math.sqrt(float(centered @ centered) / n)
    if sd == 0.0:
        raise ValueError("revised skewness undefined: zero volatility")
    z = centered / sd
    order = sorted(range(n), key=lambda i: (abs(z[i]), z[i] >= 0, i))
    cum = np.cumsum(z[order])
    return float(-(2.0 / (n * n)) * cum.sum())


def fisher_ci(rho: float, n: int, z: float = Z_95) -> CorrelationEstimate:
    """95% confidence interval for a correlation via the Fisher z-transform."""
    if not np.isfinite(rho) or abs(rho) >= 1.0:
        raise ValueError(f"fisher_ci requires |rho| < 1, got {rho}")
    if n < 4:
        raise ValueError(f"fisher_ci requires n >= 4, got {n}")
    zr = math.atanh(rho)
    half_width = z / math.sqrt(n - 3)
    lo = max(-1.0, math.tanh(zr - half_width))
    hi = min(1.0, math.tanh(zr + half_width))
    return CorrelationEstimate(rho=float(rho), ci_low=lo, ci_high=hi, n=int(n))


def window_stats(x: ArrayLike, start=None, end=None) -> WindowStats:
    """Bundle the per-window summary statistics for one return series."""
    arr = _vec(x)
    vol = volatility(arr)
    return WindowStats(
        mean=float(arr.mean()),
        volatility=vol,
        sharpe=float(arr.mean() / vol) if vol > 0 else None,
        skewness=skewness(arr),
        revised_skewness=revised_skewness(arr),
        start=start,
        end=end,
    )
