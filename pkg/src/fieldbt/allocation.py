"""Monthly weight construction for the five long-only strategies.

EW is 1/N over the universe. EF solves a long-only mean-variance problem at a
target volatility (risk-aversion bisection around a projected-gradient inner
solver) and equal-weights the assets whose frontier weight exceeds 1/N. RC
equal-weights the assets whose predicted return beats the average prediction.
MIX averages the EF and RC weight vectors. RC* is RC with regression
coefficients sign-flipped whenever the trailing cross-sectional correlation
of volatility with mean returns turns negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from fieldbt.data import PanelData
from fieldbt.errors import DataError, NumericalError
from fieldbt.stats import correlation

LAMBDA_LO = 1e-6
LAMBDA_HI = 1e6
VOL_REL_TOL = 1e-4
MAX_BISECTIONS = 100
PGD_MAX_ITER = 20000
PGD_STEP_TOL = 1e-12
COV_LOADING_SCALE = 1e-8
WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class WeightVector:
    """Long-only, fully invested weights over a fixed asset universe."""

    assets: Tuple[str, ...]
    weights: np.ndarray
    date: Optional[pd.Timestamp] = None
    strategy: str = ""

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.assets),):
            raise DataError("weights and assets are misaligned")
        if not np.all(np.isfinite(w)):
            raise DataError("weights contain non-finite values")
        if np.any(w < 0):
            raise DataError("weights must be nonnegative")
        if abs(float(w.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise DataError(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", w)

    @property
    def support(self) -> Tuple[str, ...]:
        return tuple(a for a, w in zip(self.assets, self.weights) if w > 0)


@dataclass(frozen=True)
class FrontierSolution:
    """Long-only frontier portfolio at (or nearest to) a target volatility."""

    assets: Tuple[str, ...]
    weights: np.ndarray
    achieved_vol: float
    achieved_return: float
    lam: float
    bisections: int
    pgd_iterations: int
    converged: bool


@dataclass(frozen=True)
class AdaptiveState:
    """Sign-flip trigger for the adaptive strategy."""

    flip: bool
    trigger: float

    def __post_init__(self) -> None:
        if self.flip != (self.trigger < 0):
            raise DataError("flip flag must equal (trigger < 0)")


def _normalized(raw: np.ndarray) -> np.ndarray:
    total = float(raw.sum())
    if total <= 0:
        raise DataError("cannot normalize nonpositive weight mass")
    return raw / total


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise NumericalError("cannot project non-finite vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, v.size + 1)
    cond = u - (css - 1.0) / j > 0
    rho = int(np.nonzero(cond)[0][-1])
    theta = (css[rho] - 1.0) / (rho + 1)
    return np.maximum(v - theta, 0.0)


def ew_weights(assets: Sequence[str], date=None) -> WeightVector:
    """Equal weights over a nonempty asset list."""
    assets = tuple(assets)
    if not assets:
        raise DataError("empty asset universe")
    raw = np.full(len(assets), 1.0 / len(assets))
    return WeightVector(assets=assets, weights=_normalized(raw), date=date, strategy="EW")


def solve_frontier(
    mu: np.ndarray,
    cov: np.ndarray,
    target_vol: float,
    assets: Optional[Sequence[str]] = None,
) -> FrontierSolution:
    """Maximize expected return on the simplex subject to vol(w) ~= target_vol.

    Inner problem: for a risk aversion lam, maximize mu'w - lam*w'Sigma*w by
    projected gradient from w = 1/N with step 1/(2*lam*G), G the Gershgorin
    bound on Sigma. Outer problem: bisect lam (geometrically) in
    [1e-6, 1e6] until the achieved volatility is within 1e-4 relative of the
    target. Targets outside the attainable range return the nearest boundary
    portfolio with converged=False.
    """
    mu = np.asarray(mu, dtype=float)
    cov = np.asarray(cov, dtype=float)
    n = mu.size
    if cov.shape != (n, n):
        raise DataError(f"covariance shape {cov.shape} does not match {n} assets")
    if not np.all(np.isfinite(mu)) or not np.all(np.isfinite(cov)):
        raise DataError("frontier inputs contain non-finite values")
    if target_vol <= 0:
        raise DataError("target volatility must be positive")
    if assets is None:
        assets = tuple(f"A{i:03d}" for i in range(n))
    assets = tuple(assets)
    if len(assets) != n:
        raise DataError("asset labels do not match mu length")

    sigma = 0.5 * (cov + cov.T)
    loading = COV_LOADING_SCALE * float(np.trace(sigma)) / n
    sigma = sigma + loading * np.eye(n)
    gersh = float(np.abs(sigma).sum(axis=1).max())

    total_pgd = 0

    def inner(lam: float) -> Tuple[np.ndarray, int]:
        w = np.full(n, 1.0 / n)
        if gersh <= 0.0:
            # Degenerate covariance: the quadratic term vanishes; the optimum
            # is the max-return vertex (or 1/N when mu is constant).
            if np.ptp(mu) == 0.0:
                return w, 0
            vertex = np.zeros(n)
            vertex[int(np.argmax(mu))] = 1.0
            return vertex, 1
        step = 1.0 / (2.0 * lam * gersh)
        it = 0
        for it in range(1, PGD_MAX_ITER + 1):
            grad = mu - 2.0 * lam * (sigma @ w)
            w_new = project_to_simplex(w + step * grad)
            delta = float(np.linalg.norm(w_new - w))
            w = w_new
            if delta < PGD_STEP_TOL:
                break
        return w, it

    def vol_of(w: np.ndarray) -> float:
        return math.sqrt(max(float(w @ sigma @ w), 0.0))

    tol = VOL_REL_TOL * target_vol

    def finish(w, it_total, lam, bisections, converged):
        return FrontierSolution(
            assets=assets,
            weights=w,
            achieved_vol=vol_of(w),
            achieved_return=float(mu @ w),
            lam=lam,
            bisections=bisections,
            pgd_iterations=it_total,
            converged=converged,
        )

    lam_lo, lam_hi = LAMBDA_LO, LAMBDA_HI
    w_lo, it_lo = inner(lam_lo)
    total_pgd += it_lo
    if abs(vol_of(w_lo) - target_vol) <= tol:
        return finish(w_lo, total_pgd, lam_lo, 0, True)
    w_hi, it_hi = inner(lam_hi)
    total_pgd += it_hi
    if abs(vol_of(w_hi) - target_vol) <= tol:
        return finish(w_hi, total_pgd, lam_hi, 0, True)

    vol_max, vol_min = vol_of(w_lo), vol_of(w_hi)
    if target_vol > vol_max:
        return finish(w_lo, total_pgd, lam_lo, 0, False)
    if target_vol < vol_min:
        return finish(w_hi, total_pgd, lam_hi, 0, False)

    best_under = (w_hi, lam_hi)  # highest-return iterate with vol <= target
    for k in range(1, MAX_BISECTIONS + 1):
        lam_mid = math.sqrt(lam_lo * lam_hi)
        w_mid, it_mid = inner(lam_mid)
        total_pgd += it_mid
        v = vol_of(w_mid)
        if abs(v - target_vol) <= tol:
            return finish(w_mid, total_pgd, lam_mid, k, True)
        if v > target_vol:
            lam_lo = lam_mid
        else:
            lam_hi = lam_mid
            best_under = (w_mid, lam_mid)
    w, lam = best_under
    return finish(w, total_pgd, lam, MAX_BISECTIONS, False)


def ef_select(frontier: FrontierSolution, n_total: int, date=None) -> WeightVector:
    """Equal-weight the assets whose frontier weight strictly exceeds 1/N."""
    if n_total <= 0:
        raise DataError("n_total must be positive")
    threshold = 1.0 / n_total
    mask = frontier.weights > threshold
    raw = np.where(mask, 1.0, 0.0)
    if not mask.any():
        # All weights exactly 1/N: fall back to EW.
        raw = np.ones(len(frontier.assets))
    return WeightVector(
        assets=frontier.assets,
        weights=_normalized(raw),
        date=date,
        strategy="EF",
    )


def rc_select(predictions: pd.Series, date=None, strategy: str = "RC") -> WeightVector:
    """Equal-weight the assets whose prediction strictly beats the average."""
    preds = predictions.to_numpy(dtype=float)
    if preds.size < 2:
        raise DataError("rc_select needs at least 2 predictions")
    if not np.all(np.isfinite(preds)):
        raise DataError("predictions contain non-finite values")
    mask = preds > preds.mean()
    raw = np.where(mask, 1.0, 0.0)
    if not mask.any():
        raw = np.ones(preds.size)
    return WeightVector(
        assets=tuple(predictions.index),
        weights=_normalized(raw),
        date=date,
        strategy=strategy,
    )


def mix_weights(a: WeightVector, b: WeightVector, strategy: str = "MIX") -> WeightVector:
    """Elementwise average of two weight vectors on the same universe."""
    if a.assets != b.assets:
        raise DataError("mix requires identical asset universes")
    if a.date != b.date:
        raise DataError("mix requires matching rebalance dates")
    return WeightVector(
        assets=a.assets,
        weights=_normalized(0.5 * (a.weights + b.weights)),
        date=a.date,
        strategy=strategy,
    )


def weights_to_csv(vectors: Sequence[WeightVector], include_zeros: bool = False) -> str:
    """Render weight vectors as ``date,strategy,asset_id,weight`` CSV text."""
    lines = ["date,strategy,asset_id,weight"]
    for wv in vectors:
        date = wv.date.date() if wv.date is not None else ""
        for asset, weight in zip(wv.assets, wv.weights):
            if weight > 0 or include_zeros:
                lines.append(f"{date},{wv.strategy},{asset},{float(weight)!r}")
    return "\n".join(lines) + "\n"


def adaptive_trigger(panel: PanelData, window, assets: Optional[Sequence[str]] = None) -> AdaptiveState:
    """Trailing cross-sectional correlation of per-asset vol with mean excess return.

    The flip flag raises when the correlation is negative (volatile assets
    falling hardest), the drawdown signature that precedes coefficient
    inversion. A degenerate cross-section (no variation in either vector)
    yields trigger 0.0 and no flip.
    """
    start, end = pd.Timestamp(window[0]), pd.Timestamp(window[1])
    excess = panel.excess.loc[start:end]
    if assets is not None:
        excess = excess[list(assets)]
    if excess.shape[1] < 4:
        raise DataError("adaptive trigger needs at least 4 assets")
    if len(excess) < 3:
        raise DataError("adaptive trigger window too short")
    e = excess.to_numpy()
    vols = e.std(axis=0, ddof=1)
    means = e.mean(axis=0)
    if np.ptp(vols) == 0.0 or np.ptp(means) == 0.0:
        return AdaptiveState(flip=False, trigger=0.0)
    trig = correlation(vols, means)
    return AdaptiveState(flip=trig < 0, trigger=trig)
