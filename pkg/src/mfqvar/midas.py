"""Beta lag polynomial and the filtered low-frequency sum."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientHistoryError

__all__ = ["BetaWeights", "beta_weights", "weighted_sum", "weighted_sums"]


@dataclass(frozen=True, eq=False)
class BetaWeights:
    k_max: int
    omega1: float
    omega2: float
    weights: np.ndarray


def beta_weights(k_max: int, omega1: float = 1.0, omega2: float = 1.0) -> BetaWeights:
    """Normalized Beta lag weights for lags ``k = 1..k_max``.

    Evaluated in log space so that very large ``omega2`` does not underflow
    before normalization.  With ``omega2 > 1`` the last weight is exactly 0,
    except for ``k_max = 1`` where the single lag always gets weight 1.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if omega1 < 1 or omega2 < 1:
        raise ValueError("omega1 and omega2 must be >= 1")
    if k_max == 1:
        w = np.ones(1)
        w.flags.writeable = False
        return BetaWeights(1, float(omega1), float(omega2), w)
    u = np.arange(1, k_max + 1) / k_max
    logw = np.zeros(k_max)
    if omega1 != 1:
        logw += (omega1 - 1.0) * np.log(u)
    if omega2 != 1:
        with np.errstate(divide="ignore"):
            logw += (omega2 - 1.0) * np.log1p(-u)
    top = logw.max()
    assert np.isfinite(top), "Beta weights vanish for every lag"
    w = np.exp(logw - top)
    w /= w.sum()
    w.flags.writeable = False
    return BetaWeights(k_max, float(omega1), float(omega2), w)


def weighted_sum(panel, t: int, w: BetaWeights) -> float:
    """``sum_k w_k * MV_{t-k}`` for monthly position ``t`` (no absolute value)."""
    if t - w.k_max < 0:
        raise InsufficientHistoryError(f"month {t} has fewer than {w.k_max} monthly lags")
    if t - 1 >= panel.mv.shape[0]:
        raise InsufficientHistoryError(f"month {t} is beyond the monthly series")
    lags = panel.mv[t - w.k_max : t][::-1]
    return float(w.weights @ lags)


def weighted_sums(mv: np.ndarray, w: BetaWeights) -> np.ndarray:
    """Weighted sums for every monthly position ``0..len(mv)``.

    Entry ``t`` uses ``mv[t-1], ..., mv[t-K]``; positions without ``K`` lags
    are NaN.  The extra final entry serves days in the month after the last
    monthly value.
    """
    mv = np.asarray(mv, dtype=float)
    out = np.full(mv.shape[0] + 1, np.nan)
    if mv.shape[0] >= w.k_max:
        out[w.k_max :] = np.convolve(mv, w.weights, mode="valid")
    return out
