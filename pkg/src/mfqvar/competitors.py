"""Benchmark VaR models: CAViaR (SAV, AS, IG), GARCH and GJR with normal or
Student-t errors, RiskMetrics and GARCH-MIDAS.

Every fitted model exposes ``var_path(ret)``: given the returns of the
estimation window followed by any later returns, it runs the model's
recursion from the window start and returns one VaR per day plus the
forecast for the day after the last return, so element ``t`` only depends on
``ret[:t]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import optimize, special, stats
from scipy.signal import lfilter

from .errors import EstimationError, DataError
from .midas import beta_weights, weighted_sums
from .timegrid import MixedFreqPanel

__all__ = [
    "CaviarModel",
    "GarchModel",
    "RiskMetricsModel",
    "GarchMidasModel",
    "fit_caviar",
    "caviar_path",
    "fit_garch",
    "garch_variance",
    "var_garch",
    "fit_riskmetrics",
    "riskmetrics_variance",
    "fit_garch_midas",
    "garch_midas_variance",
]

CAVIAR_VARIANTS = ("SAV", "AS", "IG")
CAVIAR_INIT_OBS = 100
RISKMETRICS_LAMBDA = 0.94


# ------------------------------------------------------------------ CAViaR


@njit(cache=True)
def _caviar_recursion(betas, variant, ret, v0):
    """VaR path of length ``len(ret) + 1``; NaN from the first invalid IG step."""
    n = ret.shape[0]
    out = np.empty(n + 1)
    out[0] = v0
    v = v0
    for t in range(n):
        r = ret[t]
        if variant == 0:
            v = betas[0] + betas[1] * v + betas[2] * abs(r)
        elif variant == 1:
            v = betas[0] + betas[1] * v + betas[2] * max(r, 0.0) + betas[3] * max(-r, 0.0)
        else:
            arg = betas[0] + betas[1] * v * v + betas[2] * r * r
            if not arg > 0.0:
                for s in range(t + 1, n + 1):
                    out[s] = np.nan
                return out
            v = -np.sqrt(arg)
        out[t + 1] = v
    return out


@njit(cache=True)
def _caviar_loss(betas, variant, ret, v0, tau):
    n = ret.shape[0]
    v = v0
    total = 0.0
    bound = 1e12
    for t in range(n):
        u = ret[t] - v
        total += u * (tau - (u < 0.0))
        r = ret[t]
        if variant == 0:
            v = betas[0] + betas[1] * v + betas[2] * abs(r)
        elif variant == 1:
            v = betas[0] + betas[1] * v + betas[2] * max(r, 0.0) + betas[3] * max(-r, 0.0)
        else:
            arg = betas[0] + betas[1] * v * v + betas[2] * r * r
            if not arg > 0.0:
                return np.inf
            v = -np.sqrt(arg)
        if not abs(v) < bound:
            return np.inf
    return total


@njit(cache=True)
def _caviar_losses(cands, variant, ret, v0, tau):
    out = np.empty(cands.shape[0])
    for k in range(cands.shape[0]):
        out[k] = _caviar_loss(cands[k], variant, ret, v0, tau)
    return out


def _variant_code(variant: str) -> int:
    v = variant.upper()
    if v not in CAVIAR_VARIANTS:
        raise ValueError(f"unknown CAViaR variant {variant!r}; choose from {CAVIAR_VARIANTS}")
    return CAVIAR_VARIANTS.index(v)


@dataclass(frozen=True, eq=False)
class CaviarModel:
    variant: str
    betas: np.ndarray
    tau: float
    loss: float
    v0: float
    n_obs: int

    def var_path(self, ret) -> np.ndarray:
        return caviar_path(self.betas, self.variant, ret, self.v0)


def caviar_path(betas, variant: str, ret, v0: float) -> np.ndarray:
    """Run the CAViaR recursion from ``v0``; output has ``len(ret) + 1`` entries."""
    return _caviar_recursion(np.asarray(betas, dtype=float), _variant_code(variant),
                             np.ascontiguousarray(ret, dtype=float), float(v0))


def _random_starts(code: int, ret: np.ndarray, tau: float, v0: float, n: int, rng) -> np.ndarray:
    """Random starting vectors centred so the implied unconditional VaR is near ``v0``."""
    b1 = rng.uniform(0.0, 0.99, n)
    if code == 2:
        b2 = rng.uniform(0.0, 1.0, n)
        b0 = (1.0 - b1) * v0**2 - b2 * np.mean(ret**2)
        b0 = np.maximum(b0, 1e-3 * v0**2) * rng.uniform(0.2, 2.0, n)
        return np.column_stack([b0, b1, b2])
    abs_mean = np.mean(np.abs(ret))
    if code == 0:
        b2 = rng.uniform(-1.0, 0.0, n)
        b0 = (1.0 - b1) * v0 - b2 * abs_mean
        return np.column_stack([b0 * rng.uniform(0.5, 1.5, n), b1, b2])
    b2 = rng.uniform(-1.0, 0.5, n)
    b3 = rng.uniform(-1.0, 0.0, n)
    pos = np.mean(np.maximum(ret, 0.0))
    neg = np.mean(np.maximum(-ret, 0.0))
    b0 = (1.0 - b1) * v0 - b2 * pos - b3 * neg
    return np.column_stack([b0 * rng.uniform(0.5, 1.5, n), b1, b2, b3])


def fit_caviar(
    returns,
    tau: float,
    variant: str = "SAV",
    n_starts: int = 10_000,
    n_refine: int = 10,
    seed=0,
) -> CaviarModel:
    """Minimize the check loss of a CAViaR recursion.

    Parameters
    ----------
    returns : array_like
        Daily returns, at least 300 of them.
    tau : float
    variant : {"SAV", "AS", "IG"}
        ``SAV``: ``b0 + b1 VaR + b2 |r|``; ``AS``: ``b0 + b1 VaR + b2 r+ + b3 r-``;
        ``IG``: ``-sqrt(b0 + b1 VaR^2 + b2 r^2)``.
    n_starts, n_refine
        Random starting vectors scored by their loss; the best ``n_refine``
        are polished by Nelder-Mead (run twice) and the overall best kept.
    seed
        Seed or generator for the random starts.

    Notes
    -----
    The recursion starts at the empirical ``tau``-quantile of the first 100
    returns.  IG candidates whose square-root argument turns nonpositive get
    infinite loss and are simply never selected.
    """
    ret = np.ascontiguousarray(returns, dtype=float)
    if ret.ndim != 1 or ret.shape[0] < 300:
        raise DataError("CAViaR needs at least 300 returns")
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    code = _variant_code(variant)
    v0 = float(np.quantile(ret[:CAVIAR_INIT_OBS], tau))
    if code == 2 and v0 >= 0.0:
        v0 = -float(np.std(ret[:CAVIAR_INIT_OBS]))
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cands = _random_starts(code, ret, tau, v0, max(int(n_starts), n_refine), rng)
    losses = _caviar_losses(cands, code, ret, v0, tau)
    finite = np.isfinite(losses)
    if not finite.any():
        raise EstimationError(f"CAViaR {variant}: every starting vector diverged")
    order = np.flatnonzero(finite)[np.argsort(losses[finite], kind="stable")][:n_refine]

    def objective(b):
        return _caviar_loss(b, code, ret, v0, tau)

    best_b, best_loss = cands[order[0]].copy(), float(losses[order[0]])
    for k in order:
        b = cands[k]
        for _ in range(2):
            res = optimize.minimize(objective, b, method="Nelder-Mead",
                                    options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 4000})
            b = res.x
        val = objective(b)
        if val < best_loss:
            best_b, best_loss = np.array(b, dtype=float), float(val)
    return CaviarModel(CAVIAR_VARIANTS[code], best_b, tau, best_loss, v0, ret.shape[0])


# ------------------------------------------------------------------ GARCH


def _persistence_split(z_p: float, logits) -> tuple[float, np.ndarray]:
    """Map unconstrained values to persistence in (0, 1) and shares summing to 1."""
    p = special.expit(z_p) * (1.0 - 1e-6)
    shares = special.softmax(np.concatenate([[0.0], np.asarray(logits, dtype=float)]))
    return p, shares


@dataclass(frozen=True, eq=False)
class GarchModel:
    """``h_t = a0 + (a1 + g1 1{r_{t-1} < 0}) r_{t-1}^2 + b1 h_{t-1}``."""

    family: str
    dist: str
    alpha0: float
    alpha1: float
    beta1: float
    gamma1: float = 0.0
    nu: float = float("inf")
    loglik: float = float("nan")
    h0: float = 1.0
    n_obs: int = 0
    converged: bool = True
    tau_default: float = 0.05

    @property
    def params(self) -> dict:
        out = {"alpha0": self.alpha0, "alpha1": self.alpha1}
        if self.family == "GJR":
            out["gamma1"] = self.gamma1
        out["beta1"] = self.beta1
        if self.dist == "student_t":
            out["nu"] = self.nu
        return out

    @property
    def persistence(self) -> float:
        return self.alpha1 + self.beta1 + 0.5 * self.gamma1

    def variance_path(self, ret) -> np.ndarray:
        return garch_variance(ret, self.alpha0, self.alpha1, self.beta1, self.gamma1, self.h0)

    def var_path(self, ret) -> np.ndarray:
        return var_garch(self, self.variance_path(ret), self.tau_default)


def garch_variance(ret, alpha0, alpha1, beta1, gamma1=0.0, h0=None) -> np.ndarray:
    """Conditional variance path of length ``len(ret) + 1`` starting at ``h0``.

    ``h0`` defaults to the sample variance of ``ret``.
    """
    ret = np.asarray(ret, dtype=float)
    if h0 is None:
        h0 = float(np.var(ret))
    r2 = ret**2
    u = alpha0 + (alpha1 + gamma1 * (ret < 0)) * r2
    h = np.empty(ret.shape[0] + 1)
    h[0] = h0
    if ret.shape[0]:
        h[1:], _ = lfilter([1.0], [1.0, -beta1], u, zi=[beta1 * h0])
    return h


def _t_loglik(r, h, nu):
    c = special.gammaln(0.5 * (nu + 1.0)) - special.gammaln(0.5 * nu) - 0.5 * np.log(np.pi * (nu - 2.0))
    return np.sum(c - 0.5 * np.log(h) - 0.5 * (nu + 1.0) * np.log1p(r**2 / (h * (nu - 2.0))))


def _normal_loglik(r, h):
    return -0.5 * np.sum(np.log(2.0 * np.pi) + np.log(h) + r**2 / h)


def _garch_unpack(z, family, dist, scale):
    alpha0 = np.exp(z[0]) * scale
    n_sh = 2 if family == "GJR" else 1
    p, shares = _persistence_split(z[1], z[2 : 2 + n_sh])
    beta1 = p * shares[0]
    alpha1 = p * shares[1]
    gamma1 = 2.0 * p * shares[2] if family == "GJR" else 0.0
    nu = 2.0 + np.exp(z[2 + n_sh]) if dist == "student_t" else np.inf
    return alpha0, alpha1, beta1, gamma1, nu


def fit_garch(returns, family: str = "GARCH", dist: str = "normal", tau: float = 0.05) -> GarchModel:
    """Maximum likelihood GARCH(1,1) or GJR(1,1) with zero conditional mean.

    Parameters
    ----------
    returns : array_like
        At least 250 returns.
    family : {"GARCH", "GJR"}
    dist : {"normal", "student_t"}
        The Student-t density is standardized to unit variance.
    tau : float
        Level stored on the model for ``var_path``.

    Notes
    -----
    ``a0 = exp(.)``, the persistence ``a1 + b1 + g1/2`` is a logistic
    transform times the shares of a softmax, and ``nu = 2 + exp(.)``, so every
    trial point satisfies the constraints.  ``h`` starts at the sample variance.
    """
    family = family.upper()
    if family not in ("GARCH", "GJR"):
        raise ValueError(f"unknown family {family!r}")
    if dist not in ("normal", "student_t"):
        raise ValueError(f"unknown distribution {dist!r}")
    r = np.asarray(returns, dtype=float)
    if r.ndim != 1 or r.shape[0] < 250:
        raise DataError("GARCH fitting needs at least 250 returns")
    if not np.all(np.isfinite(r)):
        raise DataError("non-finite returns")
    h0 = float(np.var(r))
    if h0 <= 0:
        raise EstimationError("returns have zero variance")

    def negll(z):
        a0, a1, b1, g1, nu = _garch_unpack(z, family, dist, h0)
        h = garch_variance(r, a0, a1, b1, g1, h0)[:-1]
        if not np.all(h > 0):
            return 1e300
        ll = _t_loglik(r, h, nu) if dist == "student_t" else _normal_loglik(r, h)
        return -ll if np.isfinite(ll) else 1e300

    starts = []
    for p, a_share in ((0.95, 0.08), (0.90, 0.15), (0.98, 0.04)):
        a1 = p * a_share
        z = [np.log(1.0 - p), special.logit(p / (1.0 - 1e-6))]
        if family == "GJR":
            z += [np.log(a1 / 2 / (p - a1)), np.log(a1 / 2 / (p - a1))]
        else:
            z += [np.log(a1 / (p - a1))]
        if dist == "student_t":
            z.append(np.log(6.0))
        starts.append(np.array(z))
    best = None
    for z0 in starts:
        res = optimize.minimize(negll, z0, method="L-BFGS-B")
        res2 = optimize.minimize(negll, res.x, method="Nelder-Mead",
                                 options={"xatol": 1e-7, "fatol": 1e-9, "maxiter": 5000})
        cand = res2 if res2.fun <= res.fun else res
        if best is None or cand.fun < best.fun:
            best = cand
    if best is None or not np.isfinite(best.fun) or best.fun >= 1e300:
        raise EstimationError(f"{family}-{dist} likelihood optimization failed")
    a0, a1, b1, g1, nu = _garch_unpack(best.x, family, dist, h0)
    return GarchModel(family, dist, float(a0), float(a1), float(b1), float(g1), float(nu),
                      float(-best.fun), h0, r.shape[0], bool(best.success), tau)


def var_garch(model, h_next, tau: float):
    """VaR from a variance forecast: ``sqrt(h) * q(tau)``.

    ``q`` is the normal quantile, or for Student-t errors the t quantile times
    ``sqrt((nu - 2) / nu)`` so the innovation has unit variance.
    """
    h = np.asarray(h_next, dtype=float)
    if np.any(h < 0):
        raise ValueError("variance must be nonnegative")
    dist = getattr(model, "dist", model if isinstance(model, str) else "normal")
    if dist == "student_t":
        nu = model.nu
        q = stats.t.ppf(tau, nu) * np.sqrt((nu - 2.0) / nu)
    else:
        q = stats.norm.ppf(tau)
    out = np.sqrt(h) * q
    return float(out) if out.ndim == 0 else out


# ------------------------------------------------------------------ RiskMetrics


@dataclass(frozen=True, eq=False)
class RiskMetricsModel:
    h0: float
    lam: float = RISKMETRICS_LAMBDA
    tau_default: float = 0.05
    dist: str = "normal"

    def variance_path(self, ret) -> np.ndarray:
        return riskmetrics_variance(ret, self.h0, self.lam)

    def var_path(self, ret) -> np.ndarray:
        return var_garch(self, self.variance_path(ret), self.tau_default)


def riskmetrics_variance(ret, h0: float, lam: float = RISKMETRICS_LAMBDA) -> np.ndarray:
    """``h_t = lam h_{t-1} + (1 - lam) r_{t-1}^2``, length ``len(ret) + 1``."""
    return garch_variance(ret, 0.0, 1.0 - lam, lam, 0.0, h0)


def fit_riskmetrics(returns, tau: float = 0.05, lam: float = RISKMETRICS_LAMBDA) -> RiskMetricsModel:
    """Exponential smoothing filter; only the starting variance comes from the data."""
    r = np.asarray(returns, dtype=float)
    if r.ndim != 1 or r.shape[0] < 2:
        raise DataError("RiskMetrics needs at least two returns")
    return RiskMetricsModel(float(np.var(r, ddof=1)), lam, tau)


# ------------------------------------------------------------------ GARCH-MIDAS


@dataclass(frozen=True, eq=False)
class GarchMidasModel:
    """Normal GARCH-MIDAS with a GJR short-run component.

    ``g_i = tau_t xi_i`` with ``tau_t = exp(m + zeta WS_t)`` and
    ``xi_i = (1 - a1 - b1 - g1/2) + (a1 + g1 1{r_{i-1} < 0}) r_{i-1}^2 / tau_t + b1 xi_{i-1}``.
    """

    alpha1: float
    gamma1: float
    beta1: float
    m: float
    zeta: float
    omega2: float
    k_lags: int
    loglik: float = float("nan")
    n_obs: int = 0
    converged: bool = True
    tau_default: float = 0.05
    dist: str = "normal"

    @property
    def params(self) -> dict:
        return {"alpha1": self.alpha1, "gamma1": self.gamma1, "beta1": self.beta1,
                "m": self.m, "zeta": self.zeta, "omega2": self.omega2}

    def long_run(self, panel: MixedFreqPanel, positions) -> np.ndarray:
        ws = _ws_by_day(panel, self.k_lags, self.omega2, positions)
        return np.exp(self.m + self.zeta * ws)

    def variance_path(self, panel: MixedFreqPanel, start: int, stop: int) -> np.ndarray:
        """Conditional variance for positions ``start .. stop`` inclusive.

        Uses returns ``start .. stop-1``; the last entry is the forecast for
        position ``stop`` (which must exist in the panel, or equal its length
        when the month index allows it).
        """
        return garch_midas_variance(panel, start, stop, self.k_lags, self.alpha1, self.gamma1,
                                    self.beta1, self.m, self.zeta, self.omega2)


def _ws_by_day(panel: MixedFreqPanel, k_lags: int, omega2: float, positions) -> np.ndarray:
    w = beta_weights(k_lags, 1.0, omega2)
    ws = weighted_sums(panel.mv, w)
    month = panel.month_of[np.asarray(positions, dtype=np.intp)]
    out = ws[month]
    if np.any(np.isnan(out)):
        raise DataError("fewer than k_lags monthly values before some estimation day")
    return out


def garch_midas_variance(panel, start, stop, k_lags, alpha1, gamma1, beta1, m, zeta, omega2) -> np.ndarray:
    pos = np.arange(start, stop + 1)
    if stop > len(panel):
        raise DataError("forecast position beyond the panel")
    month_of = np.append(panel.month_of, panel.month_of[-1]) if stop == len(panel) else panel.month_of
    w = beta_weights(k_lags, 1.0, omega2)
    ws = weighted_sums(panel.mv, w)[month_of[pos]]
    if np.any(np.isnan(ws)):
        raise DataError("fewer than k_lags monthly values before some estimation day")
    tau_t = np.exp(m + zeta * ws)
    r = panel.ret[start:stop]
    u = (1.0 - alpha1 - beta1 - 0.5 * gamma1) + (alpha1 + gamma1 * (r < 0)) * r**2 / tau_t[1:]
    xi = np.empty(pos.shape[0])
    xi[0] = 1.0
    if r.shape[0]:
        xi[1:], _ = lfilter([1.0], [1.0, -beta1], u, zi=[beta1 * 1.0])
    return tau_t * xi


def _midas_unpack(z):
    p, shares = _persistence_split(z[0], z[1:3])
    beta1, alpha1, gamma1 = p * shares[0], p * shares[1], 2.0 * p * shares[2]
    return alpha1, gamma1, beta1, z[3], z[4], 1.0 + np.exp(z[5])


def fit_garch_midas(panel: MixedFreqPanel, k_lags: int, start: int = 0, stop: int | None = None,
                    tau: float = 0.05) -> GarchMidasModel:
    """Normal quasi-likelihood GARCH-MIDAS on panel positions ``start:stop``.

    The Beta weights use ``omega1 = 1`` and ``omega2 = 1 + exp(.)``, estimated
    jointly with the other parameters; the short-run intercept is tied to
    ``1 - a1 - b1 - g1/2`` so that ``xi`` has unit mean.
    """
    stop = len(panel) if stop is None else stop
    if stop - start < 250:
        raise DataError("GARCH-MIDAS needs at least 250 daily returns")
    r = panel.ret[start:stop]
    v = float(np.var(r))
    if v <= 0:
        raise EstimationError("returns have zero variance")

    def negll(z):
        a1, g1, b1, m, zeta, w2 = _midas_unpack(z)
        if not (np.isfinite(w2) and w2 < 1e4):
            return 1e300
        with np.errstate(over="ignore", invalid="ignore"):
            g = garch_midas_variance(panel, start, stop, k_lags, a1, g1, b1, m, zeta, w2)[:-1]
        if not np.all(np.isfinite(g) & (g > 0)):
            return 1e300
        return -_normal_loglik(r, g)

    sd_mv = float(np.std(panel.mv)) or 1.0
    best = None
    for zeta0 in (0.0, 0.3 / sd_mv, -0.3 / sd_mv):
        z0 = np.array([special.logit(0.95), np.log(0.05 / 0.9), np.log(0.05 / 0.9),
                       np.log(v), zeta0, 0.0])
        res = optimize.minimize(negll, z0, method="L-BFGS-B")
        res2 = optimize.minimize(negll, res.x, method="Nelder-Mead",
                                 options={"xatol": 1e-7, "fatol": 1e-9, "maxiter": 6000})
        cand = res2 if res2.fun <= res.fun else res
        if best is None or cand.fun < best.fun:
            best = cand
    if not np.isfinite(best.fun) or best.fun >= 1e300:
        raise EstimationError("GARCH-MIDAS likelihood optimization failed")
    a1, g1, b1, m, zeta, w2 = _midas_unpack(best.x)
    return GarchMidasModel(float(a1), float(g1), float(b1), float(m), float(zeta), float(w2),
                           int(k_lags), float(-best.fun), stop - start, bool(best.success), tau)
