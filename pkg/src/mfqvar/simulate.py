"""Data-generating process and Monte Carlo study.

Daily returns follow

    r_{i,t} = (beta0 + theta |WS_{t-1}| + sum_j beta_j |r_{i-j,t}| [+ beta_x X_{i-1,t}]) z_{i,t}

with ``z ~ N(0, 1)`` and a monthly AR(1) driver ``MV_t = phi MV_{t-1} + e_t``
whose innovations are Hansen skewed-t (or normal).
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import special, stats

from . import mfqarch
from .errors import ConfigurationError, MfqVarError
from .midas import beta_weights, weighted_sums
from .timegrid import MixedFreqPanel, panel_from_arrays

__all__ = [
    "skew_t_constants",
    "skew_t_ppf",
    "sample_skew_t",
    "DgpConfig",
    "simulate_dgp",
    "McStudyResult",
    "run_mc_study",
    "write_estimates_table",
    "write_lag_table",
]

log = logging.getLogger(__name__)

REFERENCE_BETAS = (0.05, 0.30, 0.25, 0.20, 0.15)
REFERENCE_THETA = 0.125
REFERENCE_OMEGA2 = 2.0


# ------------------------------------------------------------ skewed t


def skew_t_constants(df: float, lam: float) -> tuple[float, float, float]:
    """``(a, b, c)`` of Hansen's skewed t with ``df`` > 2 and ``lam`` in (-1, 1)."""
    c = np.exp(special.gammaln((df + 1) / 2) - special.gammaln(df / 2)) / np.sqrt(np.pi * (df - 2))
    a = 4 * lam * c * (df - 2) / (df - 1)
    b = np.sqrt(1 + 3 * lam**2 - a**2)
    return a, b, c


def skew_t_ppf(u, df: float, lam: float) -> np.ndarray:
    """Quantile function of the standardized (mean 0, variance 1) skewed t."""
    a, b, _ = skew_t_constants(df, lam)
    u = np.asarray(u, dtype=float)
    scale = np.sqrt((df - 2) / df)
    left = u < (1 - lam) / 2
    out = np.empty_like(u)
    out[left] = (1 - lam) / b * scale * stats.t.ppf(u[left] / (1 - lam), df) - a / b
    ur = u[~left]
    out[~left] = (1 + lam) / b * scale * stats.t.ppf(0.5 + (ur - (1 - lam) / 2) / (1 + lam), df) - a / b
    return out


def sample_skew_t(df: float, lam: float, n: int, seed=None) -> np.ndarray:
    """iid draws by inversion.  ``seed`` may be an int or a Generator."""
    if not df > 2:
        raise ConfigurationError("skewed t needs df > 2")
    if not -1 < lam < 1:
        raise ConfigurationError("skewness parameter must lie in (-1, 1)")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return skew_t_ppf(rng.random(n), df, lam)


# ------------------------------------------------------------------ DGP


@dataclass(frozen=True)
class DgpConfig:
    betas: tuple = REFERENCE_BETAS
    theta: float = REFERENCE_THETA
    omega2: float = REFERENCE_OMEGA2
    k_lags: int = 24
    phi: float = 0.7
    mv_innovation: str = "skew_t"
    df: float = 7.0
    skew: float = -0.95
    n_daily: int = 5000
    days_per_month: int = 21
    seed: int = 0
    burn_daily: int = 500
    beta_x: float = 0.0
    x_noise: float = 0.3

    def __post_init__(self):
        if len(self.betas) < 1:
            raise ConfigurationError("betas needs at least the intercept")
        if abs(self.phi) >= 1:
            raise ConfigurationError("|phi| must be < 1")
        if self.mv_innovation not in ("skew_t", "normal"):
            raise ConfigurationError("mv_innovation is 'skew_t' or 'normal'")
        if not 1 <= self.days_per_month <= 28:
            raise ConfigurationError("days_per_month must be in 1..28")
        if self.betas[0] <= 0 or min(self.betas[1:], default=0) < 0 or self.theta < 0 or self.beta_x < 0:
            raise ConfigurationError("DGP coefficients must be nonnegative with beta0 > 0")
        rep = self.stationarity()
        if not rep.stationary:
            raise ConfigurationError(f"DGP is not stationary (spectral radius {rep.spectral_radius:.3f})")

    @property
    def q(self) -> int:
        return len(self.betas) - 1

    def stationarity(self) -> mfqarch.StationarityReport:
        # X_{i-1} = sigma_{i-1} * exp(u) feeds back like an extra first lag
        # with L2 norm exp(s^2/2) relative to |r_{i-1}|
        b = np.asarray(self.betas[1:], dtype=float).copy()
        if self.beta_x > 0:
            if b.size == 0:
                b = np.zeros(1)
            b[0] += self.beta_x * np.exp(0.5 * self.x_noise**2)
        return mfqarch.check_stationarity(b, self.theta, self.beta_x, 1.0)

    def truth(self, names: Sequence[str]) -> np.ndarray:
        coef = {"beta0": self.betas[0], "theta": self.theta, "omega2": self.omega2, "beta_x": self.beta_x}
        coef.update({f"beta{j}": b for j, b in enumerate(self.betas) if j > 0})
        return np.array([coef[n] for n in names])


def _month_start_dates(months: np.ndarray, days_per_month: int) -> np.ndarray:
    starts = months.astype("datetime64[D]")
    return (starts[:, None] + np.arange(days_per_month)).ravel()


def simulate_dgp(cfg: DgpConfig, rng=None) -> MixedFreqPanel:
    """Simulate one panel of ``cfg.n_daily`` retained days.

    Burn-in: ``2K`` monthly and ``burn_daily`` daily steps are discarded;
    returns start at zero.  The retained monthly series begins ``K`` months
    before the first simulated day.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    k = cfg.k_lags
    dpm = cfg.days_per_month
    total_days = cfg.n_daily + cfg.burn_daily
    day_months = -(-total_days // dpm)
    n_months = 2 * k + k + day_months
    if cfg.mv_innovation == "skew_t":
        e = sample_skew_t(cfg.df, cfg.skew, n_months, rng)
    else:
        e = rng.standard_normal(n_months)
    mv = np.empty(n_months)
    prev = 0.0
    for t in range(n_months):
        prev = cfg.phi * prev + e[t]
        mv[t] = prev
    mv = mv[2 * k :]  # drop monthly burn-in
    ws = np.abs(weighted_sums(mv, beta_weights(k, 1.0, cfg.omega2)))
    # day d lives in monthly position k + d // dpm
    month_pos = k + np.arange(day_months * dpm) // dpm
    lf = cfg.betas[0] + cfg.theta * ws[month_pos]

    z = rng.standard_normal(day_months * dpm)
    xnoise = rng.standard_normal(day_months * dpm) if cfg.beta_x > 0 else None
    b = np.asarray(cfg.betas[1:], dtype=float)
    q = b.shape[0]
    r = np.zeros(day_months * dpm + q)  # q leading zeros as initial values
    x = np.zeros(day_months * dpm + 1)
    s2 = cfg.x_noise**2
    for d in range(day_months * dpm):
        sig = lf[d]
        for j in range(q):
            sig += b[j] * abs(r[q + d - 1 - j])
        if xnoise is not None:
            sig += cfg.beta_x * x[d]
            x[d + 1] = sig * np.exp(cfg.x_noise * xnoise[d] - 0.5 * s2)
        r[q + d] = sig * z[d]
    r = r[q:]
    x = x[1:]

    months = np.datetime64("2000-01", "M") + np.arange(mv.shape[0])
    dates = _month_start_dates(months[k : k + day_months], dpm)
    keep = slice(cfg.burn_daily, cfg.burn_daily + cfg.n_daily)
    return panel_from_arrays(
        dates[keep],
        r[keep],
        months,
        mv,
        k,
        x=x[keep] if cfg.beta_x > 0 else None,
        meta={"seed": cfg.seed},
    )


# ------------------------------------------------------------ MC study


@dataclass(frozen=True, eq=False)
class McStudyResult:
    tau: float
    n_daily: int
    names: list
    truth: np.ndarray
    estimates: np.ndarray
    mse: np.ndarray
    nonrejection_pct: np.ndarray | None
    n_failed: int = 0
    p_values: np.ndarray | None = field(default=None, repr=False)
    cert_ok: np.ndarray | None = field(default=None, repr=False)

    @property
    def mean(self) -> np.ndarray:
        return self.estimates.mean(axis=0)


def _replicate(args):
    cfg, rep, tau_levels, q_max, grid, alpha, certify = args
    rng = np.random.default_rng([cfg.seed, rep])
    panel = simulate_dgp(cfg, rng)
    out = []
    for tau in tau_levels:
        spec = mfqarch.MfqSpec(q=cfg.q, k_lags=cfg.k_lags, use_midas=True, tau=tau, omega2_grid=grid)
        try:
            model = mfqarch.fit_profiled(panel, spec)
        except MfqVarError as exc:
            log.warning("replicate %d tau=%g failed: %s", rep, tau, exc)
            out.append(None)
            continue
        coef = mfqarch.rescale_to_structural(model, mfqarch.normal_quantile(tau))
        names = model.names
        # omega2 is not a quantile coefficient: its rescaling factor is 1
        est = np.insert(coef, names.index("theta") + 1, model.omega2_star)
        ok = True
        if certify:
            from . import qreg

            y, x = mfqarch.build_design(panel, spec, model.omega2_star, model.first_row)
            ok = qreg.optimality_certificate(x, y, model.theta_star, tau)
        pv = None
        if q_max > 0:
            try:
                pv = mfqarch.sequential_lag_test(panel, spec, tau, q_max, alpha).p_values
            except MfqVarError as exc:
                log.warning("lag test replicate %d tau=%g failed: %s", rep, tau, exc)
        out.append((est, pv, ok))
    return out


def run_mc_study(
    cfg: DgpConfig,
    r_reps: int,
    tau_levels: Sequence[float] = (0.01, 0.05, 0.10),
    q_max: int = 8,
    omega2_grid=None,
    alpha: float = 0.05,
    n_jobs: int = 1,
    certify: bool = False,
) -> list[McStudyResult]:
    """Replicate simulate -> profiled fit -> rescale [-> sequential LR test].

    Coefficients are divided by the standard normal ``tau``-quantile; the
    ``omega2`` estimate is reported as is.  Replicate ``r`` draws from
    ``default_rng([cfg.seed, r])`` so results do not depend on ``n_jobs``.
    ``q_max = 0`` skips the lag test.
    """
    grid = mfqarch.default_omega2_grid() if omega2_grid is None else np.asarray(omega2_grid)
    tasks = [(cfg, r, tuple(tau_levels), q_max, grid, alpha, certify) for r in range(r_reps)]
    if n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as ex:
            rows = list(ex.map(_replicate, tasks, chunksize=max(1, r_reps // (4 * n_jobs))))
    else:
        rows = [_replicate(t) for t in tasks]

    names = ["beta0", "theta", "omega2"] + [f"beta{j}" for j in range(1, cfg.q + 1)]
    truth = cfg.truth(names)
    results = []
    for k, tau in enumerate(tau_levels):
        got = [row[k] for row in rows if row[k] is not None]
        est = np.array([g[0] for g in got]).reshape(-1, len(names))
        pvs = [g[1] for g in got if g[1] is not None]
        pv = np.array(pvs) if pvs else None
        nonrej = 100.0 * np.mean(pv >= alpha, axis=0) if pv is not None else None
        results.append(
            McStudyResult(
                tau=float(tau),
                n_daily=cfg.n_daily,
                names=names,
                truth=truth,
                estimates=est,
                mse=np.mean((est - truth) ** 2, axis=0),
                nonrejection_pct=nonrej,
                n_failed=r_reps - len(got),
                p_values=pv,
                cert_ok=np.array([g[2] for g in got]),
            )
        )
    return results


# --------------------------------------------------------------- tables


def write_estimates_table(results: Sequence[McStudyResult], path) -> None:
    """Layout of the coefficient tables: one row per coefficient, then mean
    and MSE for each sample size (all results must share ``tau``)."""
    results = sorted(results, key=lambda r: r.n_daily)
    if len({r.tau for r in results}) != 1:
        raise ValueError("estimates table mixes tau levels")
    head = ["coef", "gamma0"]
    for r in results:
        head += [f"mean_N{r.n_daily}", f"mse_N{r.n_daily}"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(head)
        for k, name in enumerate(results[0].names):
            row = [name, f"{results[0].truth[k]:.3f}"]
            for r in results:
                row += [f"{r.mean[k]:.3f}", f"{r.mse[k]:.3f}"]
            w.writerow(row)


def write_lag_table(results: Sequence[McStudyResult], path) -> None:
    """Non-rejection percentages of ``beta_j = 0`` by (tau, N)."""
    results = [r for r in results if r.nonrejection_pct is not None]
    results = sorted(results, key=lambda r: (r.tau, r.n_daily))
    if not results:
        raise ValueError("no lag-test results to write")
    q_max = results[0].nonrejection_pct.shape[0]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["null"] + [f"tau{r.tau:g}_N{r.n_daily}" for r in results])
        for j in range(q_max):
            w.writerow([f"beta{j + 1}=0"] + [f"{r.nonrejection_pct[j]:.3f}" for r in results])


def study_config(cfg: DgpConfig, **changes) -> DgpConfig:
    return replace(cfg, **changes)
