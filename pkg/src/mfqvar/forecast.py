"""Rolling-window one-step-ahead VaR forecasts for every supported model.

Refits happen on the first out-of-sample day and every ``stride`` days after
it, each on the ``window`` days strictly before the refit day.  Between
refits the model's filter keeps running on realized returns with frozen
parameters, so the forecast for day ``d`` never uses data from ``d`` onward.
"""
from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import competitors, mfqarch
from .backtest import VarTrack
from .errors import ConfigurationError, DataError, EstimationError, MfqVarError
from .mfqarch import MfqSpec
from .timegrid import MixedFreqPanel

__all__ = ["MODEL_NAMES", "ModelSettings", "RollingResult", "rolling_forecast", "select_lag_order"]

log = logging.getLogger(__name__)

MODEL_NAMES = (
    "mfqarchx",
    "mfqarch",
    "qarch",
    "sav",
    "as",
    "ig",
    "garch",
    "garch_t",
    "gjr",
    "gjr_t",
    "riskmetrics",
    "garch_midas",
)
MF_MODELS = ("mfqarchx", "mfqarch", "qarch")
LF_MODELS = ("mfqarchx", "mfqarch", "garch_midas")


@dataclass(frozen=True)
class ModelSettings:
    """Per-model options; unknown models and nonsense values are rejected early."""

    name: str
    q: int = 1
    k_lags: int = 12
    omega2_grid: np.ndarray | None = None
    caviar_starts: int = 10_000
    caviar_refine: int = 10

    def __post_init__(self):
        if self.name not in MODEL_NAMES:
            raise ConfigurationError(f"unknown model {self.name!r}; choose from {', '.join(MODEL_NAMES)}")
        if self.q < 0:
            raise ConfigurationError("q must be >= 0")
        if self.k_lags < 1:
            raise ConfigurationError("k_lags must be >= 1")
        if self.caviar_starts < 1 or self.caviar_refine < 1:
            raise ConfigurationError("CAViaR start counts must be positive")

    def mf_spec(self, tau: float) -> MfqSpec:
        kw = {} if self.omega2_grid is None else {"omega2_grid": self.omega2_grid}
        return MfqSpec(
            q=self.q,
            k_lags=self.k_lags,
            use_midas=self.name != "qarch",
            use_x=self.name == "mfqarchx",
            tau=tau,
            **kw,
        )


@dataclass
class RollingResult:
    track: VarTrack
    n_refits: int
    n_failed: int
    refit_positions: list = field(default_factory=list)


# ------------------------------------------------------------ fitted adapters


class _Fitted:
    """A fitted model plus the window start it was estimated from."""

    def __init__(self, model, start: int):
        self.model = model
        self.start = start

    def predict(self, panel: MixedFreqPanel, positions: np.ndarray, tau: float) -> np.ndarray:
        raise NotImplementedError


class _MfFitted(_Fitted):
    def predict(self, panel, positions, tau):
        return mfqarch.predict_path(self.model, panel, positions)


class _CaviarFitted(_Fitted):
    def predict(self, panel, positions, tau):
        path = self.model.var_path(panel.ret[self.start : positions[-1]])
        return path[positions - self.start]


class _VolFitted(_Fitted):
    def predict(self, panel, positions, tau):
        h = self.model.variance_path(panel.ret[self.start : positions[-1]])
        return competitors.var_garch(self.model, h[positions - self.start], tau)


class _MidasFitted(_Fitted):
    def predict(self, panel, positions, tau):
        g = self.model.variance_path(panel, self.start, int(positions[-1]))
        return competitors.var_garch("normal", g[positions - self.start], tau)


def _fit(settings: ModelSettings, panel: MixedFreqPanel, start: int, stop: int, tau: float, rng) -> _Fitted:
    name = settings.name
    ret = panel.ret[start:stop]
    if name in MF_MODELS:
        spec = settings.mf_spec(tau)
        if spec.use_x and not panel.has_x:
            raise DataError("mfqarchx needs a daily x column")
        return _MfFitted(mfqarch.fit_profiled(panel.slice_days(start, stop), spec), start)
    if name in ("sav", "as", "ig"):
        m = competitors.fit_caviar(ret, tau, name.upper(), settings.caviar_starts, settings.caviar_refine, rng)
        return _CaviarFitted(m, start)
    if name in ("garch", "garch_t", "gjr", "gjr_t"):
        family = "GJR" if name.startswith("gjr") else "GARCH"
        dist = "student_t" if name.endswith("_t") else "normal"
        return _VolFitted(competitors.fit_garch(ret, family, dist, tau), start)
    if name == "riskmetrics":
        return _VolFitted(competitors.fit_riskmetrics(ret, tau), start)
    return _MidasFitted(competitors.fit_garch_midas(panel, settings.k_lags, start, stop, tau), start)


def _model_seed(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


def select_lag_order(panel: MixedFreqPanel, settings: ModelSettings, tau: float, q_max: int = 8,
                     alpha: float = 0.05) -> mfqarch.LagTestResult:
    """Sequential LR lag selection for an MF-Q-ARCH family model."""
    if settings.name not in MF_MODELS:
        raise ConfigurationError(f"lag selection applies to {MF_MODELS}, not {settings.name!r}")
    return mfqarch.sequential_lag_test(panel, settings.mf_spec(tau), tau, q_max, alpha)


def rolling_forecast(
    panel: MixedFreqPanel,
    settings: ModelSettings,
    tau: float,
    oos_start: int,
    window: int = 1500,
    stride: int = 10,
    seed: int = 0,
    oos_stop: int | None = None,
    lf_var: str = "",
) -> RollingResult:
    """One-step-ahead VaR for panel positions ``oos_start .. oos_stop-1``.

    Parameters
    ----------
    panel : MixedFreqPanel
    settings : ModelSettings
    tau : float
    oos_start : int
        First forecast position; at least ``window`` earlier days must exist.
    window, stride : int
        Rolling estimation window length and refit cadence in days.
    seed : int
        Seeds the CAViaR random starts (one stream per model name).
    oos_stop : int, optional
        One past the last forecast position, default ``len(panel)``.
    lf_var : str
        Label of the monthly variable, stored on the track of MIDAS models.

    Notes
    -----
    A failed refit keeps the previous parameters (filters still run on the
    new data) and is logged; a failure of the very first fit raises.
    """
    n = len(panel)
    oos_stop = n if oos_stop is None else oos_stop
    if window < 300:
        raise ConfigurationError("window must be at least 300 days")
    if stride < 1:
        raise ConfigurationError("stride must be >= 1")
    if not 0 < oos_start < oos_stop <= n:
        raise ConfigurationError("out-of-sample range is empty or outside the data")
    if oos_start < window:
        raise DataError(f"only {oos_start} days before the out-of-sample start; window needs {window}")
    rng = _model_seed(seed, settings.name)
    var = np.empty(oos_stop - oos_start)
    current = None
    n_refits = n_failed = 0
    refits = []
    for d in range(oos_start, oos_stop, stride):
        e = min(d + stride, oos_stop)
        try:
            current = _fit(settings, panel, d - window, d, tau, rng)
            n_refits += 1
            refits.append(d)
        except MfqVarError as exc:
            if current is None:
                raise EstimationError(f"{settings.name}: first fit failed: {exc}") from exc
            n_failed += 1
            log.warning("%s: refit at position %d failed (%s); keeping previous parameters",
                        settings.name, d, exc)
        var[d - oos_start : e - oos_start] = current.predict(panel, np.arange(d, e), tau)
    if not np.all(np.isfinite(var)):
        raise EstimationError(f"{settings.name}: non-finite VaR forecast")
    sl = slice(oos_start, oos_stop)
    track = VarTrack(panel.dates[sl], panel.ret[sl], var, tau, settings.name,
                     lf_var if settings.name in LF_MODELS else "")
    return RollingResult(track, n_refits, n_failed, refits)
