"""Mixed-frequency quantile ARCH with an optional realized-measure term.

The conditional ``tau``-quantile of the daily return is linear in

    (1, |WS_{t-1}|, |r_{i-1,t}|, ..., |r_{i-q,t}|, |X_{i-1,t}|)

where ``WS_{t-1}`` is the Beta-weighted sum of the last ``K`` monthly values.
``WS`` depends on the weighting parameter ``omega2``, which is profiled out
over a grid: one check-loss fit per grid value, keeping the smallest loss.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import qreg
from .errors import (
    ConfigurationError,
    EstimationError,
    InsufficientHistoryError,
    RescaleError,
    SingularDesignError,
)
from .midas import beta_weights, weighted_sums
from .timegrid import MixedFreqPanel

__all__ = [
    "default_omega2_grid",
    "MfqSpec",
    "MfqArchModel",
    "StationarityReport",
    "LagTestResult",
    "build_design",
    "fit_profiled",
    "predict_var",
    "predict_path",
    "rescale_to_structural",
    "check_stationarity",
    "model_stationarity",
    "sequential_lag_test",
]

log = logging.getLogger(__name__)


def default_omega2_grid(size: int = 100, low: float = 1.001, high: float = 50.0) -> np.ndarray:
    return np.geomspace(low, high, size)


@dataclass(frozen=True, eq=False)
class MfqSpec:
    q: int = 1
    k_lags: int = 12
    use_midas: bool = True
    use_x: bool = False
    tau: float = 0.05
    omega2_grid: np.ndarray = field(default_factory=default_omega2_grid)

    def __post_init__(self):
        grid = np.sort(np.atleast_1d(np.asarray(self.omega2_grid, dtype=float)))
        if grid.size == 0 or np.any(grid < 1) or not np.all(np.isfinite(grid)):
            raise ConfigurationError("omega2 grid must be nonempty with values >= 1")
        object.__setattr__(self, "omega2_grid", grid)
        if self.q < 0:
            raise ConfigurationError("lag order q must be >= 0")
        if self.k_lags < 1:
            raise ConfigurationError("k_lags must be >= 1")
        if not 0 < self.tau < 1:
            raise ConfigurationError("tau must lie in (0, 1)")

    @property
    def min_row(self) -> int:
        """First daily position with every lag the design needs."""
        return max(self.q, 1 if self.use_x else 0)

    def names(self) -> list[str]:
        out = ["beta0"]
        if self.use_midas:
            out.append("theta")
        out += [f"beta{j}" for j in range(1, self.q + 1)]
        if self.use_x:
            out.append("beta_x")
        return out


@dataclass(frozen=True, eq=False)
class MfqArchModel:
    spec: MfqSpec
    theta_star: np.ndarray
    omega2_star: float | None
    loss_star: float
    grid_losses: np.ndarray
    first_row: int
    n_obs: int
    n_failed: int = 0
    fit: qreg.QuantileFit | None = field(default=None, repr=False)
    first_basis: np.ndarray | None = field(default=None, repr=False)

    @property
    def names(self) -> list[str]:
        return self.spec.names()

    def coef(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.theta_star)))


@dataclass(frozen=True)
class StationarityReport:
    spectral_radius: float
    stationary: bool
    z_r: float
    r_moment: int
    companion: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True)
class LagTestResult:
    selected_q: int
    p_values: np.ndarray
    statistics: np.ndarray
    losses: np.ndarray
    alpha: float
    tests: list = field(repr=False, default_factory=list)


# ------------------------------------------------------------------ design


def _ws_column(panel: MixedFreqPanel, k_lags: int, omega2: float, positions: np.ndarray) -> np.ndarray:
    ws = weighted_sums(panel.mv, beta_weights(k_lags, 1.0, omega2))
    col = ws[panel.month_of[positions]]
    if np.any(~np.isfinite(col)):
        raise InsufficientHistoryError(f"fewer than {k_lags} monthly lags at some design rows")
    return np.abs(col)


def _regressors(panel: MixedFreqPanel, spec: MfqSpec, omega2: float | None, positions: np.ndarray) -> np.ndarray:
    positions = np.asarray(positions, dtype=np.intp)
    if positions.size and positions.min() < spec.min_row:
        raise InsufficientHistoryError(
            f"position {positions.min()} lacks the {spec.min_row} daily lags the design needs"
        )
    if spec.use_x and not panel.has_x:
        raise ConfigurationError("the -X term needs a realized measure column in the daily data")
    cols = [np.ones(positions.shape[0])]
    if spec.use_midas:
        cols.append(_ws_column(panel, spec.k_lags, omega2, positions))
    absr = np.abs(panel.ret)
    for j in range(1, spec.q + 1):
        cols.append(absr[positions - j])
    if spec.use_x:
        cols.append(np.abs(panel.x[positions - 1]))
    return np.column_stack(cols)


def build_design(panel: MixedFreqPanel, spec: MfqSpec, omega2: float | None = None, first_row: int | None = None):
    """Response vector and design matrix over the estimation rows.

    Rows run from ``first_row`` (default: the first position with ``q``
    daily lags) to the end of the panel.  Columns: intercept, ``|WS|`` if
    ``use_midas``, ``q`` absolute return lags, ``|X|`` lagged one day if
    ``use_x``.
    """
    if spec.use_midas and omega2 is None:
        raise ConfigurationError("omega2 is required when the MIDAS term is on")
    start = spec.min_row if first_row is None else max(first_row, spec.min_row)
    if start >= len(panel):
        raise InsufficientHistoryError("panel is shorter than the lag order")
    rows = np.arange(start, len(panel))
    return panel.ret[rows].copy(), _regressors(panel, spec, omega2, rows)


# -------------------------------------------------------------- estimation


def fit_profiled(
    panel: MixedFreqPanel,
    spec: MfqSpec,
    first_row: int | None = None,
    start_basis=None,
) -> MfqArchModel:
    """Profile ``omega2`` over ``spec.omega2_grid``.

    Grid points are visited in increasing order and each fit starts from the
    previous optimal basis.  The smallest loss wins; exact ties go to the
    smallest ``omega2``.  Fits that fail are skipped and counted.
    """
    start = spec.min_row if first_row is None else max(first_row, spec.min_row)
    grid = spec.omega2_grid if spec.use_midas else np.array([np.nan])
    losses = np.full(grid.shape[0], np.inf)
    best = None
    basis = start_basis
    first_basis = None
    n_failed = 0
    for b, om in enumerate(grid):
        try:
            y, x = build_design(panel, spec, None if not spec.use_midas else om, start)
            f = qreg.fit(y, x, spec.tau, basis=basis)
        except SingularDesignError:
            n_failed += 1
            continue
        if not f.converged:
            n_failed += 1
            continue
        basis = f.basis
        if first_basis is None:
            first_basis = f.basis
        losses[b] = f.loss
        if best is None or f.loss < best[1].loss:
            best = (b, f)
    if best is None:
        raise EstimationError("every grid fit failed")
    if n_failed:
        warnings.warn(f"{n_failed} of {grid.shape[0]} grid fits failed", RuntimeWarning, stacklevel=2)
    b, f = best
    return MfqArchModel(
        spec=spec,
        theta_star=f.theta.copy(),
        omega2_star=float(grid[b]) if spec.use_midas else None,
        loss_star=f.loss,
        grid_losses=losses,
        first_row=start,
        n_obs=f.n_obs,
        n_failed=n_failed,
        fit=f,
        first_basis=first_basis,
    )


def predict_path(model: MfqArchModel, panel: MixedFreqPanel, positions) -> np.ndarray:
    """VaR forecasts ``x_pos' theta*`` for an array of daily positions.

    The regressor at ``pos`` only uses returns before ``pos`` and monthly
    values before the month of ``pos``.
    """
    positions = np.atleast_1d(np.asarray(positions, dtype=np.intp))
    return _regressors(panel, model.spec, model.omega2_star, positions) @ model.theta_star


def predict_var(model: MfqArchModel, panel: MixedFreqPanel, pos: int) -> float:
    return float(predict_path(model, panel, [pos])[0])


# ------------------------------------------------------------ diagnostics


def rescale_to_structural(model_or_theta, innovation_quantile: float) -> np.ndarray:
    """Divide quantile coefficients by ``F^-1(tau)`` of the innovation law."""
    theta = model_or_theta.theta_star if isinstance(model_or_theta, MfqArchModel) else model_or_theta
    if abs(innovation_quantile) < 1e-12:
        raise RescaleError("innovation quantile is zero; coefficients are not identified")
    return np.asarray(theta, dtype=float) / innovation_quantile


def check_stationarity(structural_betas, theta: float = 0.0, beta_x: float = 0.0, z_r: float = 1.0, r_moment: int = 2) -> StationarityReport:
    """Spectral radius of the ``(q+2) x (q+2)`` companion matrix.

    Top row ``z_r * (beta_1..beta_q, theta, beta_x)``, an identity shift
    block below it and two zero rows for the exogenous states.  ``z_r`` is
    ``(E|z|^r)^(1/r)``: 1 for ``r=2`` with unit-variance innovations,
    ``sqrt(2/pi)`` for ``r=1`` with standard normal ones.
    """
    betas = np.atleast_1d(np.asarray(structural_betas, dtype=float))
    if not z_r > 0:
        raise ValueError("z_r must be positive")
    q = betas.shape[0]
    dim = q + 2
    a = np.zeros((dim, dim))
    if q > 0:
        a[0, :q] = z_r * betas
        a[0, q] = z_r * theta
        a[0, q + 1] = z_r * beta_x
        for k in range(1, q):
            a[k, k - 1] = 1.0
    radius = float(np.max(np.abs(np.linalg.eigvals(a)))) if q > 0 else 0.0
    return StationarityReport(radius, radius < 1.0, float(z_r), int(r_moment), a)


def model_stationarity(model: MfqArchModel, innovation_quantile: float, z_r: float = 1.0, r_moment: int = 2):
    """Stationarity of a fitted model after rescaling; ``None`` if any beta < 0."""
    coef = dict(zip(model.names, rescale_to_structural(model, innovation_quantile)))
    betas = [coef[f"beta{j}"] for j in range(1, model.spec.q + 1)]
    th = coef.get("theta", 0.0)
    bx = coef.get("beta_x", 0.0)
    if min(betas + [th, bx], default=0.0) < 0:
        warnings.warn("negative rescaled coefficient; stationarity check skipped", RuntimeWarning, stacklevel=2)
        return None
    return check_stationarity(betas, th, bx, z_r, r_moment)


def sequential_lag_test(
    panel: MixedFreqPanel,
    model_template: MfqSpec,
    tau: float | None = None,
    q_max: int = 8,
    alpha: float = 0.05,
    sparsity: str = "scale",
) -> LagTestResult:
    """Sequential LR tests of ``beta_j = 0`` for ``j = 1..q_max``.

    Step ``j`` compares the profiled models with ``j-1`` and ``j`` return
    lags on a common sample (rows from ``q_max`` on).  ``selected_q`` is
    ``j-1`` for the first ``j`` whose p-value reaches ``alpha``, or ``q_max``
    if every step rejects.

    The sparsity comes from the unrestricted fit.  ``sparsity="scale"``
    (default) accounts for the conditional scale of the quantile ARCH
    residuals, see :func:`qreg.scale_adjusted_sparsity`; ``"iid"`` uses the
    plain residual sparsity, which over-rejects when the scale varies a lot.
    """
    if q_max < 1:
        raise ConfigurationError("q_max must be >= 1")
    if sparsity not in ("scale", "iid"):
        raise ConfigurationError("sparsity is 'scale' or 'iid'")
    tau = model_template.tau if tau is None else tau
    first = max(q_max, 1 if model_template.use_x else 0)
    models = []
    basis = None
    for j in range(q_max + 1):
        spec = replace(model_template, q=j, tau=tau)
        if basis is not None:
            # grow the previous basis by the best-fitting non-basic row
            prev = models[-1]
            resid = np.abs(prev.fit.residuals) if prev.fit is not None else None
            if resid is not None:
                resid = resid.copy()
                resid[prev.first_basis] = np.inf
                basis = np.r_[prev.first_basis, int(np.argmin(resid))]
        models.append(fit_profiled(panel, spec, first_row=first, start_basis=basis))
        basis = models[-1].first_basis
    pvals = np.empty(q_max)
    lrs = np.empty(q_max)
    tests = []
    for j in range(1, q_max + 1):
        mu = models[j]
        ru, rr = mu.fit, models[j - 1].fit
        if sparsity == "iid":
            s = qreg.sparsity(ru.residuals, tau)
        else:
            _, x = build_design(panel, mu.spec, mu.omega2_star, mu.first_row)
            s = qreg.scale_adjusted_sparsity(x, ru.residuals, x @ mu.theta_star, tau, mu.names.index(f"beta{j}"))
        res = qreg.lr_test(rr, ru, s)
        tests.append(res)
        pvals[j - 1] = res.p_value
        lrs[j - 1] = res.statistic
    keep = np.flatnonzero(pvals >= alpha)
    selected = int(keep[0]) if keep.size else q_max
    return LagTestResult(
        selected_q=selected,
        p_values=pvals,
        statistics=lrs,
        losses=np.array([m.loss_star for m in models]),
        alpha=alpha,
        tests=tests,
    )


def normal_quantile(tau: float) -> float:
    return float(stats.norm.ppf(tau))
