"""Linear quantile regression under the check loss.

A cold fit runs a Frisch-Newton (primal-dual, Mehrotra predictor-corrector)
interior point method, snaps the iterate onto the nearest vertex and then
descends over vertices until the dual weights certify optimality.  A fit
can instead start from a previous basis, which is what makes profiling over
a grid of MIDAS weights cheap.  HiGHS is the last resort.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg, optimize, sparse, stats

from ._fnkernel import frisch_newton
from .errors import IncompatibleFitsError, SingularDesignError, ZeroSparsityError

__all__ = [
    "QuantileFit",
    "LrTestResult",
    "check_loss",
    "fit",
    "optimality_certificate",
    "hall_sheather_bandwidth",
    "sparsity",
    "scale_adjusted_sparsity",
    "lr_test",
]

@dataclass(frozen=True)
class QuantileFit:
    tau: float
    theta: np.ndarray
    loss: float
    n_obs: int
    converged: bool
    residuals: np.ndarray = field(repr=False, compare=False)
    method: str = "interior-point"
    basis: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n_params(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class LrTestResult:
    statistic: float
    df: int
    p_value: float
    sparsity: float
    v_restricted: float
    v_unrestricted: float


def check_loss(u, tau: float):
    """Check (pinball) loss ``u * (tau - 1{u < 0})``; works elementwise."""
    u = np.asarray(u, dtype=float)
    out = u * (tau - (u < 0))
    return float(out) if out.ndim == 0 else out


def _total_loss(resid: np.ndarray, tau: float) -> float:
    return float(np.sum(resid * (tau - (resid < 0))))


def _check_rank(x: np.ndarray) -> None:
    norms = np.sqrt(np.einsum("ij,ij->j", x, x))
    if np.any(norms == 0):
        raise SingularDesignError("design matrix has an all-zero column")
    g = (x.T @ x) / np.outer(norms, norms)
    ev = np.linalg.eigvalsh(g)
    if ev[0] <= 1e-12 * ev[-1]:
        raise SingularDesignError(
            f"design matrix is rank deficient (eigenvalue ratio {ev[0] / ev[-1]:.2e})"
        )


def _frisch_newton(x: np.ndarray, y: np.ndarray, tau: float, tol: float, max_iter: int):
    """Interior point solution of the dual LP.

    Solves ``max y'a  s.t.  X'a = (1-tau) X'1, 0 <= a <= 1`` in the shifted
    form of Koenker and Portnoy; returns (theta, converged, iterations).
    """
    try:
        theta, ok, it = frisch_newton(np.ascontiguousarray(x), y, tau, tol, max_iter)
    except Exception:  # singular normal equations inside the kernel
        return np.full(x.shape[1], np.nan), False, 0
    return theta, bool(ok), int(it)


def _zero_tol(x: np.ndarray, y: np.ndarray, theta: np.ndarray) -> float:
    mag = np.abs(y).max() + np.abs(x).max() * np.abs(theta).sum()
    return 64 * np.finfo(float).eps * max(1.0, float(mag))


def optimality_certificate(x, y, theta, tau: float, atol: float = 1e-9) -> bool:
    """Exact first-order optimality check for a check-loss fit.

    ``theta`` is optimal iff there are weights ``v_i`` in ``[tau-1, tau]`` on
    the zero residuals such that ``sum_{r!=0} x_i psi_i + sum_{r=0} x_i v_i = 0``
    with ``psi_i = tau - 1{r_i < 0}``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    theta = np.asarray(theta, dtype=float)
    resid = y - x @ theta
    zero = np.abs(resid) <= _zero_tol(x, y, theta)
    psi = tau - (resid[~zero] < 0)
    target = -(x[~zero].T @ psi)
    xh = x[zero]
    lo, hi = tau - 1.0, tau
    slack = atol * max(1.0, float(np.abs(target).max(initial=0.0)))
    if xh.shape[0] == 0:
        return bool(np.all(np.abs(target) <= slack))
    v, *_ = np.linalg.lstsq(xh.T, target, rcond=None)
    ok_eq = np.all(np.abs(xh.T @ v - target) <= slack)
    if ok_eq and np.all(v >= lo - atol) and np.all(v <= hi + atol):
        return True
    # more zero residuals than parameters: the weights are not unique
    res = optimize.linprog(
        np.zeros(xh.shape[0]),
        A_eq=xh.T,
        b_eq=target,
        bounds=[(lo, hi)] * xh.shape[0],
        method="highs",
    )
    return bool(res.status == 0)


def _basis_rows(x: np.ndarray, order: np.ndarray, p: int) -> np.ndarray | None:
    """First ``p`` linearly independent rows of ``x`` taken in ``order``."""
    head = order[:p]
    if np.linalg.matrix_rank(x[head]) == p:
        return head
    cand = order[: min(len(order), 4 * p)]
    _, _, piv = linalg.qr(x[cand].T, pivoting=True, mode="economic")
    rows = cand[piv[:p]]
    if np.linalg.matrix_rank(x[rows]) == p:
        return rows
    return None


def _first_crossing(cand, t_break, weight, slope, head=64):
    """Breakpoint where the edge slope turns nonnegative (weighted median).

    Only the ``head`` smallest breakpoints are sorted first; the slope
    almost always changes sign among them.
    """
    if cand.size > head:
        part = cand[np.argpartition(t_break[cand], head - 1)[:head]]
        order = part[np.argsort(t_break[part], kind="stable")]
        cum = slope + np.cumsum(weight[order])
        hit = int(np.searchsorted(cum >= 0.0, True))
        if hit < order.size:
            return hit, order
    order = cand[np.argsort(t_break[cand], kind="stable")]
    cum = slope + np.cumsum(weight[order])
    hit = int(np.searchsorted(cum >= 0.0, True))
    return (hit, order) if hit < order.size else (None, order)


def _pivot_to_optimum(x, y, tau, basis, max_pivots):
    """Exact descent over vertices starting from ``basis`` (row indices).

    Each step drops one basic observation whose dual weight leaves
    ``[tau-1, tau]`` and performs an exact line search along the resulting
    edge, stopping at the weighted-median breakpoint.  Returns
    ``(theta, basis)`` or ``None`` if the basis is singular or the pivot
    budget runs out.
    """
    n, p = x.shape
    basis = np.array(basis, dtype=np.intp)
    is_basic = np.zeros(n, dtype=bool)
    eps = 1e-12
    for _ in range(max_pivots + 1):
        xh = x[basis]
        try:
            lu = linalg.lu_factor(xh, check_finite=False)
        except (linalg.LinAlgError, ValueError):
            return None
        if not np.all(np.isfinite(lu[0])) or np.min(np.abs(np.diag(lu[0]))) < 1e-13 * np.abs(lu[0]).max():
            return None
        theta = linalg.lu_solve(lu, y[basis], check_finite=False)
        resid = y - x @ theta
        is_basic[:] = False
        is_basic[basis] = True
        resid[is_basic] = 0.0
        psi = np.where(resid < 0, tau - 1.0, tau)
        psi[is_basic] = 0.0
        v = linalg.lu_solve(lu, -(x.T @ psi), trans=1, check_finite=False)
        low = v < tau - 1.0 - eps
        high = v > tau + eps
        if not (low.any() or high.any()):
            return theta, basis
        viol = np.where(low, tau - 1.0 - v, np.where(high, v - tau, 0.0))
        j = int(np.argmax(viol))
        sigma = 1.0 if low[j] else -1.0
        slope = sigma * v[j] + (1.0 - tau if sigma > 0 else tau)
        e = np.zeros(p)
        e[j] = sigma
        d = linalg.lu_solve(lu, e, check_finite=False)
        g = x @ d
        g[is_basic] = 0.0
        # nonbasic residual r_i - t g_i hits zero at t_i = r_i / g_i > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            t_break = resid / g
        cand = np.flatnonzero((g != 0.0) & (t_break >= 0.0) & ~is_basic)
        if cand.size == 0:
            return None
        hit, order = _first_crossing(cand, t_break, np.abs(g), slope)
        if hit is None:
            return None
        basis = basis.copy()
        basis[j] = order[hit]
    return None


def _solve_vertex(x, y, tau, start_basis, max_pivots):
    out = _pivot_to_optimum(x, y, tau, start_basis, max_pivots)
    if out is None:
        return None
    theta, basis = out
    return theta, basis


def _highs(x, y, tau):
    n, p = x.shape
    eye = sparse.identity(n, format="csr")
    a_eq = sparse.hstack([sparse.csr_matrix(x), eye, -eye], format="csr")
    cost = np.concatenate([np.zeros(p), np.full(n, tau), np.full(n, 1.0 - tau)])
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    res = optimize.linprog(cost, A_eq=a_eq, b_eq=y, bounds=bounds, method="highs")
    return res.x[:p] if res.status == 0 else None, res.status == 0


def fit(y, x, tau: float, tol: float = 1e-8, max_iter: int = 200, basis=None) -> QuantileFit:
    """Linear quantile regression of ``y`` on ``x`` at level ``tau``.

    Parameters
    ----------
    y : array_like, shape (n,)
    x : array_like, shape (n, p)
        Design matrix; include a column of ones for an intercept.
    tau : float
        Quantile level in (0, 1).
    tol : float
        Relative duality-gap tolerance of the interior point iterations.
    max_iter : int
        Iteration cap for the interior point method.
    basis : array_like of int, optional
        Row indices of a previous optimal basis.  When given, the search
        starts from that vertex instead of the interior point path.

    Returns
    -------
    QuantileFit
        ``converged`` is False only when neither the vertex search nor the
        HiGHS fallback produced an optimum.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    y = np.ascontiguousarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, p = x.shape
    if y.shape != (n,):
        raise ValueError("y and x have incompatible shapes")
    if n <= p:
        raise ValueError(f"need more observations than parameters (n={n}, p={p})")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
        raise ValueError("non-finite entries in quantile regression data")
    _check_rank(x)

    max_pivots = 50 * p
    out = None
    if basis is not None:
        basis = np.asarray(basis, dtype=np.intp)
        if basis.shape == (p,) and np.unique(basis).size == p and basis.max() < n:
            out = _solve_vertex(x, y, tau, basis, max_pivots)
    method = "simplex-warm"
    if out is None:
        method = "interior-point"
        theta, _, _ = _frisch_newton(x, y, tau, tol, max_iter)
        if np.all(np.isfinite(theta)):
            order = np.argsort(np.abs(y - x @ theta), kind="stable")
            rows = _basis_rows(x, order, p)
            if rows is not None:
                out = _solve_vertex(x, y, tau, rows, max_pivots)
    if out is not None:
        theta, basis = out
        converged = True
    else:
        alt, converged = _highs(x, y, tau)
        method = "highs"
        theta = alt if converged else np.full(p, np.nan)
        basis = None
        if converged:
            rows = _basis_rows(x, np.argsort(np.abs(y - x @ theta), kind="stable"), p)
            basis = rows
    resid = y - x @ theta
    return QuantileFit(
        tau=float(tau),
        theta=theta,
        loss=_total_loss(resid, tau),
        n_obs=n,
        converged=bool(converged),
        residuals=resid,
        method=method,
        basis=basis,
    )


def hall_sheather_bandwidth(n: int, tau: float, alpha: float = 0.05) -> float:
    z = stats.norm.ppf(tau)
    za = stats.norm.ppf(1.0 - alpha / 2.0)
    core = 1.5 * stats.norm.pdf(z) ** 2 / (2.0 * z**2 + 1.0)
    return n ** (-1.0 / 3.0) * za ** (2.0 / 3.0) * core ** (1.0 / 3.0)


def _empirical_quantile_fn(values: np.ndarray) -> Callable[[float], float]:
    srt = np.sort(np.asarray(values, dtype=float))
    m = srt.shape[0]

    def quantile(level: float) -> float:
        # inf{v : F_n(v) >= level}
        k = int(np.ceil(level * m - 1e-12)) - 1
        return float(srt[min(max(k, 0), m - 1)])

    return quantile


def sparsity(residual_quantile_fn, tau: float, n: int | None = None, alpha: float = 0.05) -> float:
    """Siddiqui difference-quotient estimate of the sparsity ``1/f(F^-1(tau))``.

    ``residual_quantile_fn`` is either a callable returning the empirical
    residual quantile at a level, or the residual vector itself.  The window
    ``tau +/- h`` uses the Hall-Sheather bandwidth and is clamped to
    ``[1/n, 1 - 1/n]``.
    """
    if not callable(residual_quantile_fn):
        resid = np.asarray(residual_quantile_fn, dtype=float)
        n = resid.shape[0] if n is None else n
        residual_quantile_fn = _empirical_quantile_fn(resid)
    if n is None or n < 2:
        raise ValueError("sample size n >= 2 is required")
    h = hall_sheather_bandwidth(n, tau, alpha)
    lo = max(tau - h, 1.0 / n)
    hi = min(tau + h, 1.0 - 1.0 / n)
    if hi <= lo:
        raise ZeroSparsityError("empty sparsity window after clamping")
    s = (residual_quantile_fn(hi) - residual_quantile_fn(lo)) / (hi - lo)
    if not s > 0:
        raise ZeroSparsityError("residual quantiles coincide; sparsity is zero")
    return float(s)


def scale_adjusted_sparsity(x, residuals, fitted, tau: float, column: int, alpha: float = 0.05) -> float:
    """Sparsity for the LR test of one coefficient under scale heterogeneity.

    In a linear quantile ARCH model ``u_t = sigma_t (eps_t - q)`` with
    ``sigma_t`` proportional to the fitted quantile ``v_t = |x_t' theta|``, so
    the residual density at zero varies with ``1 / v_t``.  Then
    ``2 (V_R - V_U) / (tau (1 - tau))`` is ``s_eff`` times a chi2(1) with

        s_eff = s_e [W^-1 X'X W^-1]_kk / [W^-1]_kk,   W = X' diag(1/v) X,

    where ``s_e`` is the Siddiqui sparsity of the standardized residuals
    ``u_t / v_t`` (Koenker and Zhao, 1996).  With a constant ``v_t`` this
    reduces to the plain residual sparsity.

    Parameters
    ----------
    x : array_like, shape (n, p)
        Design of the unrestricted model.
    residuals, fitted : array_like, shape (n,)
        Unrestricted residuals and fitted quantiles ``x @ theta``.
    tau : float
    column : int
        Index of the coefficient set to zero under the null.
    """
    x = np.asarray(x, dtype=float)
    v = np.abs(np.asarray(fitted, dtype=float))
    med = float(np.median(v))
    if not med > 0:
        raise ZeroSparsityError("fitted quantiles are all zero")
    v = np.maximum(v, 1e-3 * med)  # guard the few rows where the fit crosses zero
    s_e = sparsity(np.asarray(residuals, dtype=float) / v, tau, alpha=alpha)
    n = x.shape[0]
    w_inv = np.linalg.inv((x / v[:, None]).T @ x / n)
    sandwich = w_inv @ (x.T @ x / n) @ w_inv
    return float(s_e * sandwich[column, column] / w_inv[column, column])


def lr_test(fit_restricted: QuantileFit, fit_unrestricted: QuantileFit, sparsity: float) -> LrTestResult:
    """Likelihood-ratio type test of one exclusion restriction.

    ``2 (V_R - V_U) / (tau (1 - tau) s)``, clamped at zero, against chi2(1).
    """
    fr, fu = fit_restricted, fit_unrestricted
    if fr.tau != fu.tau or fr.n_obs != fu.n_obs:
        raise IncompatibleFitsError("fits differ in tau or sample size")
    if fr.n_params != fu.n_params - 1:
        raise IncompatibleFitsError("restricted model must drop exactly one coefficient")
    if not sparsity > 0:
        raise ZeroSparsityError("sparsity must be positive")
    tau = fu.tau
    stat = max(0.0, 2.0 * (fr.loss - fu.loss) / (tau * (1.0 - tau) * sparsity))
    return LrTestResult(
        statistic=stat,
        df=1,
        p_value=float(stats.chi2.sf(stat, 1)),
        sparsity=float(sparsity),
        v_restricted=fr.loss,
        v_unrestricted=fu.loss,
    )
