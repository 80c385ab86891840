"""Model Confidence Set on the asymmetric quantile loss.

Equal predictive ability is tested with the semi-quadratic statistic

    T_SQ = sum_{l<k} dbar_lk^2 / var(dbar_lk)

(unordered pairs) whose null distribution and variances come from a circular
block bootstrap of the loss matrix.  On rejection the model with the largest
standardized excess loss over the set average is removed.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .backtest import VarTrack
from .errors import DataError

__all__ = ["LossPanel", "McsReport", "quantile_loss_series", "loss_panel", "run_mcs"]

DEFAULT_LEVELS = (0.75, 0.90)


def quantile_loss_series(track: VarTrack) -> np.ndarray:
    """``(tau - 1{r < VaR}) (r - VaR)``, elementwise and nonnegative."""
    u = track.ret - track.var
    return (track.tau - (u < 0)) * u


@dataclass(frozen=True, eq=False)
class LossPanel:
    models: list
    losses: np.ndarray
    tau: float
    lf_vars: list = field(default_factory=list)

    def __post_init__(self):
        losses = np.asarray(self.losses, dtype=float)
        if losses.ndim != 2 or losses.shape[1] != len(self.models):
            raise DataError("loss matrix must be n_days x n_models")
        if not np.all(np.isfinite(losses)):
            raise DataError("non-finite losses")
        object.__setattr__(self, "losses", losses)


def loss_panel(tracks: Sequence[VarTrack]) -> LossPanel:
    """Stack tracks that share dates and ``tau``."""
    if len(tracks) == 0:
        raise DataError("no tracks")
    ref = tracks[0]
    for tr in tracks[1:]:
        if tr.tau != ref.tau:
            raise DataError("tracks use different tau levels")
        if len(tr) != len(ref) or np.any(tr.dates != ref.dates):
            raise DataError(f"track {tr.model!r} is not aligned with {ref.model!r}")
    return LossPanel(
        [t.model for t in tracks],
        np.column_stack([quantile_loss_series(t) for t in tracks]),
        ref.tau,
        [t.lf_var for t in tracks],
    )


@dataclass(frozen=True)
class McsReport:
    models: list
    survivors: dict
    mean_loss: dict
    elimination_order: list
    pvalues: dict
    n_boot: int
    block_len: int
    seed: int
    lf_vars: dict = field(default_factory=dict)

    def as_text(self) -> str:
        levels = sorted(self.survivors)
        head = ["model", "lf_var", "mean_loss", "mcs_p"] + [f"in_{lv:g}" for lv in levels]
        rows = []
        for m in self.models:
            rows.append([m, self.lf_vars.get(m, ""), f"{self.mean_loss[m]:.4f}", f"{self.pvalues[m]:.3f}"]
                        + ["*" if m in self.survivors[lv] else "" for lv in levels])
        widths = [max(len(h), *(len(r[k]) for r in rows)) for k, h in enumerate(head)]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        out = [
            "# T_SQ over unordered model pairs; circular block bootstrap "
            f"(block {self.block_len}, {self.n_boot} replicates, seed {self.seed})",
            fmt.format(*head),
            fmt.format(*("-" * w for w in widths)),
        ]
        out += [fmt.format(*r) for r in rows]
        return "\n".join(out)

    def to_csv(self) -> str:
        levels = sorted(self.survivors)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "lf_var", "mean_loss", "mcs_p"] + [f"in_{lv:g}" for lv in levels])
        for m in self.models:
            w.writerow([m, self.lf_vars.get(m, ""), f"{self.mean_loss[m]:.6f}", f"{self.pvalues[m]:.4f}"]
                       + [int(m in self.survivors[lv]) for lv in levels])
        return buf.getvalue()


def _bootstrap_means(losses: np.ndarray, n_boot: int, block_len: int, seed: int) -> np.ndarray:
    """Circular block bootstrap means, shape ``(n_boot, M)``.

    Block starts come from one generator seeded by ``seed`` and drawn in
    replicate order, so the result does not depend on how it is consumed.
    """
    n, m = losses.shape
    block_len = min(block_len, n)
    nb = -(-n // block_len)
    last = n - (nb - 1) * block_len
    rng = np.random.default_rng(seed)
    starts = rng.integers(0, n, size=(n_boot, nb))
    ext = np.vstack([losses, losses[:block_len]])
    csum = np.vstack([np.zeros((1, m)), np.cumsum(ext, axis=0)])
    idx = np.arange(n)
    full = csum[idx + block_len] - csum[idx]
    tail = csum[idx + last] - csum[idx]
    out = np.empty((n_boot, m))
    for b in range(n_boot):
        s = starts[b]
        out[b] = full[s[:-1]].sum(axis=0) + tail[s[-1]]
    return out / n


def run_mcs(
    panel: LossPanel,
    delta=(0.25, 0.10),
    n_boot: int = 5000,
    block_len: int = 10,
    seed: int = 0,
) -> McsReport:
    """Model Confidence Set.

    Parameters
    ----------
    panel : LossPanel
    delta : float or sequence of float
        Significance levels; survivors are reported for confidence ``1 - delta``.
    n_boot, block_len, seed
        Circular block bootstrap settings.

    Notes
    -----
    A pair whose bootstrap variance vanishes is treated as tied when its mean
    differential is zero (it drops out of ``T_SQ``) and as a strict dominance
    otherwise, in which case the dominated model is removed with p-value 0.
    Elimination runs until one model (or one tied group) is left, so every
    model gets an MCS p-value, the running maximum of the elimination
    p-values; the set at confidence ``1 - delta`` keeps p-values ``>= delta``.
    """
    deltas = np.atleast_1d(np.asarray(delta, dtype=float))
    if np.any((deltas <= 0) | (deltas >= 1)):
        raise ValueError("delta must lie in (0, 1)")
    names = list(panel.models)
    m_all = len(names)
    if m_all < 2:
        raise DataError("the MCS needs at least two models")
    if n_boot < 1:
        raise ValueError("n_boot must be positive")
    if block_len < 1:
        raise ValueError("block_len must be >= 1")
    losses = panel.losses
    lbar = losses.mean(axis=0)
    boot = _bootstrap_means(losses, n_boot, block_len, seed)
    scale = max(1.0, float(np.abs(losses).mean()))
    var_tol = (1e-10 * scale) ** 2
    mean_tol = 1e-12 * scale

    alive = list(range(m_all))
    order = []
    running = 0.0
    pvals = {}
    while len(alive) > 1:
        idx = np.array(alive)
        d = lbar[idx][:, None] - lbar[idx][None, :]
        db = boot[:, idx][:, :, None] - boot[:, idx][:, None, :]
        dev = db - d[None]
        var = np.mean(dev**2, axis=0)
        iu = np.triu_indices(idx.size, 1)
        v, dm = var[iu], d[iu]
        flat = v <= var_tol
        dominated = flat & (np.abs(dm) > mean_tol)
        if dominated.any():
            k = int(np.flatnonzero(dominated)[np.argmax(np.abs(dm[dominated]))])
            a, b = iu[0][k], iu[1][k]
            worst = a if dm[k] > 0 else b
            p_step = 0.0
        else:
            use = ~flat
            if not use.any():
                break  # every remaining pair is tied
            t_sq = np.sum(dm[use] ** 2 / v[use])
            t_boot = np.sum(dev[:, iu[0], iu[1]][:, use] ** 2 / v[use], axis=1)
            p_step = float(np.mean(t_boot >= t_sq))
            di = lbar[idx] - lbar[idx].mean()
            dib = boot[:, idx] - boot[:, idx].mean(axis=1, keepdims=True)
            vi = np.mean((dib - di[None]) ** 2, axis=0)
            with np.errstate(divide="ignore", invalid="ignore"):
                t_i = np.where(vi > var_tol, di / np.sqrt(vi), np.sign(di) * np.inf)
            worst = int(np.argmax(t_i))
        running = max(running, p_step)
        model = alive.pop(int(worst))
        pvals[names[model]] = running
        order.append((names[model], running))
    for k in alive:
        pvals[names[k]] = 1.0
    survivors = {
        round(1.0 - float(dl), 10): [names[k] for k in range(m_all) if pvals[names[k]] >= dl]
        for dl in deltas
    }
    return McsReport(
        models=names,
        survivors=survivors,
        mean_loss={names[k]: float(lbar[k]) for k in range(m_all)},
        elimination_order=order,
        pvalues=pvals,
        n_boot=n_boot,
        block_len=block_len,
        seed=seed,
        lf_vars=dict(zip(names, panel.lf_vars)) if panel.lf_vars else {},
    )
