"""VaR backtests: AE ratio, Kupiec UC, Christoffersen CC and the DQ test."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import xlogy

from .errors import DataError

__all__ = [
    "VarTrack",
    "BacktestReport",
    "ae_ratio",
    "kupiec_uc",
    "christoffersen_cc",
    "dq_test",
    "backtest",
    "report_csv_header",
    "read_track_csv",
    "write_track_csv",
]

SIGNIFICANCE = 0.05


@dataclass(frozen=True, eq=False)
class VarTrack:
    """One model's forecast record.  ``hit[t]`` is ``ret[t] < var[t]``."""

    dates: np.ndarray
    ret: np.ndarray
    var: np.ndarray
    tau: float
    model: str = ""
    lf_var: str = ""

    def __post_init__(self):
        ret = np.asarray(self.ret, dtype=float)
        var = np.asarray(self.var, dtype=float)
        if ret.shape != var.shape or ret.ndim != 1:
            raise DataError("ret and var must be 1-d arrays of equal length")
        if len(self.dates) != ret.shape[0]:
            raise DataError("dates and returns differ in length")
        object.__setattr__(self, "ret", ret)
        object.__setattr__(self, "var", var)
        object.__setattr__(self, "dates", np.asarray(self.dates, dtype="datetime64[D]"))

    def __len__(self) -> int:
        return self.ret.shape[0]

    @property
    def hits(self) -> np.ndarray:
        return self.ret < self.var

    @classmethod
    def from_arrays(cls, ret, var, tau, dates=None, model=""):
        ret = np.asarray(ret, dtype=float)
        if dates is None:
            dates = np.datetime64("2000-01-01") + np.arange(ret.shape[0])
        return cls(dates, ret, var, tau, model)


@dataclass(frozen=True)
class BacktestReport:
    model: str
    lf_var: str
    n: int
    n_hits: int
    ae: float
    mean_var: float
    sd_var: float
    uc_stat: float
    uc_p: float
    cc_stat: float
    cc_p: float
    dq_stat: float
    dq_p: float
    dq_df: int
    tau: float = field(default=float("nan"))

    @property
    def passes(self) -> bool:
        return min(self.uc_p, self.cc_p, self.dq_p) >= SIGNIFICANCE

    def as_text(self) -> str:
        keys = ["model", "lf_var", "n", "n_hits", "ae", "mean_var", "sd_var",
                "uc_stat", "uc_p", "cc_stat", "cc_p", "dq_stat", "dq_p", "dq_df"]
        lines = [f"{k} = {getattr(self, k)}" for k in keys]
        lines.append(f"passes_at_{SIGNIFICANCE:g} = {self.passes}")
        return "\n".join(lines)

    def csv_row(self) -> list[str]:
        return [
            self.model,
            self.lf_var,
            f"{self.mean_var:.3f}",
            f"{self.sd_var:.3f}",
            f"{self.ae:.3f}",
            f"{self.uc_p:.3f}",
            f"{self.cc_p:.3f}",
            f"{self.dq_p:.3f}",
        ]


def report_csv_header() -> list[str]:
    return ["model", "lf_var", "mean_var", "sd_var", "ae", "uc_p", "cc_p", "dq_p"]


def ae_ratio(track: VarTrack) -> float:
    n = len(track)
    if n == 0:
        raise DataError("empty track")
    return float(track.hits.sum() / (track.tau * n))


def _bernoulli_loglik(k, n, p):
    return xlogy(k, p) + xlogy(n - k, 1.0 - p)


def kupiec_uc(track: VarTrack) -> tuple[float, float]:
    """Unconditional coverage LR test, chi2(1).  Uses ``0 log 0 = 0``."""
    n = len(track)
    if n == 0:
        raise DataError("empty track")
    x = int(track.hits.sum())
    tau = track.tau
    stat = -2.0 * (_bernoulli_loglik(x, n, tau) - _bernoulli_loglik(x, n, x / n))
    stat = max(float(stat), 0.0)
    return stat, float(stats.chi2.sf(stat, 1))


def _independence_lr(hits: np.ndarray) -> float:
    prev, cur = hits[:-1], hits[1:]
    n00 = int(np.sum(~prev & ~cur))
    n01 = int(np.sum(~prev & cur))
    n10 = int(np.sum(prev & ~cur))
    n11 = int(np.sum(prev & cur))
    p01 = n01 / (n00 + n01) if n00 + n01 else 0.0
    p11 = n11 / (n10 + n11) if n10 + n11 else 0.0
    p = (n01 + n11) / (n00 + n01 + n10 + n11)
    l0 = _bernoulli_loglik(n01 + n11, n00 + n01 + n10 + n11, p)
    l1 = _bernoulli_loglik(n01, n00 + n01, p01) + _bernoulli_loglik(n11, n10 + n11, p11)
    return max(float(-2.0 * (l0 - l1)), 0.0)


def christoffersen_cc(track: VarTrack) -> tuple[float, float]:
    """Conditional coverage: UC plus first-order Markov independence, chi2(2)."""
    if len(track) < 2:
        raise DataError("conditional coverage needs at least two observations")
    uc, _ = kupiec_uc(track)
    stat = uc + _independence_lr(track.hits)
    return stat, float(stats.chi2.sf(stat, 2))


def dq_test(track: VarTrack, n_lags: int = 4) -> tuple[float, float, int]:
    """Dynamic quantile test.

    Regresses ``Hit_t = 1{r_t < VaR_t} - tau`` on a constant, ``n_lags``
    lagged hits and the VaR forecast.  A rank-deficient design (constant VaR,
    say) is handled by the pseudo-inverse and the degrees of freedom equal the
    numerical rank.
    """
    n = len(track)
    if n <= n_lags + 2:
        raise DataError("track too short for the DQ regression")
    tau = track.tau
    hit = track.hits.astype(float) - tau
    y = hit[n_lags:]
    cols = [np.ones(n - n_lags)]
    cols += [hit[n_lags - j : n - j] for j in range(1, n_lags + 1)]
    cols.append(track.var[n_lags:])
    x = np.column_stack(cols)
    xty = x.T @ y
    stat = float(xty @ np.linalg.pinv(x.T @ x, hermitian=True) @ xty) / (tau * (1.0 - tau))
    df = int(np.linalg.matrix_rank(x))
    stat = max(stat, 0.0)
    return stat, float(stats.chi2.sf(stat, df)), df


def backtest(track: VarTrack, n_lags: int = 4) -> BacktestReport:
    n = len(track)
    if n == 0:
        raise DataError(f"empty track for model {track.model!r}")
    uc = kupiec_uc(track)
    cc = christoffersen_cc(track)
    dq = dq_test(track, n_lags)
    return BacktestReport(
        model=track.model,
        lf_var=track.lf_var,
        n=n,
        n_hits=int(track.hits.sum()),
        ae=ae_ratio(track),
        mean_var=float(track.var.mean()),
        sd_var=float(track.var.std(ddof=1)) if n > 1 else 0.0,
        uc_stat=uc[0],
        uc_p=uc[1],
        cc_stat=cc[0],
        cc_p=cc[1],
        dq_stat=dq[0],
        dq_p=dq[1],
        dq_df=dq[2],
        tau=track.tau,
    )


def format_table(reports) -> str:
    """Plain-text table, one row per model."""
    head = report_csv_header() + ["pass"]
    rows = [r.csv_row() + ["*" if r.passes else ""] for r in reports]
    widths = [max(len(h), *(len(r[k]) for r in rows)) for k, h in enumerate(head)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    out = [fmt.format(*head), fmt.format(*("-" * w for w in widths))]
    out += [fmt.format(*r) for r in rows]
    out.append(f"* passes UC, CC and DQ at significance {SIGNIFICANCE:g}")
    return "\n".join(out)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report_csv_header())
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


# ------------------------------------------------------------ track files


def write_track_csv(track: VarTrack, path, header_lines=()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"# model={track.model}\n# lf_var={track.lf_var}\n# tau={track.tau!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "ret", "var", "hit"])
        for d, r, v, h in zip(track.dates, track.ret, track.var, track.hits):
            w.writerow([str(d), repr(float(r)), repr(float(v)), int(h)])


def read_track_csv(path) -> VarTrack:
    meta = {}
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    meta[k.strip()] = v.strip()
            else:
                lines.append(line)
        reader = csv.DictReader(lines)
        if reader.fieldnames != ["date", "ret", "var", "hit"]:
            raise DataError(f"{path}: header must be 'date,ret,var,hit'")
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append((row["date"], float(row["ret"]), float(row["var"]), int(row["hit"])))
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty track")
    if "tau" not in meta:
        raise DataError(f"{path}: missing '# tau=' header")
    dates, ret, var, hit = zip(*rows)
    track = VarTrack(np.array(dates, dtype="datetime64[D]"), np.array(ret), np.array(var),
                     float(meta["tau"]), meta.get("model", ""), meta.get("lf_var", ""))
    if np.any(track.hits != np.array(hit, dtype=bool)):
        raise DataError(f"{path}: hit column inconsistent with ret < var")
    return track
