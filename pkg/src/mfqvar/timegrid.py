"""Daily/monthly data model.

Daily observations carry a double index ``(i, t)``: ``t`` counts months and
``i`` the trading day inside month ``t``.  Internally everything lives on a
flat daily axis plus a ``month_of`` array mapping each daily position to its
monthly position, so lags of daily returns cross month boundaries freely.
"""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import AlignmentError, CoverageError, DataError, InsufficientHistoryError

__all__ = [
    "DailyObs",
    "MonthlyObs",
    "MixedFreqPanel",
    "build_panel",
    "lagged_returns",
    "read_daily_csv",
    "read_monthly_csv",
    "write_daily_csv",
    "write_monthly_csv",
]

_UNIT_SCALE = {"percent": 1.0, "decimal": 100.0}


@dataclass(frozen=True)
class DailyObs:
    date: dt.date
    ret: float
    x: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.ret):
            raise DataError(f"non-finite return on {self.date}")
        if self.x is not None and not (np.isfinite(self.x) and self.x >= 0):
            raise DataError(f"realized measure on {self.date} must be finite and >= 0")


@dataclass(frozen=True)
class MonthlyObs:
    month: str  # "YYYY-MM"
    value: float

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise DataError(f"non-finite monthly value for {self.month}")


@dataclass(frozen=True, eq=False)
class MixedFreqPanel:
    """Aligned daily and monthly series.

    Attributes
    ----------
    dates : ndarray of datetime64[D]
    ret : ndarray
        Daily log-returns in percent.
    x : ndarray or None
        Daily realized measure (same unit as ``ret``), if supplied.
    months : ndarray of datetime64[M]
        Contiguous monthly keys.
    mv : ndarray
        Monthly variable, aligned with ``months``.
    month_of : ndarray of int
        Monthly position of every daily observation.  It may equal
        ``len(months)`` for days in the month right after the last monthly
        value, since only lagged monthly values are ever used.
    k_lags : int
        Number of monthly lags the panel was validated for.
    n_trimmed : int
        Leading daily observations dropped for lack of monthly history.
    """

    dates: np.ndarray
    ret: np.ndarray
    x: np.ndarray | None
    months: np.ndarray
    mv: np.ndarray
    month_of: np.ndarray
    k_lags: int
    n_trimmed: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return self.ret.shape[0]

    @property
    def has_x(self) -> bool:
        return self.x is not None

    @property
    def day_in_month(self) -> np.ndarray:
        """1-based index ``i`` of each observation inside its month."""
        mo = self.month_of
        starts = np.r_[0, np.flatnonzero(np.diff(mo)) + 1]
        counts = np.diff(np.r_[starts, mo.shape[0]])
        return np.arange(mo.shape[0]) - np.repeat(starts, counts) + 1

    def index_pairs(self) -> np.ndarray:
        """``(i, t)`` pairs, shape ``(n, 2)``."""
        return np.column_stack([self.day_in_month, self.month_of])

    def position_of(self, i: int, t: int) -> int:
        hits = np.flatnonzero((self.month_of == t) & (self.day_in_month == i))
        if hits.size == 0:
            raise KeyError((i, t))
        return int(hits[0])

    def slice_days(self, start: int, stop: int) -> "MixedFreqPanel":
        """Daily sub-range ``[start, stop)``; the monthly series is kept whole."""
        sl = slice(start, stop)
        return MixedFreqPanel(
            dates=self.dates[sl],
            ret=self.ret[sl],
            x=None if self.x is None else self.x[sl],
            months=self.months,
            mv=self.mv,
            month_of=self.month_of[sl],
            k_lags=self.k_lags,
            n_trimmed=0,
            meta=dict(self.meta),
        )


def _as_month(key) -> np.datetime64:
    try:
        return np.datetime64(str(key)[:7], "M")
    except ValueError as exc:
        raise AlignmentError(f"bad month key {key!r}") from exc


def build_panel(
    daily: Sequence[DailyObs],
    monthly: Sequence[MonthlyObs],
    k_lags: int,
    trim: bool = False,
) -> MixedFreqPanel:
    """Align daily observations with a contiguous monthly series.

    Inputs are sorted first.  Duplicate daily dates or gaps in the monthly
    keys raise :class:`AlignmentError`.  The first daily month needs
    ``k_lags`` earlier monthly values; otherwise :class:`CoverageError` is
    raised, or, with ``trim=True``, the offending leading days are dropped
    and counted in ``n_trimmed``.
    """
    if k_lags < 1:
        raise ValueError("k_lags must be a positive integer")
    if len(daily) == 0 or len(monthly) == 0:
        raise DataError("empty daily or monthly input")
    daily = sorted(daily, key=lambda o: o.date)
    monthly = sorted(monthly, key=lambda o: str(o.month))
    dates = np.array([np.datetime64(o.date, "D") for o in daily])
    if np.any(np.diff(dates) <= np.timedelta64(0, "D")):
        raise AlignmentError("duplicate daily dates")
    months = np.array([_as_month(o.month) for o in monthly])
    steps = np.diff(months).astype(int)
    if np.any(steps == 0):
        raise AlignmentError("duplicate monthly keys")
    if np.any(steps != 1):
        raise AlignmentError("gap in monthly series")
    has_x = [o.x is not None for o in daily]
    if any(has_x) and not all(has_x):
        raise DataError("realized measure present on some days only")
    ret = np.array([o.ret for o in daily], dtype=float)
    x = np.array([o.x for o in daily], dtype=float) if all(has_x) else None
    mv = np.array([o.value for o in monthly], dtype=float)
    return _assemble(dates, ret, x, months, mv, k_lags, trim)


def _assemble(dates, ret, x, months, mv, k_lags, trim, meta=None) -> MixedFreqPanel:
    day_months = dates.astype("datetime64[M]")
    month_of = (day_months - months[0]).astype(int)
    if month_of[0] < 0:
        raise CoverageError(f"daily data start ({day_months[0]}) precedes monthly series ({months[0]})")
    if month_of[-1] > months.shape[0]:
        raise CoverageError(
            f"daily month {day_months[-1]} lies more than one month past the monthly series end ({months[-1]})"
        )
    n_trimmed = 0
    if month_of[0] < k_lags:
        if not trim:
            raise CoverageError(
                f"first daily month {day_months[0]} has {month_of[0]} prior monthly values, need {k_lags}"
            )
        keep = month_of >= k_lags
        if not keep.any():
            raise CoverageError("no daily observation has enough monthly history")
        n_trimmed = int(np.argmax(keep))
        dates, ret, month_of = dates[n_trimmed:], ret[n_trimmed:], month_of[n_trimmed:]
        x = None if x is None else x[n_trimmed:]
    return MixedFreqPanel(
        dates=dates,
        ret=ret,
        x=x,
        months=months,
        mv=mv,
        month_of=month_of,
        k_lags=k_lags,
        n_trimmed=n_trimmed,
        meta=dict(meta or {}),
    )


def panel_from_arrays(dates, ret, months, mv, k_lags, x=None, trim=False, meta=None) -> MixedFreqPanel:
    """Array-based constructor used by the simulator and the CSV readers."""
    dates = np.asarray(dates, dtype="datetime64[D]")
    months = np.asarray(months, dtype="datetime64[M]")
    ret = np.asarray(ret, dtype=float)
    mv = np.asarray(mv, dtype=float)
    if np.any(np.diff(dates) <= np.timedelta64(0, "D")):
        raise AlignmentError("daily dates must be strictly increasing")
    if np.any(np.diff(months).astype(int) != 1):
        raise AlignmentError("gap in monthly series")
    if not (np.all(np.isfinite(ret)) and np.all(np.isfinite(mv))):
        raise DataError("non-finite values in panel input")
    if x is not None:
        x = np.asarray(x, dtype=float)
        if not (np.all(np.isfinite(x)) and np.all(x >= 0)):
            raise DataError("realized measure must be finite and nonnegative")
    return _assemble(dates, ret, x, months, mv, k_lags, trim, meta)


def lagged_returns(panel: MixedFreqPanel, pos: int, q: int) -> np.ndarray:
    """Absolute lagged returns ``(|r_{pos-1}|, ..., |r_{pos-q}|)``.

    Lags run on the flat daily axis, so the last days of the previous month
    serve as lags for the first days of a month.
    """
    if pos < q or pos > len(panel):
        raise InsufficientHistoryError(f"position {pos} has fewer than {q} daily lags")
    return np.abs(panel.ret[pos - q : pos][::-1]).copy()


# --------------------------------------------------------------------- CSV


def read_daily_csv(path, unit: str = "percent") -> list[DailyObs]:
    """Read ``date,ret[,x]``.  ``unit='decimal'`` converts to percent."""
    if unit not in _UNIT_SCALE:
        raise DataError(f"unknown return unit {unit!r}")
    scale = _UNIT_SCALE[unit]
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        rows = (line for line in fh if not line.startswith("#"))
        reader = csv.DictReader(rows)
        if reader.fieldnames is None or reader.fieldnames[:2] != ["date", "ret"]:
            raise DataError(f"{path}: header must start with 'date,ret'")
        with_x = "x" in reader.fieldnames
        for lineno, row in enumerate(reader, start=2):
            try:
                date = dt.date.fromisoformat(row["date"].strip())
                ret = float(row["ret"]) * scale
                x = float(row["x"]) * scale if with_x and row["x"] not in ("", None) else None
                out.append(DailyObs(date, ret, x))
            except (ValueError, TypeError, DataError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out


def read_monthly_csv(path) -> list[MonthlyObs]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        if reader.fieldnames is None or reader.fieldnames[:2] != ["month", "value"]:
            raise DataError(f"{path}: header must be 'month,value'")
        for lineno, row in enumerate(reader, start=2):
            try:
                key = row["month"].strip()
                dt.datetime.strptime(key, "%Y-%m")
                out.append(MonthlyObs(key, float(row["value"])))
            except (ValueError, TypeError, DataError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_daily_csv(panel: MixedFreqPanel, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "ret", "x"] if panel.has_x else ["date", "ret"])
        for k in range(len(panel)):
            row = [str(panel.dates[k]), repr(float(panel.ret[k]))]
            if panel.has_x:
                row.append(repr(float(panel.x[k])))
            w.writerow(row)


def write_monthly_csv(panel: MixedFreqPanel, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["month", "value"])
        for m, v in zip(panel.months, panel.mv):
            w.writerow([str(m), repr(float(v))])


def load_panel(daily_path, monthly_path, k_lags: int, unit: str = "percent", trim: bool = False) -> MixedFreqPanel:
    return build_panel(read_daily_csv(daily_path, unit), read_monthly_csv(monthly_path), k_lags, trim=trim)
