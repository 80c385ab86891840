"""Batch command line: ``mfqvar {lagtest,forecast,backtest,mcs,simulate}``.

Settings come from an INI file::

    [run]
    daily = data/daily.csv        ; date,ret[,x]  (paths relative to the file)
    monthly = data/monthly.csv    ; month,value
    lf_var = dIP                  ; label of the monthly variable
    tau = 0.05
    q = auto                      ; or an integer
    k_lags = 12
    window = 1500
    stride = 10
    oos_start = 2016-01-04
    models = mfqarchx, mfqarch, qarch, garch, riskmetrics
    seed = 1

    [mcs]
    n_boot = 5000
    block_len = 10

    [sav]
    caviar_starts = 10000

Exit codes: 0 success, 2 configuration error, 3 data error, 4 estimation error.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import backtest as bt
from . import forecast as fc
from . import mcs as mcs_mod
from . import mfqarch, simulate, timegrid
from .errors import ConfigurationError, DataError, EstimationError, MfqVarError

log = logging.getLogger("mfqvar")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_ESTIMATION = 0, 2, 3, 4


# ------------------------------------------------------------------ config


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


@dataclass
class RunConfig:
    tau: float = 0.05
    q: int | str = "auto"
    q_max: int = 8
    k_lags: int = 12
    window: int = 1500
    stride: int = 10
    oos_start: str | None = None
    models: list = field(default_factory=lambda: ["mfqarch"])
    seed: int = 0
    daily: Path | None = None
    monthly: Path | None = None
    unit: str = "percent"
    lf_var: str = ""
    out: Path = Path("out")
    lag_model: str | None = None
    mcs_n_boot: int = 5000
    mcs_block_len: int = 10
    mcs_levels: tuple = (0.75, 0.90)
    model_options: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    digest: str = ""

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ConfigurationError("tau must lie in (0, 1)")
        if self.window < 300:
            raise ConfigurationError("window must be >= 300")
        if self.stride < 1:
            raise ConfigurationError("stride must be >= 1")
        if self.q != "auto" and (not isinstance(self.q, int) or self.q < 0):
            raise ConfigurationError("q must be 'auto' or a nonnegative integer")
        if self.q_max < 1:
            raise ConfigurationError("q_max must be >= 1")
        if self.k_lags < 1:
            raise ConfigurationError("k_lags must be >= 1")
        bad = [m for m in self.models if m not in fc.MODEL_NAMES]
        if bad:
            raise ConfigurationError(f"unknown model(s) {bad}; choose from {', '.join(fc.MODEL_NAMES)}")
        if len(set(self.models)) != len(self.models):
            raise ConfigurationError("duplicate model names")
        if any(not 0.0 < lv < 1.0 for lv in self.mcs_levels):
            raise ConfigurationError("MCS confidence levels must lie in (0, 1)")

    def settings(self, name: str, q: int | None = None) -> fc.ModelSettings:
        opts = self.model_options.get(name, {})
        try:
            q_opt = opts.get("q", self.q)
            q_val = q if q is not None else (0 if q_opt == "auto" else int(q_opt))
            grid = None
            if "grid_size" in opts:
                grid = mfqarch.default_omega2_grid(int(opts["grid_size"]))
            return fc.ModelSettings(
                name=name,
                q=q_val,
                k_lags=int(opts.get("k_lags", self.k_lags)),
                omega2_grid=grid,
                caviar_starts=int(opts.get("caviar_starts", 10_000)),
                caviar_refine=int(opts.get("caviar_refine", 10)),
            )
        except ValueError as exc:
            raise ConfigurationError(f"[{name}]: {exc}") from exc

    def wants_auto_q(self, name: str) -> bool:
        return name in fc.MF_MODELS and self.model_options.get(name, {}).get("q", self.q) == "auto"


def _canonical(cp: configparser.ConfigParser) -> str:
    lines = []
    for sec in sorted(cp.sections()):
        lines.append(f"[{sec}]")
        lines += [f"{k}={cp[sec][k]}" for k in sorted(cp[sec])]
    return "\n".join(lines)


def load_config(path, seed: int | None = None, out: str | None = None) -> RunConfig:
    """Parse an INI run file; ``seed`` and ``out`` override the file."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file {path} not found")
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc
        base = path.parent
    else:
        base = Path.cwd()
    run = cp["run"] if cp.has_section("run") else {}
    known = {"tau", "q", "q_max", "k_lags", "window", "stride", "oos_start", "models", "seed", "daily",
             "monthly", "unit", "lf_var", "out", "lag_model"}
    unknown = set(run) - known
    if unknown:
        raise ConfigurationError(f"[run]: unknown key(s) {sorted(unknown)}")

    def rel(v):
        return None if v is None else (base / v).resolve()

    try:
        q_raw = run.get("q", "auto").strip()
        kw = dict(
            tau=float(run.get("tau", 0.05)),
            q=q_raw if q_raw == "auto" else int(q_raw),
            q_max=int(run.get("q_max", 8)),
            k_lags=int(run.get("k_lags", 12)),
            window=int(run.get("window", 1500)),
            stride=int(run.get("stride", 10)),
            oos_start=run.get("oos_start"),
            models=[m.strip().lower() for m in run.get("models", "mfqarch").split(",") if m.strip()],
            seed=int(seed if seed is not None else run.get("seed", 0)),
            daily=rel(run.get("daily")),
            monthly=rel(run.get("monthly")),
            unit=run.get("unit", "percent"),
            lf_var=run.get("lf_var", ""),
            out=Path(out) if out is not None else rel(run.get("out", "out")),
            lag_model=run.get("lag_model"),
        )
        if cp.has_section("mcs"):
            m = cp["mcs"]
            kw["mcs_n_boot"] = int(m.get("n_boot", 5000))
            kw["mcs_block_len"] = int(m.get("block_len", 10))
            kw["mcs_levels"] = tuple(_floats(m.get("levels", "0.75, 0.90")))
        kw["sim"] = dict(cp["simulate"]) if cp.has_section("simulate") else {}
    except ValueError as exc:
        raise ConfigurationError(f"[run]: {exc}") from exc
    kw["model_options"] = {s: dict(cp[s]) for s in cp.sections() if s in fc.MODEL_NAMES}
    stray = [s for s in cp.sections() if s not in fc.MODEL_NAMES and s not in ("run", "mcs", "simulate")]
    if stray:
        raise ConfigurationError(f"unknown section(s) {stray}")
    canon = _canonical(cp) + f"\n[override]\nseed={kw['seed']}"
    kw["digest"] = hashlib.sha256(canon.encode()).hexdigest()[:16]
    return RunConfig(**kw)


# ------------------------------------------------------------------ helpers


def _load_panel(cfg: RunConfig, k_lags: int) -> timegrid.MixedFreqPanel:
    if cfg.daily is None or cfg.monthly is None:
        raise ConfigurationError("[run] needs 'daily' and 'monthly' data paths")
    panel = timegrid.load_panel(cfg.daily, cfg.monthly, k_lags, unit=cfg.unit, trim=True)
    if panel.n_trimmed:
        log.info("dropped %d leading days without %d monthly lags", panel.n_trimmed, k_lags)
    return panel


def _max_k(cfg: RunConfig) -> int:
    return max([cfg.settings(m, q=0).k_lags for m in cfg.models] + [cfg.k_lags])


def _oos_position(cfg: RunConfig, panel) -> int:
    if cfg.oos_start is None:
        raise ConfigurationError("[run] oos_start is required for forecasting")
    try:
        day = np.datetime64(cfg.oos_start, "D")
    except ValueError as exc:
        raise ConfigurationError(f"bad oos_start {cfg.oos_start!r}") from exc
    if day < panel.dates[0] or day > panel.dates[-1]:
        raise ConfigurationError(f"oos_start {cfg.oos_start} is outside the data range")
    return int(np.searchsorted(panel.dates, day))


def _header(cfg: RunConfig) -> list[str]:
    return [f"config_sha256={cfg.digest}", f"seed={cfg.seed}", f"window={cfg.window}", f"stride={cfg.stride}"]


def _write(path: Path, text: str) -> None:
    path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


def _lag_text(res: mfqarch.LagTestResult, name: str, n: int) -> str:
    lines = [f"# sequential LR lag test, model {name}, {n} days, alpha {res.alpha:g}",
             f"{'null':<10}{'LR':>10}{'p_value':>10}"]
    for j, (s, p) in enumerate(zip(res.statistics, res.p_values), start=1):
        lines.append(f"{f'beta{j}=0':<10}{s:>10.3f}{p:>10.3f}")
    lines.append(f"selected q = {res.selected_q}")
    return "\n".join(lines)


# ------------------------------------------------------------------ commands


def cmd_lagtest(cfg: RunConfig) -> mfqarch.LagTestResult:
    """Sequential LR test on the full sample for one MF-Q-ARCH family model."""
    name = cfg.lag_model or next((m for m in cfg.models if m in fc.MF_MODELS), "mfqarch")
    settings = cfg.settings(name, q=0)
    panel = _load_panel(cfg, settings.k_lags)
    res = fc.select_lag_order(panel, settings, cfg.tau, cfg.q_max)
    cfg.out.mkdir(parents=True, exist_ok=True)
    rows = ["lag,statistic,p_value,reject"]
    rows += [f"{j},{s:.6f},{p:.6f},{int(p < res.alpha)}"
             for j, (s, p) in enumerate(zip(res.statistics, res.p_values), start=1)]
    _write(cfg.out / "lagtest.csv", "\n".join(rows))
    _write(cfg.out / "lagtest.txt", _lag_text(res, name, len(panel)))
    return res


def _forecast_one(args):
    cfg, name, panel, oos = args
    q = None
    if cfg.wants_auto_q(name):
        first = panel.slice_days(oos - cfg.window, oos)
        q = fc.select_lag_order(first, cfg.settings(name, q=0), cfg.tau, cfg.q_max).selected_q
        log.info("%s: lag order %d chosen on the first window", name, q)
    settings = cfg.settings(name, q)
    res = fc.rolling_forecast(panel, settings, cfg.tau, oos, cfg.window, cfg.stride, cfg.seed,
                              lf_var=cfg.lf_var)
    return name, res, settings.q


def cmd_forecast(cfg: RunConfig, threads: int = 1) -> dict:
    panel = _load_panel(cfg, _max_k(cfg))
    oos = _oos_position(cfg, panel)
    cfg.out.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, m, panel, oos) for m in cfg.models]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(min(threads, len(tasks))) as ex:
            done = list(ex.map(_forecast_one, tasks))
    else:
        done = [_forecast_one(t) for t in tasks]
    summary = [f"# one-step-ahead VaR, tau {cfg.tau:g}, out-of-sample from {panel.dates[oos]} "
               f"({len(panel) - oos} days), config {cfg.digest}, seed {cfg.seed}"]
    out = {}
    for name, res, q in done:
        extra = [f"q={q}"] if name in fc.MF_MODELS else []
        bt.write_track_csv(res.track, cfg.out / f"forecast_{name}.csv", _header(cfg) + extra)
        summary.append(f"{name:<12} refits {res.n_refits:>4}  failed {res.n_failed:>3}  "
                       f"hits {int(res.track.hits.sum()):>4}")
        out[name] = res
    _write(cfg.out / "forecast_summary.txt", "\n".join(summary))
    return out


def _read_tracks(cfg: RunConfig) -> list[bt.VarTrack]:
    tracks = []
    for name in cfg.models:
        path = cfg.out / f"forecast_{name}.csv"
        if not path.is_file():
            raise DataError(f"missing forecast file {path}")
        tracks.append(bt.read_track_csv(path))
    return tracks


def cmd_backtest(cfg: RunConfig) -> list[bt.BacktestReport]:
    tracks = _read_tracks(cfg)
    ref = tracks[0]
    for tr in tracks[1:]:
        if len(tr) != len(ref) or np.any(tr.dates != ref.dates):
            raise DataError(f"forecast track {tr.model!r} is misaligned with {ref.model!r}")
    reports = [bt.backtest(t) for t in tracks]
    _write(cfg.out / "backtest.csv", bt.reports_to_csv(reports))
    _write(cfg.out / "backtest.txt", bt.format_table(reports))
    return reports


def cmd_mcs(cfg: RunConfig) -> mcs_mod.McsReport:
    if len(cfg.models) < 2:
        raise ConfigurationError("the MCS needs at least two models")
    panel = mcs_mod.loss_panel(_read_tracks(cfg))
    deltas = tuple(round(1.0 - lv, 10) for lv in cfg.mcs_levels)
    rep = mcs_mod.run_mcs(panel, deltas, cfg.mcs_n_boot, cfg.mcs_block_len, cfg.seed)
    _write(cfg.out / "mcs.csv", rep.to_csv())
    _write(cfg.out / "mcs.txt", rep.as_text())
    return rep


def _sim_config(cfg: RunConfig) -> tuple[simulate.DgpConfig, dict]:
    s = dict(cfg.sim)
    try:
        dgp = simulate.DgpConfig(
            betas=tuple(_floats(s.pop("betas"))) if "betas" in s else simulate.REFERENCE_BETAS,
            theta=float(s.pop("theta", simulate.REFERENCE_THETA)),
            omega2=float(s.pop("omega2", simulate.REFERENCE_OMEGA2)),
            k_lags=int(s.pop("k_lags", 24)),
            phi=float(s.pop("phi", 0.7)),
            mv_innovation=s.pop("mv_innovation", "skew_t"),
            df=float(s.pop("df", 7.0)),
            skew=float(s.pop("skew", -0.95)),
            days_per_month=int(s.pop("days_per_month", 21)),
            seed=cfg.seed,
        )
        run = dict(
            reps=int(s.pop("reps", 500)),
            n_daily=_ints(s.pop("n_daily", "1250, 2500, 5000")),
            tau_levels=_floats(s.pop("tau_levels", "0.01, 0.05, 0.10")),
            q_max=int(s.pop("q_max", 8)),
            certify=s.pop("certify", "no").lower() in ("1", "yes", "true", "on"),
        )
    except (ValueError, KeyError) as exc:
        raise ConfigurationError(f"[simulate]: {exc}") from exc
    if s:
        raise ConfigurationError(f"[simulate]: unknown key(s) {sorted(s)}")
    return dgp, run


def cmd_simulate(cfg: RunConfig, threads: int = 1) -> list[simulate.McStudyResult]:
    dgp, run = _sim_config(cfg)
    cfg.out.mkdir(parents=True, exist_ok=True)
    results = []
    for n in run["n_daily"]:
        c = simulate.study_config(dgp, n_daily=n)
        results += simulate.run_mc_study(c, run["reps"], run["tau_levels"], run["q_max"],
                                         n_jobs=threads, certify=run["certify"])
    lines = [f"# Monte Carlo study: {run['reps']} replicates, seed {cfg.seed}, config {cfg.digest}"]
    for tau in run["tau_levels"]:
        sub = [r for r in results if r.tau == tau]
        path = cfg.out / f"mc_estimates_tau{tau:g}.csv"
        simulate.write_estimates_table(sub, path)
        lines.append(f"tau {tau:g}: {path.name}; failed replicates "
                     + ", ".join(f"N{r.n_daily}={r.n_failed}" for r in sub))
    if run["q_max"] > 0:
        simulate.write_lag_table(results, cfg.out / "mc_lagtest.csv")
        lines.append("lag test non-rejection percentages: mc_lagtest.csv")
    _write(cfg.out / "simulate.txt", "\n".join(lines))
    return results


# ------------------------------------------------------------------ entry


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mfqvar", description="Mixed-frequency quantile VaR toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("lagtest", "sequential LR test for the number of daily return lags"),
        ("forecast", "rolling one-step-ahead VaR forecasts for the configured models"),
        ("backtest", "AE, UC, CC and DQ backtests of the forecast files"),
        ("mcs", "Model Confidence Set on the quantile loss"),
        ("simulate", "Monte Carlo parameter-recovery study"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=name != "simulate", help="INI run file")
        sp.add_argument("--seed", type=int, default=None, help="override the configured seed")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="worker processes")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 1:
            raise ConfigurationError("--threads must be >= 1")
        cfg = load_config(args.config, args.seed, args.out)
        if args.command == "lagtest":
            res = cmd_lagtest(cfg)
            print(f"selected q = {res.selected_q}")
        elif args.command == "forecast":
            cmd_forecast(cfg, args.threads)
            print((cfg.out / "forecast_summary.txt").read_text(encoding="utf-8"), end="")
        elif args.command == "backtest":
            print(bt.format_table(cmd_backtest(cfg)))
        elif args.command == "mcs":
            print(cmd_mcs(cfg).as_text())
        else:
            cmd_simulate(cfg, args.threads)
            print((cfg.out / "simulate.txt").read_text(encoding="utf-8"), end="")
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (EstimationError, MfqVarError) as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
