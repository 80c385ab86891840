"""Acceptance criteria at their stated replicate counts and tolerances.

Each test records a single PASS/FAIL line that is repeated in the pytest
terminal summary.  The Monte Carlo studies dominate the runtime (roughly
20 minutes on one core).
"""
import csv
import io
import os

import numpy as np
import pytest
from scipy import stats

from mfqvar import backtest as bt
from mfqvar import forecast as fc
from mfqvar import mcs, mfqarch, midas, qreg, simulate

N_JOBS = max(1, os.cpu_count() or 1)
R_REPS = 500
TAU = 0.05
# reference means at N=2500, tau=0.05 (5000-replicate study)
REFERENCE_2500 = {"beta0": 0.057, "theta": 0.125, "omega2": 1.985,
                  "beta1": 0.297, "beta2": 0.246, "beta3": 0.196, "beta4": 0.148}
RESCALED = ("beta0", "theta", "beta1", "beta2", "beta3", "beta4")


def _study(n_daily, q_max=0, r_reps=R_REPS, **changes):
    cfg = simulate.DgpConfig(n_daily=n_daily, seed=20_000 + n_daily, **changes)
    return simulate.run_mc_study(cfg, r_reps, (TAU,), q_max=q_max, n_jobs=N_JOBS, certify=True)[0]


@pytest.fixture(scope="module")
def studies():
    return {
        1250: _study(1250),
        2500: _study(2500),
        5000: _study(5000, q_max=8),
    }


# ------------------------------------------------------------------ 1


def test_c1_parameter_recovery(studies, report_criterion):
    mid = studies[2500]
    mean = dict(zip(mid.names, mid.mean))
    dev = {k: mean[k] - REFERENCE_2500[k] for k in RESCALED}
    close = all(abs(v) <= 0.03 for v in dev.values())
    lo, hi = studies[1250], studies[5000]
    mse_drop = bool(np.all(hi.mse < lo.mse))
    normal = _study(2500, r_reps=200, mv_innovation="normal")
    nmean = dict(zip(normal.names, normal.mean))
    normal_close = all(abs(nmean[k] - REFERENCE_2500[k]) <= 0.03 for k in RESCALED)
    failed = sum(s.n_failed for s in studies.values()) + normal.n_failed
    detail = (
        "mean-ref at N=2500: " + ", ".join(f"{k} {v:+.3f}" for k, v in dev.items())
        + f"; omega2 mean {mean['omega2']:.3f} (ref {REFERENCE_2500['omega2']}, not rescaled, info only)"
        + "; MSE N=1250 -> N=5000: "
        + ", ".join(f"{n} {a:.4f}->{b:.4f}" for n, a, b in zip(lo.names, lo.mse, hi.mse))
        + f"; normal-MV run within 0.03: {normal_close}; failed fits {failed}"
    )
    ok = report_criterion(1, close and mse_drop and normal_close, detail)
    assert ok, detail


# ------------------------------------------------------------------ 2


def test_c2_lag_test_operating_characteristics(studies, report_criterion):
    nonrej = studies[5000].nonrejection_pct
    b4, b5 = nonrej[3], nonrej[4]
    ok = 88.0 <= b5 <= 98.0 and b4 < 5.0
    detail = f"non-rejection beta5=0 {b5:.1f}% (need 88-98), beta4=0 {b4:.1f}% (need <5), R={R_REPS}, N=5000"
    assert report_criterion(2, ok, detail), detail


# ------------------------------------------------------------------ 3


def test_c3_quantile_regression_oracle(studies, report_criterion):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(5, 400))
        tau = float(rng.uniform(0.01, 0.99))
        kind = rng.integers(3)
        y = [rng.standard_normal, rng.standard_cauchy, lambda m: rng.integers(-3, 4, m).astype(float)][kind](n)
        fit = qreg.fit(y, np.ones((n, 1)), tau)
        order = np.sort(y)
        emp = order[max(int(np.ceil(n * tau)) - 1, 0)]
        target = qreg.check_loss(y - emp, tau).sum()
        worst = max(worst, abs(fit.loss - target))
    n_cert = sum(s.cert_ok.size for s in studies.values())
    cert = all(bool(s.cert_ok.all()) for s in studies.values())
    ok = worst <= 1e-9 and cert and n_cert > 0
    detail = f"max |loss - empirical loss| {worst:.2e} over 1000 samples; certificate holds on {n_cert} MC fits: {cert}"
    assert report_criterion(3, ok, detail), detail


# ------------------------------------------------------------------ 4


def test_c4_beta_weight_properties(report_criterion):
    rng = np.random.default_rng(4)
    worst_sum, monotone = 0.0, True
    for _ in range(10_000):
        k = int(rng.integers(1, 121))
        om2 = float(np.exp(rng.uniform(np.log(1.0 + 1e-6), np.log(200.0))))
        w = midas.beta_weights(k, 1.0, om2).weights
        worst_sum = max(worst_sum, abs(w.sum() - 1.0))
        monotone &= bool(np.all(np.diff(w) <= 0.0))
    ok = worst_sum <= 1e-12 and monotone
    detail = f"max |sum w - 1| {worst_sum:.1e}; non-increasing in every draw: {monotone}"
    assert report_criterion(4, ok, detail), detail


# ------------------------------------------------------------------ 5


def test_c5_stationarity(report_criterion):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(1000):
        b1, z = rng.uniform(0, 2), rng.uniform(0.1, 1.5)
        rep = mfqarch.check_stationarity([b1], theta=rng.uniform(0, 1), beta_x=rng.uniform(0, 1), z_r=z)
        worst = max(worst, abs(rep.spectral_radius - z * b1))
    dgp = simulate.DgpConfig().stationarity()
    ok = worst <= 1e-12 and dgp.stationary
    detail = f"max |radius - z_r beta1| {worst:.1e}; reference DGP radius {dgp.spectral_radius:.4f} stationary"
    assert report_criterion(5, ok, detail), detail


# ------------------------------------------------------------------ 6


def test_c6_backtest_size(report_criterion):
    rng = np.random.default_rng(6)
    n, reps = 1000, 2000
    rej = np.zeros(3)
    for _ in range(reps):
        ret = rng.standard_normal(n)
        track = bt.VarTrack.from_arrays(ret, np.full(n, stats.norm.ppf(TAU)), TAU)
        rep = bt.backtest(track)
        rej += np.array([rep.uc_p, rep.cc_p, rep.dq_p]) < 0.05
    pct = 100.0 * rej / reps
    ok = bool(np.all(np.abs(pct - 5.0) <= 1.5))
    detail = f"rejection rates UC {pct[0]:.2f}%, CC {pct[1]:.2f}%, DQ {pct[2]:.2f}% (need 3.5-6.5)"
    assert report_criterion(6, ok, detail), detail


# ------------------------------------------------------------------ 7


def test_c7_in_sample_coverage(report_criterion):
    cfg = simulate.DgpConfig(betas=(0.05, 0.25, 0.2, 0.15, 0.1), beta_x=0.1, n_daily=5000, seed=77)
    panel = simulate.simulate_dgp(cfg)
    parts, ok = [], True
    for tau in (0.01, 0.05, 0.10):
        spec = mfqarch.MfqSpec(q=4, k_lags=cfg.k_lags, use_midas=True, use_x=True, tau=tau)
        model = mfqarch.fit_profiled(panel, spec)
        pos = np.arange(model.first_row, len(panel))
        hits = panel.ret[pos] < mfqarch.predict_path(model, panel, pos)
        freq = hits.mean()
        band = 3.0 * np.sqrt(tau * (1 - tau) / pos.size)
        ok &= abs(freq - tau) <= band
        parts.append(f"tau {tau:g}: {freq:.4f} (band +-{band:.4f})")
    detail = "; ".join(parts)
    assert report_criterion(7, ok, detail), detail


# ------------------------------------------------------------------ 8


def test_c8_mcs_sanity(report_criterion):
    rng = np.random.default_rng(8)
    n = 1000
    good = 1.0 + 0.3 * rng.standard_normal(n) ** 2
    worse = good + 0.2 + 0.1 * rng.standard_normal(n)
    dom = mcs.run_mcs(mcs.LossPanel(["good", "worse"], np.column_stack([good, worse]), TAU), seed=1)
    dominated = all(s == ["good"] for s in dom.survivors.values())
    same = mcs.run_mcs(mcs.LossPanel(list("abc"), np.column_stack([good] * 3), TAU), seed=1)
    tied = all(len(s) == 3 for s in same.survivors.values()) and all(p == 1.0 for p in same.pvalues.values())
    mixed = np.column_stack([good, good + 0.01 * rng.standard_normal(n), worse])
    runs = [mcs.run_mcs(mcs.LossPanel(list("xyz"), mixed, TAU), seed=9) for _ in range(2)]
    repro = runs[0].survivors == runs[1].survivors and runs[0].pvalues == runs[1].pvalues
    ok = dominated and tied and repro
    detail = f"dominated model removed at both levels: {dominated}; identical losses all survive with p=1: {tied}; fixed seed reproduces: {repro}"
    assert report_criterion(8, ok, detail), detail


# ------------------------------------------------------------------ 9


def _format_checks(tmp_path, tracks, lo, hi):
    reports = [bt.backtest(t) for t in tracks]
    table = list(csv.reader(io.StringIO(bt.reports_to_csv(reports))))
    ok = table[0] == ["model", "lf_var", "mean_var", "sd_var", "ae", "uc_p", "cc_p", "dq_p"]
    ok &= len(table) == 1 + len(tracks)
    rep = mcs.run_mcs(mcs.loss_panel(tracks), n_boot=500)
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    ok &= rows[0] == ["model", "lf_var", "mean_loss", "mcs_p", "in_0.75", "in_0.9"]
    ok &= rep.as_text().splitlines()[1].split()[:4] == ["model", "lf_var", "mean_loss", "mcs_p"]
    simulate.write_estimates_table([lo, hi], tmp_path / "est.csv")
    est = (tmp_path / "est.csv").read_text().splitlines()
    ok &= est[0] == "coef,gamma0,mean_N1250,mse_N1250,mean_N5000,mse_N5000"
    ok &= [r.split(",")[0] for r in est[1:]] == ["beta0", "theta", "omega2", "beta1", "beta2", "beta3", "beta4"]
    simulate.write_lag_table([hi], tmp_path / "lag.csv")
    lag = (tmp_path / "lag.csv").read_text().splitlines()
    ok &= lag[0] == "null,tau0.05_N5000" and lag[1].startswith("beta1=0,") and len(lag) == 9
    return ok


def test_c9_formats_and_mcs_dominance(studies, tmp_path, report_criterion):
    survived = 0
    tracks = None
    for s in range(100):
        cfg = simulate.DgpConfig(betas=(0.05, 0.25, 0.2, 0.15, 0.1), beta_x=0.1, n_daily=2000, seed=9000 + s)
        panel = simulate.simulate_dgp(cfg)
        settings = fc.ModelSettings("mfqarchx", q=4, k_lags=cfg.k_lags)
        track = fc.rolling_forecast(panel, settings, TAU, 1500, window=1500, stride=50, seed=s).track
        # misspecified baseline: the unconditional window quantile, held constant
        const = np.full(len(track), np.quantile(panel.ret[:1500], TAU))
        base = bt.VarTrack(track.dates, track.ret, const, TAU, "constant")
        rep = mcs.run_mcs(mcs.loss_panel([track, base]), (0.25, 0.10), 5000, 10, s)
        survived += all("mfqarchx" in v for v in rep.survivors.values())
        tracks = tracks or [track, base]
    formats = _format_checks(tmp_path, tracks, studies[1250], studies[5000])
    ok = survived >= 90 and formats
    detail = f"mfqarchx in the set at both levels in {survived}/100 experiments (need >=90); output formats match: {formats}"
    assert report_criterion(9, ok, detail), detail
