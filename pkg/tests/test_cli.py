import numpy as np
import pytest

from mfqvar import cli, simulate, timegrid
from mfqvar.backtest import read_track_csv


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    cfg = simulate.DgpConfig(betas=(0.05, 0.25, 0.2, 0.15, 0.1), beta_x=0.1, n_daily=700, k_lags=12, seed=21)
    panel = simulate.simulate_dgp(cfg)
    timegrid.write_daily_csv(panel, d / "daily.csv")
    timegrid.write_monthly_csv(panel, d / "monthly.csv")
    oos = str(panel.dates[450])
    (d / "run.ini").write_text(
        "[run]\n"
        "daily = daily.csv\nmonthly = monthly.csv\nlf_var = MV\n"
        f"tau = 0.05\nq = auto\nq_max = 3\nwindow = 400\nstride = 50\noos_start = {oos}\n"
        "models = mfqarchx, garch, riskmetrics, sav\nseed = 4\nout = out\n\n"
        "[mfqarchx]\ngrid_size = 10\n\n[sav]\ncaviar_starts = 300\ncaviar_refine = 2\n\n"
        "[mcs]\nn_boot = 300\n\n"
        "[simulate]\nreps = 2\nn_daily = 1250\ntau_levels = 0.05\nq_max = 2\n",
        encoding="utf-8",
    )
    return d


def _run(*args):
    return cli.main(list(args))


def test_full_pipeline_is_deterministic(workdir, capsys):
    cfg = str(workdir / "run.ini")
    for out in ("a", "b"):
        o = str(workdir / out)
        assert _run("forecast", "--config", cfg, "--out", o) == 0
        assert _run("backtest", "--config", cfg, "--out", o) == 0
        assert _run("mcs", "--config", cfg, "--out", o) == 0
    for name in ("forecast_mfqarchx.csv", "forecast_sav.csv", "backtest.csv", "mcs.csv", "mcs.txt"):
        assert (workdir / "a" / name).read_bytes() == (workdir / "b" / name).read_bytes()
    track = read_track_csv(workdir / "a" / "forecast_mfqarchx.csv")
    assert track.lf_var == "MV" and len(track) == 250
    head = (workdir / "a" / "forecast_garch.csv").read_text().splitlines()[:2]
    assert head[0].startswith("# config_sha256=") and head[1] == "# seed=4"
    rows = (workdir / "a" / "backtest.csv").read_text().splitlines()
    assert len(rows) == 5


def test_threads_do_not_change_output(workdir):
    cfg = str(workdir / "run.ini")
    assert _run("forecast", "--config", cfg, "--out", str(workdir / "t"), "--threads", "2") == 0
    assert _run("forecast", "--config", cfg, "--out", str(workdir / "s")) == 0
    for name in ("forecast_garch.csv", "forecast_mfqarchx.csv"):
        assert (workdir / "t" / name).read_bytes() == (workdir / "s" / name).read_bytes()


def test_seed_override_changes_header(workdir):
    cfg = str(workdir / "run.ini")
    assert _run("forecast", "--config", cfg, "--out", str(workdir / "seed9"), "--seed", "9") == 0
    head = (workdir / "seed9" / "forecast_garch.csv").read_text().splitlines()[1]
    assert head == "# seed=9"


def test_lagtest_outputs(workdir):
    assert _run("lagtest", "--config", str(workdir / "run.ini"), "--out", str(workdir / "lag")) == 0
    rows = (workdir / "lag" / "lagtest.csv").read_text().splitlines()
    assert rows[0] == "lag,statistic,p_value,reject" and len(rows) == 4
    assert "selected q" in (workdir / "lag" / "lagtest.txt").read_text()


def test_simulate_command(workdir):
    assert _run("simulate", "--config", str(workdir / "run.ini"), "--out", str(workdir / "sim")) == 0
    est = (workdir / "sim" / "mc_estimates_tau0.05.csv").read_text().splitlines()
    assert est[0] == "coef,gamma0,mean_N1250,mse_N1250"
    assert (workdir / "sim" / "mc_lagtest.csv").is_file()


def _ini(workdir, name, body):
    p = workdir / name
    p.write_text(body, encoding="utf-8")
    return str(p)


def test_exit_codes(workdir, capsys):
    assert _run("backtest", "--config", str(workdir / "missing.ini")) == 2
    assert _run("lagtest", "--config", _ini(workdir, "q0.ini", "[run]\nq_max = 0\n")) == 2
    assert _run("backtest", "--config", _ini(workdir, "bad.ini", "[run]\nmodels = foo\n")) == 2
    assert _run("forecast", "--config", _ini(workdir, "typo.ini", "[run]\nwindw = 5\n")) == 2
    (workdir / "broken.csv").write_text("date,ret\n2001-01-02,abc\n", encoding="utf-8")
    body = "[run]\ndaily = broken.csv\nmonthly = monthly.csv\noos_start = 2001-01-02\nmodels = garch\n"
    assert _run("forecast", "--config", _ini(workdir, "data.ini", body)) == 3
    assert _run("backtest", "--config", _ini(workdir, "nofiles.ini", "[run]\nout = nowhere\nmodels = garch\n")) == 3
    n = 700
    (workdir / "flat.csv").write_text("date,ret\n" + "".join(
        f"{np.datetime64('2001-01-01') + k},0.0\n" for k in range(n)), encoding="utf-8")
    months = "".join(f"{np.datetime64('1999-01') + k},0.5\n" for k in range(50))
    (workdir / "flat_m.csv").write_text("month,value\n" + months, encoding="utf-8")
    body = ("[run]\ndaily = flat.csv\nmonthly = flat_m.csv\nwindow = 400\n"
            f"oos_start = {np.datetime64('2001-01-01') + 500}\nmodels = garch\nout = flat_out\n")
    assert _run("forecast", "--config", _ini(workdir, "est.ini", body)) == 4


def test_mcs_needs_two_models(workdir):
    body = (workdir / "run.ini").read_text().replace(
        "models = mfqarchx, garch, riskmetrics, sav", "models = garch")
    assert _run("mcs", "--config", _ini(workdir, "one.ini", body), "--out", str(workdir / "a")) == 2


def test_duplicated_track_survives(workdir):
    out = workdir / "dup"
    out.mkdir()
    src = (workdir / "a" / "forecast_garch.csv").read_text()
    (out / "forecast_garch.csv").write_text(src)
    (out / "forecast_gjr.csv").write_text(src.replace("# model=garch", "# model=gjr"))
    body = (workdir / "run.ini").read_text().replace(
        "models = mfqarchx, garch, riskmetrics, sav", "models = garch, gjr")
    assert _run("mcs", "--config", _ini(workdir, "dup.ini", body), "--out", str(out)) == 0
    rows = (out / "mcs.csv").read_text().splitlines()[1:]
    assert all(r.endswith(",1,1") for r in rows)
