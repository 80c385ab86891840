import numpy as np
import pytest
from hypothesis import given, strategies as st

from mfqvar import mcs
from mfqvar.backtest import VarTrack
from mfqvar.errors import DataError


def _panel(losses, names=None):
    names = names or [f"m{k}" for k in range(losses.shape[1])]
    return mcs.LossPanel(names, losses, 0.05)


def test_quantile_loss_series():
    tr = VarTrack.from_arrays([1.0, -2.0], [-1.0, -1.0], 0.05)
    assert np.allclose(mcs.quantile_loss_series(tr), [0.1, 0.95])


def test_dominated_model_is_eliminated():
    rng = np.random.default_rng(0)
    base = rng.exponential(1.0, 1000)
    losses = np.column_stack([base, base + 0.5, base + rng.normal(0, 0.01, 1000)])
    rep = mcs.run_mcs(_panel(losses), n_boot=1000)
    for level in (0.75, 0.90):
        assert "m1" not in rep.survivors[level]
        assert "m0" in rep.survivors[level]
    assert rep.pvalues["m1"] == 0.0


def test_identical_losses_survive_with_p_one():
    rng = np.random.default_rng(1)
    base = rng.exponential(1.0, 500)
    rep = mcs.run_mcs(_panel(np.column_stack([base, base, base])), n_boot=500)
    assert all(rep.pvalues[m] == 1.0 for m in rep.models)
    assert rep.survivors[0.75] == rep.models == rep.survivors[0.9]


def test_seed_reproducibility():
    rng = np.random.default_rng(2)
    losses = rng.exponential(1.0, (600, 4)) + np.array([0, 0.02, 0.05, 0.1])
    a = mcs.run_mcs(_panel(losses), n_boot=800, seed=11)
    b = mcs.run_mcs(_panel(losses), n_boot=800, seed=11)
    assert a.survivors == b.survivors and a.pvalues == b.pvalues


def test_permutation_equivariance():
    rng = np.random.default_rng(3)
    losses = rng.exponential(1.0, (600, 4)) + np.array([0, 0.03, 0.08, 0.2])
    names = ["a", "b", "c", "d"]
    perm = [2, 0, 3, 1]
    a = mcs.run_mcs(_panel(losses, names), n_boot=800, seed=5)
    b = mcs.run_mcs(_panel(losses[:, perm], [names[k] for k in perm]), n_boot=800, seed=5)
    for m in names:
        assert a.pvalues[m] == pytest.approx(b.pvalues[m], abs=0.02)


@given(st.integers(0, 1000), st.integers(2, 5))
def test_last_model_survives_and_pvalues_valid(seed, m):
    rng = np.random.default_rng(seed)
    losses = rng.exponential(1.0, (200, m)) + rng.uniform(0, 0.3, m)
    rep = mcs.run_mcs(_panel(losses), n_boot=200, seed=seed)
    assert len(rep.survivors[0.9]) >= 1
    assert set(rep.survivors[0.75]) <= set(rep.survivors[0.9])
    assert all(0.0 <= p <= 1.0 for p in rep.pvalues.values())
    assert max(rep.pvalues.values()) == 1.0


def test_bootstrap_means_block_structure():
    losses = np.arange(20, dtype=float)[:, None]
    means = mcs._bootstrap_means(losses, 50, 20, seed=0)
    # one block of full length covers the whole circle, so every mean is the sample mean
    assert np.allclose(means, losses.mean())


def test_reports_and_errors():
    rng = np.random.default_rng(4)
    losses = rng.exponential(1.0, (300, 2))
    rep = mcs.run_mcs(mcs.LossPanel(["x", "y"], losses, 0.05, ["dIP", ""]), n_boot=100)
    head = rep.to_csv().splitlines()[0]
    assert head == "model,lf_var,mean_loss,mcs_p,in_0.75,in_0.9"
    assert "unordered" in rep.as_text().splitlines()[0]
    with pytest.raises(DataError):
        mcs.run_mcs(_panel(losses[:, :1]))
    tr = VarTrack.from_arrays(np.zeros(5), np.zeros(5), 0.05)
    tr2 = VarTrack.from_arrays(np.zeros(6), np.zeros(6), 0.05)
    with pytest.raises(DataError):
        mcs.loss_panel([tr, tr2])
