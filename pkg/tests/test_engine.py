from dataclasses import replace

import numpy as np
import pytest

from sparselob import fileio
from sparselob.book import BookState, validate
from sparselob.engine import (
    ConfigError,
    reference_config,
    run_monte_carlo,
    simulate,
)
from sparselob.stochastic import CancelFlow, MarketFlow, reference_params

from . import oracle_sim

SNAPS = (0.5, 1.0, 2.0, 3.0)


@pytest.fixture(scope="module")
def cfg():
    return reference_config(snapshot_times=SNAPS)


@pytest.mark.parametrize("run", [0, 1, 7, 42])
def test_engines_agree_exactly(cfg, run):
    a = simulate(cfg, run, engine="python")
    b = simulate(cfg, run, engine="fast")
    assert len(a) > 1000
    assert a.same_as(b)


def test_engines_agree_with_jitter_and_other_K():
    params = reference_params(K=3)
    book = BookState.from_prices((45, 44, 42), (55, 56, 58), (5, 5, 5), (5, 5, 5))
    c = reference_config(params=params, initial_book=book, initial_jitter=0.5)
    for run in range(3):
        assert simulate(c, run, engine="python").same_as(simulate(c, run, engine="fast"))


def test_determinism_and_stream_independence(cfg):
    assert simulate(cfg, 3).same_as(simulate(cfg, 3))
    assert not simulate(cfg, 3).same_as(simulate(cfg, 4))
    other = replace(cfg, master_seed=cfg.master_seed + 1)
    assert not simulate(cfg, 3).same_as(simulate(other, 3))


def test_event_times_and_books(cfg):
    tr = simulate(cfg, 5)
    assert np.all(np.diff(tr.times) >= 0)
    assert tr.times[0] > cfg.start_time and tr.times[-1] <= cfg.cutoff_time
    assert np.all(tr.best_bid < tr.best_ask)
    assert validate(tr.final) == []
    assert tr.window_counts.sum() == len(tr)
    assert tr.window_counts.shape == (cfg.n_windows, 6)


def test_snapshots_match_replay(cfg, tmp_path):
    tr = simulate(cfg, 2)
    fileio.write_trajectory(tr, tmp_path / "t.csv")
    rows = fileio.read_trajectory(tmp_path / "t.csv")
    states = fileio.replay(tr.initial, rows)
    times = np.array([r.time for r in rows])
    for s in SNAPS:
        i = np.searchsorted(times, s, side="right")
        expect = states[i - 1] if i else tr.initial
        snap = tr.snapshots[s]
        assert snap.bid_ticks == expect.bid_ticks and snap.ask_ticks == expect.ask_ticks
        assert snap.bid_lots == expect.bid_lots and snap.ask_lots == expect.ask_lots
    f = tr.snapshots[3.0]
    assert (f.bid_ticks, f.ask_ticks) == (tr.final.bid_ticks, tr.final.ask_ticks)


def test_zero_intensities_produce_no_events():
    p = reference_params()
    zero = p.replace_blocks(
        market=MarketFlow(0.0, 0.5, 0.5),
        limit=replace(p.ask.limit, lambda_bar=0.0),
        cancel=CancelFlow(0.0, 0.6),
    )
    c = reference_config(params=zero)
    for engine in ("python", "fast"):
        tr = simulate(c, 0, engine=engine)
        assert len(tr) == 0
        assert tr.final.bid_ticks == c.initial_book.bid_ticks
        assert tr.snapshots[3.0].ask_ticks == c.initial_book.ask_ticks


def test_unknown_engine(cfg):
    with pytest.raises(ValueError):
        simulate(cfg, 0, engine="gpu")


def test_config_validation():
    with pytest.raises(ConfigError):
        reference_config(cutoff_time=5.0)
    with pytest.raises(ConfigError):
        reference_config(snapshot_times=(3.5,))
    with pytest.raises(ConfigError):
        reference_config(window_minutes=7.0)


def test_ensemble_matches_single_runs(cfg):
    ens = run_monte_carlo(cfg, 20, chunk=6)
    for r in (0, 13, 19):
        tr = simulate(cfg, r)
        assert ens.n_events[r] == len(tr)
        assert np.array_equal(ens.window_counts[r], tr.window_counts)
        snap = tr.snapshots[3.0]
        assert tuple(ens.snap_ticks[r, -1, 0]) == snap.bid_ticks
        assert tuple(ens.snap_lots[r, -1, 1]) == snap.ask_lots


def test_ensemble_independent_of_workers(cfg):
    a = run_monte_carlo(cfg, 60, workers=1, chunk=7)
    b = run_monte_carlo(cfg, 60, workers=2, chunk=11)
    for name in ("n_events", "snap_ticks", "snap_lots", "window_counts"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_single_run_ensemble(cfg):
    ens = run_monte_carlo(cfg, 1)
    assert len(ens) == 1
    assert ens.limit_distances(1, 3.0).shape == (1,)
    with pytest.raises(ConfigError):
        run_monte_carlo(cfg, 0)


@pytest.mark.slow
def test_distribution_matches_independent_oracle():
    n_oracle, n_pkg = 600, 6000
    res = [oracle_sim.run(s) for s in range(n_oracle)]
    od = np.array([r[0] for r in res])
    on = np.array([r[1] for r in res], dtype=float)
    ens = run_monte_carlo(reference_config(), n_pkg)
    pd = np.stack([ens.limit_distances(k, 3.0) for k in (1, 2, 3)], axis=1)
    pn = ens.n_events.astype(float)
    for o, p in [(od[:, k], pd[:, k]) for k in range(3)] + [(on, pn)]:
        se = np.sqrt(o.var() / len(o) + p.var() / len(p))
        assert abs(o.mean() - p.mean()) < 4 * se, (o.mean(), p.mean(), se)
