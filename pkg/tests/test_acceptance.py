"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line that is printed in the terminal
summary (and immediately with ``-s``). Criteria that the calibrated model
does not meet are left failing; see the project notes for the analysis.
"""

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats as sps

from sparselob import book, cli
from sparselob.book import BookState, CancelMarks, LimitOrderMarks, MarketOrderMarks, Side
from sparselob.config import load_config
from sparselob.engine import run_monte_carlo, simulate
from sparselob.stats import event_intensity_histogram, expected_window_counts, signature_plot
from sparselob.stochastic import (
    CancelFlow,
    LimitFlow,
    MarketFlow,
    limit_distance_rate,
    make_stream,
    sample_limit_distance,
    sample_market_volume,
    sample_volume_mark,
)

N_RUNS = 10_000


def report(record, name, ok, detail):
    record(name, ok, detail)
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok


@pytest.fixture(scope="module")
def cfg():
    return load_config()


@pytest.fixture(scope="module")
def ensemble(cfg):
    return run_monte_carlo(cfg, N_RUNS)


def _mean_se(x):
    return x.mean(), x.std(ddof=1) / math.sqrt(len(x))


def test_c1_spread_mean(ensemble, cfg, record_criterion):
    m, se = _mean_se(ensemble.limit_distances(1, cfg.cutoff_time))
    ok = abs(m - 6.10) <= 0.9
    detail = f"mean spread {m:.3f} EUR (se {se:.3f}) over {N_RUNS} runs, target 6.10 +- 0.9"
    assert report(record_criterion, "C1 spread mean", ok, detail), detail


def test_c2_deeper_distances(ensemble, cfg, record_criterion):
    m2, se2 = _mean_se(ensemble.limit_distances(2, cfg.cutoff_time))
    m3, se3 = _mean_se(ensemble.limit_distances(3, cfg.cutoff_time))
    ok = abs(m2 - 10.70) <= 1.6 and abs(m3 - 14.20) <= 2.1
    detail = (
        f"k=2 mean {m2:.3f} (se {se2:.3f}) target 10.70 +- 1.6; "
        f"k=3 mean {m3:.3f} (se {se3:.3f}) target 14.20 +- 2.1"
    )
    assert report(record_criterion, "C2 deeper limit distances", ok, detail), detail


def test_c3_ordering(ensemble, cfg, record_criterion):
    small = run_monte_carlo(replace(cfg, master_seed=cfg.master_seed + 1), 100)
    lines, ok = [], True
    for label, ens in (("10000 runs", ensemble), ("100 runs", small)):
        means = [ens.limit_distances(k, cfg.cutoff_time).mean() for k in (1, 2, 3)]
        ok &= means[0] < means[1] < means[2]
        lines.append(f"{label}: " + " < ".join(f"{m:.3f}" for m in means))
    detail = "; ".join(lines)
    assert report(record_criterion, "C3 ordering k=1<2<3", ok, detail), detail


def test_c4_samuelson(ensemble, cfg, record_criterion):
    h = event_intensity_histogram(ensemble, 10)
    tot = h.mean_total
    non_decreasing = bool(np.all(np.diff(tot) >= 0))
    ratio = tot[-1] / tot[0]
    # closed form with the spread frozen at the ensemble mean (market flow is a small share)
    spread = float(ensemble.limit_distances(1, cfg.cutoff_time).mean())
    closed = expected_window_counts(cfg.params, h.edges, spread=spread).sum(axis=1)
    closed_ratio = closed[-1] / closed[0]
    ok = non_decreasing and ratio > 1.2 and closed_ratio > 1.2
    detail = (
        f"windows non-decreasing={non_decreasing}, last/first {ratio:.3f} "
        f"(closed form {closed_ratio:.3f}), first {tot[0]:.1f} last {tot[-1]:.1f}"
    )
    assert report(record_criterion, "C4 Samuelson effect", ok, detail), detail


def test_c5_signature_shape(cfg, record_criterion):
    taus = cfg.stats.tau_grid
    sp = signature_plot([simulate(cfg, r) for r in range(50)], taus, cfg.start_time, cfg.cutoff_time)
    c = sp.c_hat
    rises = [(taus[i], taus[i + 1], c[i + 1] / c[i]) for i in range(len(c) - 1) if c[i + 1] > 1.05 * c[i]]
    last_change = abs(c[-1] - c[-2]) / c[-2]
    ok = not rises and last_change < 0.10
    detail = (
        f"C(tau) {c[0]:.2f} .. {c[-1]:.2f} EUR^2/h; "
        f"violations >5%: {[(a, b, round(r, 3)) for a, b, r in rises]}; last-step change {last_change:.3f}"
    )
    assert report(record_criterion, "C5 signature plot shape", ok, detail), detail


def test_c6_sampler_distribution(cfg, record_criterion):
    p = cfg.params
    hom = p.replace_blocks(
        market=MarketFlow(p.ask.market.lambda_bar, 0.0, 0.0),
        limit=LimitFlow(p.ask.limit.lambda_bar, 0.0, p.ask.limit.A, 0.0),
        cancel=CancelFlow(p.ask.cancel.lambda_bar, 0.0),
    )
    n_sess = 1000
    counts = run_monte_carlo(replace(cfg, params=hom), n_sess).n_events
    duration = cfg.cutoff_time - cfg.start_time
    mu = (2 * p.ask.market.lambda_bar + 2 * p.ask.limit.lambda_bar + 2 * p.K * p.ask.cancel.lambda_bar) * duration
    # bins with equal Poisson mass
    n_bins = 20
    cuts = sps.poisson.ppf(np.linspace(0, 1, n_bins + 1)[1:-1], mu)
    cuts = np.unique(cuts)
    edges_cdf = np.concatenate([[0.0], sps.poisson.cdf(cuts, mu), [1.0]])
    expected = np.diff(edges_cdf) * n_sess
    observed = np.bincount(np.searchsorted(cuts, counts, side="left"), minlength=len(expected))
    chi = sps.chisquare(observed, expected)

    inh = p.replace_blocks(market=replace(p.ask.market, beta=0.0))
    ens = run_monte_carlo(replace(cfg, params=inh), 1000)
    per_hour = ens.window_counts.sum(axis=(0, 2)).reshape(3, -1).sum(axis=1)
    e = expected_window_counts(inh, [0.0, 1.0, 2.0, 3.0], spread=0.0).sum(axis=1) * 1000
    ratio, ratio_exp = per_hour[2] / per_hour[0], e[2] / e[0]
    sigma = ratio_exp * math.sqrt(1 / e[0] + 1 / e[2])
    ok = chi.pvalue > 0.01 and abs(ratio - ratio_exp) <= 3 * sigma
    detail = (
        f"homogeneous chi2 p={chi.pvalue:.3f} (mean {counts.mean():.1f} vs {mu:.1f}); "
        f"[T-2,T-1]/[T-4,T-3] ratio {ratio:.5f} vs {ratio_exp:.5f} (3 sigma {3 * sigma:.5f})"
    )
    assert report(record_criterion, "C6 sampler distribution", ok, detail), detail


def _random_book(rng):
    K = int(rng.integers(2, 8))
    gaps_b = rng.integers(1, 400, K)
    gaps_a = rng.integers(1, 400, K)
    best_bid = int(rng.integers(-2000, 8000))
    bids = tuple(int(x) for x in best_bid - np.concatenate([[0], np.cumsum(gaps_b[1:])]))
    asks = tuple(int(x) for x in best_bid + gaps_a[0] + np.concatenate([[0], np.cumsum(gaps_a[1:])]))
    lots = lambda: tuple(int(x) for x in rng.integers(1, 300, K))
    return BookState(0.0, bids, asks, lots(), lots())


def _distance(rng):
    # mix of sub-tick, typical and far distances
    return float(rng.choice([1e-4, 0.01, 1.0, 7.0, 40.0]) * rng.standard_exponential()) + 1e-9


def test_c7_transition_closure(record_criterion):
    rng = np.random.default_rng(7)
    n_steps, violations, first = 1_000_000, 0, None
    state = _random_book(rng)
    for step in range(n_steps):
        if step % 5000 == 0:
            state = _random_book(rng)
        K = state.K
        side = Side.BID if rng.random() < 0.5 else Side.ASK
        u = rng.random()
        if u < 0.2:
            depth = sum(state.lots(side))
            if depth < 2:
                continue
            q = int(rng.integers(1, depth))
            marks = MarketOrderMarks(
                q * state.lot,
                tuple(_distance(rng) for _ in range(K - 1)),
                tuple(float(rng.integers(1, 300)) * state.lot for _ in range(K - 1)),
            )
            state, _ = book.apply_market_order(state, side, marks)
        elif u < 0.7:
            state, _ = book.apply_limit_order(
                state, side, LimitOrderMarks(_distance(rng), float(rng.integers(1, 300)) * state.lot)
            )
        else:
            state = book.apply_cancel(
                state, side, CancelMarks(int(rng.integers(1, K + 1)), _distance(rng), float(rng.integers(1, 300)) * 0.1)
            )
        problems = book.validate(state, K)
        if problems:
            violations += 1
            first = first or (step, problems)
    ok = violations == 0
    detail = f"{n_steps} transitions, {violations} validate() violations" + (f", first {first}" if first else "")
    assert report(record_criterion, "C7 transition closure", ok, detail), detail


def test_c8_determinism(tmp_path, record_criterion):
    argv = lambda out, *extra: [str(x) for x in ("--seed", 424242, "--out", tmp_path / out, *extra)]
    assert cli.main(["simulate", *argv("s1")]) == 0
    assert cli.main(["simulate", *argv("s2")]) == 0
    same_sim = all(
        (tmp_path / "s1" / f).read_bytes() == (tmp_path / "s2" / f).read_bytes()
        for f in ("trajectory.csv", "snapshots.csv")
    )
    assert cli.main(["montecarlo", *argv("w1", "--runs", 2000, "--workers", 1)]) == 0
    assert cli.main(["montecarlo", *argv("w8", "--runs", 2000, "--workers", 8)]) == 0
    files = sorted(f.name for f in (tmp_path / "w1").iterdir())
    same_mc = files == sorted(f.name for f in (tmp_path / "w8").iterdir()) and all(
        (tmp_path / "w1" / f).read_bytes() == (tmp_path / "w8" / f).read_bytes() for f in files
    )
    ok = same_sim and same_mc
    detail = f"simulate byte-identical={same_sim}; montecarlo 1 vs 8 workers identical={same_mc} ({len(files)} files)"
    assert report(record_criterion, "C8 determinism", ok, detail), detail


def test_c9_mark_fidelity(cfg, record_criterion):
    p = cfg.params
    n = 100_000
    vols = np.array(p.ask.market_volume.volumes)
    rng = make_stream(cfg.master_seed, 900)
    lines, ok = [], True
    for label, law, draw in (
        ("p^M", p.ask.market_volume, lambda: sample_market_volume(rng, p, 1e9)),
        ("p^L", p.ask.limit_volume, lambda: sample_volume_mark(rng, p)),
    ):
        x = np.array([draw() for _ in range(n)])
        counts = np.array([(x == v).sum() for v in vols])
        probs = np.array(law.probs)
        z = (counts - n * probs) / np.sqrt(n * probs * (1 - probs))
        ok &= bool(np.all(np.abs(z) <= 3)) and counts.sum() == n
        lines.append(f"{label} max |z| {np.abs(z).max():.2f}")
    for t in (cfg.start_time, 1.5, cfg.cutoff_time):
        z = np.array([sample_limit_distance(t, rng, p) for _ in range(n)])
        target = 1 / limit_distance_rate(t, p)
        rel = abs(z.mean() / target - 1)
        ok &= rel < 0.01
        lines.append(f"t={t:g} mean {z.mean():.3f} vs {target:.3f} (rel {rel:.4f})")
    detail = "; ".join(lines)
    assert report(record_criterion, "C9 mark distributions", ok, detail), detail
