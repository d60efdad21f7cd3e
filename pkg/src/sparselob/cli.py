"""Command-line entry points.

Exit codes: 0 success, 2 configuration or usage error, 1 internal invariant
breach.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import fileio
from .book import BookError
from .config import load_config
from .engine import ConfigError, SimulationError, run_monte_carlo, simulate
from .stats import (
    EmptyWindow,
    MissingSnapshot,
    event_intensity_histogram,
    limit_distance_distribution,
    signature_plot,
)
from .stochastic import KIND_GROUPS


def _config(args):
    c = load_config(args.config)
    if args.seed is not None:
        c = replace(c, master_seed=args.seed)
    return c


def _outdir(args, c) -> Path:
    out = Path(args.out or c.outputs.get("dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _delim(c) -> str:
    return c.outputs.get("delimiter", ",")


def cmd_simulate(args) -> int:
    c = _config(args)
    out = _outdir(args, c)
    traj = simulate(c, args.run_index)
    fileio.write_trajectory(traj, out / "trajectory.csv", _delim(c))
    fileio.write_snapshots(traj, out / "snapshots.csv", _delim(c))
    mid = (traj.final.bid_ticks[0] + traj.final.ask_ticks[0]) * traj.tick / 2
    print(f"events: {len(traj)}")
    print(f"final mid: {fileio.fmt_mid(mid)} EUR")
    return 0


def cmd_montecarlo(args) -> int:
    c = _config(args)
    out = _outdir(args, c)
    d = _delim(c)
    ens = run_monte_carlo(c, args.runs, workers=args.workers)
    at = c.cutoff_time if c.cutoff_time in c.snapshot_times else c.snapshot_times[-1]
    levels = c.stats.levels

    header = ["run_index", "n_events", "mid_eur"] + [f"distance_{k}_eur" for k in levels]
    rows = [
        [r["run_index"], r["n_events"], fileio.fmt_mid(r["mid_eur"])]
        + [fileio.fmt_price(r[f"distance_{k}_eur"]) for k in levels]
        for r in ens.rows(at, levels)
    ]
    fileio.write_table(out / "summary.csv", header, rows, d)

    stats_rows = []
    for k in levels:
        s = limit_distance_distribution(ens, k, at, c.stats.bin_width, c.stats.clip_quantile)
        fileio.write_table(
            out / f"distribution_k{k}.csv",
            ["bin_lo_eur", "bin_hi_eur", "count"],
            [[fileio.fmt_price(a), fileio.fmt_price(b), n] for a, b, n in s.rows()],
            d,
        )
        stats_rows.append([k, s.n, f"{s.mean:.6f}", f"{s.std:.6f}"])
    fileio.write_table(out / "distribution_stats.csv", ["level", "n", "mean_eur", "std_eur"], stats_rows, d)

    hist = event_intensity_histogram(ens, c.window_minutes)
    fileio.write_table(
        out / "intensity.csv",
        ["t_start_h", "t_end_h", *KIND_GROUPS, "total"],
        [
            [f"{r['t_start_h']:.6f}", f"{r['t_end_h']:.6f}"]
            + [f"{r[g]:.4f}" for g in KIND_GROUPS]
            + [f"{r['total']:.4f}"]
            for r in hist.rows()
        ],
        d,
    )
    if args.runs == 1:
        traj = simulate(c, 0)
        fileio.write_trajectory(traj, out / "trajectory.csv", d)
        fileio.write_snapshots(traj, out / "snapshots.csv", d)

    for row in stats_rows:
        print(f"level {row[0]}: mean distance {float(row[2]):.3f} EUR over {row[1]} runs")
    return 0


def cmd_signature(args) -> int:
    c = _config(args)
    taus = c.stats.tau_grid
    if args.tau_grid:
        try:
            taus = tuple(float(x) for x in args.tau_grid.split(","))
        except ValueError:
            raise ConfigError(f"--tau-grid: expected comma-separated seconds, got {args.tau_grid!r}") from None
    if any(t <= 0 for t in taus):
        raise ConfigError("--tau-grid entries must be positive")
    out = _outdir(args, c)
    trajs = [simulate(c, r) for r in range(args.runs)]
    sp = signature_plot(trajs, taus, c.start_time, c.cutoff_time)
    fileio.write_table(
        out / "signature.csv",
        ["tau_s", "c_hat_eur2_per_h"],
        [[f"{tau:g}", f"{v:.6f}"] for tau, v in sp.rows()],
        _delim(c),
    )
    print(f"signature plot over {sp.n_runs} runs, {len(taus)} steps")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sparselob", description="Sparse limit order book simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None, help="config file (default: shipped paper-18H.cfg)")
        sp.add_argument("--seed", type=int, default=None, help="override the master seed")
        sp.add_argument("--out", default=None, help="output directory")

    s = sub.add_parser("simulate", help="run one trajectory")
    common(s)
    s.add_argument("--run-index", type=int, default=0)
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("montecarlo", help="run an ensemble and write distribution tables")
    common(m)
    m.add_argument("--runs", type=int, default=10000)
    m.add_argument("--workers", type=int, default=1)
    m.set_defaults(func=cmd_montecarlo)

    g = sub.add_parser("signature", help="realized-volatility signature plot table")
    common(g)
    g.add_argument("--runs", type=int, default=50)
    g.add_argument("--tau-grid", default=None, help="comma-separated steps in seconds")
    g.set_defaults(func=cmd_signature)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, EmptyWindow, MissingSnapshot) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SimulationError, BookError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
