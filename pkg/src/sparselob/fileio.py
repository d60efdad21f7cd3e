"""Delimited text output: trajectory files, book snapshots and stats tables.

All numbers are written with fixed, locale-independent formats so that files
are byte-stable for a given seed. Prices carry 2 decimals (tick grid),
volumes 1 decimal (lot grid); mid prices carry 3 decimals because a mid can
sit on a half tick.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from . import book
from .book import BookState, Side
from .engine import Trajectory
from .stochastic import EventType

TRAJECTORY_HEADER = (
    "run_index",
    "time_h",
    "event_kind",
    "side",
    "level",
    "exec_or_inserted_volume_mwh",
    "price_eur",
    "mid_eur",
    "spread_eur",
    "regenerated",
)

_KIND_NAMES = {EventType.MARKET: "market", EventType.LIMIT: "limit", EventType.CANCEL: "cancel"}
_KIND_BY_NAME = {v: k for k, v in _KIND_NAMES.items()}


def fmt_price(x: float) -> str:
    return f"{x:.2f}"


def fmt_volume(x: float) -> str:
    return f"{x:.1f}"


def fmt_mid(x: float) -> str:
    return f"{x:.3f}"


def fmt_time(x: float) -> str:
    return f"{x:.12f}"


def trajectory_rows(traj: Trajectory) -> Iterable[list[str]]:
    for ev in traj.events():
        regen = "|".join(f"{fmt_price(p)}:{fmt_volume(q)}" for p, q in ev.regenerated)
        yield [
            str(traj.run_index),
            fmt_time(ev.time),
            _KIND_NAMES[ev.kind.type],
            ev.kind.side.label,
            str(ev.level),
            fmt_volume(ev.volume),
            fmt_price(ev.price),
            fmt_mid(ev.mid),
            fmt_price(ev.spread),
            regen,
        ]


def write_trajectory(trajs: Trajectory | Sequence[Trajectory], path, delimiter: str = ",") -> None:
    if isinstance(trajs, Trajectory):
        trajs = [trajs]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for tr in trajs:
            w.writerows(trajectory_rows(tr))


@dataclass(frozen=True)
class EventRow:
    run_index: int
    time: float
    type: EventType
    side: Side
    level: int
    volume: float
    price: float
    mid: str
    spread: str
    regenerated: tuple[tuple[float, float], ...]


def read_trajectory(path, delimiter: str = ",") -> list[EventRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh, delimiter=delimiter)
        header = next(r)
        if tuple(header) != TRAJECTORY_HEADER:
            raise ValueError(f"unexpected trajectory header: {header}")
        out = []
        for row in r:
            regen = tuple(
                (float(a), float(b)) for a, b in (item.split(":") for item in row[9].split("|") if item)
            )
            out.append(
                EventRow(
                    int(row[0]),
                    float(row[1]),
                    _KIND_BY_NAME[row[2]],
                    Side.BID if row[3] == "bid" else Side.ASK,
                    int(row[4]),
                    float(row[5]),
                    float(row[6]),
                    row[7],
                    row[8],
                    regen,
                )
            )
    return out


def replay(initial: BookState, rows: Sequence[EventRow]) -> list[BookState]:
    """Re-apply recorded events through the book transitions.

    Regenerated levels are fed back as distances from the previous deepest
    price, so the replayed states match the simulated ones exactly.
    """
    state = initial
    K = initial.K
    states = []
    for ev in rows:
        side = ev.side
        last = state.ticks(side)[-1]
        dists, vols = [], []
        for p, q in ev.regenerated:
            pt = book.to_ticks(p, state.tick)
            dists.append(abs(pt - last) * state.tick)
            vols.append(q)
            last = pt
        if ev.type is EventType.MARKET:
            pad = K - 1 - len(dists)
            marks = book.MarketOrderMarks(ev.volume, tuple(dists) + (1.0,) * pad, tuple(vols) + (1.0,) * pad)
            state, rep = book.apply_market_order(state, side, marks)
            if rep.levels_consumed != ev.level:
                raise ValueError(f"replay diverged at t={ev.time}")
        elif ev.type is EventType.LIMIT:
            if ev.level > 0:
                opp = state.ticks(Side(-side))[0]
                d = abs(book.to_ticks(ev.price, state.tick) - opp) * state.tick
                state, rep = book.apply_limit_order(state, side, book.LimitOrderMarks(d, ev.volume))
                if rep.inserted_rank != ev.level:
                    raise ValueError(f"replay diverged at t={ev.time}")
        else:
            (d,), (q,) = dists, vols
            state = book.apply_cancel(state, side, book.CancelMarks(ev.level, d, q))
        state = state.at(ev.time)
        states.append(state)
    return states


SNAPSHOT_HEADER = ("run_index", "time_h", "side", "level", "price_eur", "volume_mwh")


def write_snapshots(trajs: Trajectory | Sequence[Trajectory], path, delimiter: str = ",") -> None:
    if isinstance(trajs, Trajectory):
        trajs = [trajs]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(SNAPSHOT_HEADER)
        for tr in trajs:
            for t, b in sorted(tr.snapshots.items()):
                for side in (Side.BID, Side.ASK):
                    prices = b.bid_prices if side is Side.BID else b.ask_prices
                    vols = b.bid_volumes if side is Side.BID else b.ask_volumes
                    for k, (p, q) in enumerate(zip(prices, vols), start=1):
                        w.writerow([tr.run_index, fmt_time(t), side.label, k, fmt_price(p), fmt_volume(q)])


def write_table(path, header: Sequence[str], rows: Iterable[Sequence], delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
