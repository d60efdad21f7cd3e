"""Session simulation and Monte-Carlo ensembles.

Two interchangeable engines produce the same trajectory for a given
(config, run index): a readable pure-Python loop built on :mod:`sparselob.book`
and a compiled loop in :mod:`sparselob._kernel` used for large ensembles.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from . import book
from .book import BookState, Side
from .stochastic import (
    DEFAULT_BOUND_STEP,
    EventKind,
    EventType,
    ModelParams,
    kind_group,
    make_stream,
    reference_params,
    sample_limit_distance,
    sample_market_volume,
    sample_next_event,
    sample_regen_marks,
    sample_volume_mark,
)


class ConfigError(ValueError):
    pass


class SimulationError(RuntimeError):
    """An internal invariant broke during a simulation (a bug, not bad input)."""


def reference_initial_book(K: int = 5, volume: float = 5.0) -> BookState:
    if K != 5:
        raise ValueError("the reference ladder has 5 levels per side")
    return BookState.from_prices(
        bid_prices=(45, 44, 42, 39, 35),
        ask_prices=(55, 56, 58, 61, 65),
        bid_volumes=(volume,) * K,
        ask_volumes=(volume,) * K,
    )


@dataclass(frozen=True)
class StatsOptions:
    tau_grid: tuple[float, ...] = (10, 20, 30, 60, 90, 120, 180, 240, 300, 360, 450, 540, 600)
    bin_width: float = 0.25
    clip_quantile: float = 0.995
    levels: tuple[int, ...] = (1, 2, 3)


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    initial_book: BookState
    start_time: float
    cutoff_time: float
    master_seed: int = 0
    snapshot_times: tuple[float, ...] = ()
    window_minutes: float = 10.0
    # half-width in euro of a uniform per-level price perturbation of the
    # initial ladder; 0 keeps the ladder fixed
    initial_jitter: float = 0.0
    bound_step: float = DEFAULT_BOUND_STEP
    stats: StatsOptions = field(default_factory=StatsOptions)
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "snapshot_times", tuple(sorted(float(s) for s in self.snapshot_times)))
        problems = config_violations(self)
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def n_windows(self) -> int:
        return int(round((self.cutoff_time - self.start_time) * 60 / self.window_minutes))

    @property
    def window_hours(self) -> float:
        return self.window_minutes / 60

    @property
    def window_edges(self) -> np.ndarray:
        return self.start_time + self.window_hours * np.arange(self.n_windows + 1)


def config_violations(c: SimConfig) -> list[str]:
    out = []
    p = c.params
    if not c.start_time < c.cutoff_time <= p.horizon_T:
        out.append("start_time < cutoff_time <= horizon_T")
    if c.start_time < 0:
        out.append("start_time >= 0")
    for s in c.snapshot_times:
        if not c.start_time <= s <= c.cutoff_time:
            out.append(f"snapshot time {s} outside [start_time, cutoff_time]")
    if c.initial_book.K != p.K:
        out.append(f"initial book has {c.initial_book.K} levels, K = {p.K}")
    if abs(c.initial_book.tick - p.tick) > 1e-15 or abs(c.initial_book.lot - p.volume_floor) > 1e-15:
        out.append("initial book grid differs from model tick / volume_floor")
    out += [f"initial_book: {v}" for v in book.validate(c.initial_book, p.K)]
    if not c.window_minutes > 0:
        out.append("window_minutes > 0")
    else:
        n = (c.cutoff_time - c.start_time) * 60 / c.window_minutes
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            out.append("window_minutes must divide the session length")
    if c.initial_jitter < 0:
        out.append("initial_jitter >= 0")
    if not c.bound_step > 0:
        out.append("bound_step > 0")
    if not 0 <= int(c.master_seed) < 2**64:
        out.append("master_seed must be a 64-bit unsigned integer")
    return out


def reference_config(**overrides) -> SimConfig:
    """Reference 18H setup: T = 4 h, session [T-4, T-1], snapshot at the cutoff."""
    params = overrides.pop("params", reference_params())
    kw = dict(
        params=params,
        initial_book=overrides.pop("initial_book", None) or reference_initial_book(params.K),
        start_time=params.horizon_T - 4.0,
        cutoff_time=params.horizon_T - 1.0,
        master_seed=20210107,
        snapshot_times=(params.horizon_T - 1.0,),
    )
    kw.update(overrides)
    return SimConfig(**kw)


class Event(NamedTuple):
    time: float
    kind: EventKind
    level: int  # levels consumed / inserted rank (0 = rejected) / cancelled level
    volume: float  # MWh executed, inserted or cancelled
    price: float
    mid: float
    spread: float
    regenerated: tuple[tuple[float, float], ...]


@dataclass
class Trajectory:
    run_index: int
    start_time: float
    cutoff_time: float
    initial: BookState
    final: BookState
    times: np.ndarray
    kinds: np.ndarray
    levels: np.ndarray
    lots: np.ndarray
    price_ticks: np.ndarray
    best_bid: np.ndarray
    best_ask: np.ndarray
    n_regen: np.ndarray
    regen_ticks: np.ndarray
    regen_lots: np.ndarray
    snapshots: dict[float, BookState]
    window_counts: np.ndarray

    @property
    def tick(self) -> float:
        return self.initial.tick

    @property
    def K(self) -> int:
        return self.initial.K

    @property
    def mids(self) -> np.ndarray:
        return (self.best_bid + self.best_ask) * self.tick / 2

    @property
    def spreads(self) -> np.ndarray:
        return (self.best_ask - self.best_bid) * self.tick

    def __len__(self) -> int:
        return len(self.times)

    def events(self) -> Iterator[Event]:
        offsets = np.concatenate([[0], np.cumsum(self.n_regen)])
        tick, lot = self.initial.tick, self.initial.lot
        for i in range(len(self.times)):
            a, b = offsets[i], offsets[i + 1]
            regen = tuple(
                (round(p * tick, 10), round(q * lot, 10))
                for p, q in zip(self.regen_ticks[a:b], self.regen_lots[a:b])
            )
            yield Event(
                float(self.times[i]),
                EventKind.from_index(int(self.kinds[i]), self.K),
                int(self.levels[i]),
                round(int(self.lots[i]) * lot, 10),
                round(int(self.price_ticks[i]) * tick, 10),
                float(self.mids[i]),
                float(self.spreads[i]),
                regen,
            )

    def same_as(self, other: Trajectory) -> bool:
        arrays = (
            "times", "kinds", "levels", "lots", "price_ticks", "best_bid",
            "best_ask", "n_regen", "regen_ticks", "regen_lots", "window_counts",
        )
        return (
            all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
            and self.final == other.final
            and self.snapshots == other.snapshots
        )


# --- setup shared by both engines -----------------------------------------


def initial_state(config: SimConfig, run_index: int) -> BookState:
    b = config.initial_book.at(config.start_time)
    if config.initial_jitter <= 0:
        return b
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence([config.master_seed, run_index, 1]))
    )
    j = int(math.floor(config.initial_jitter / b.tick + 1e-9))
    for _ in range(1000):
        bid = tuple(int(p + rng.integers(-j, j + 1)) for p in b.bid_ticks)
        ask = tuple(int(p + rng.integers(-j, j + 1)) for p in b.ask_ticks)
        cand = BookState(b.time, bid, ask, b.bid_lots, b.ask_lots, b.tick, b.lot)
        if not book.validate(cand):
            return cand
    raise ConfigError("initial_jitter too large to keep the ladder ordered")


def _window_index(t: float, config: SimConfig) -> int:
    w = int((t - config.start_time) / config.window_hours)
    return min(w, config.n_windows - 1)


# --- reference engine -----------------------------------------------------


def _simulate_python(config: SimConfig, run_index: int) -> Trajectory:
    p = config.params
    K = p.K
    rng = make_stream(config.master_seed, run_index)
    state = initial_state(config, run_index)
    init = state
    snaps = list(config.snapshot_times)
    snapshots: dict[float, BookState] = {}
    counts = np.zeros((config.n_windows, 6), np.int64)
    cols: dict[str, list] = {k: [] for k in (
        "times", "kinds", "levels", "lots", "price", "bb", "ba", "nreg", "rgt", "rgq")}

    t = config.start_time
    while True:
        nxt = sample_next_event(t, state, p, rng, config.cutoff_time, config.bound_step)
        if nxt is None:
            break
        te, kind = nxt
        while snaps and snaps[0] < te:
            snapshots[snaps.pop(0)] = state
        side = kind.side
        lots = state.lots(side)
        if kind.type is EventType.MARKET:
            cum = sum(lots) * state.lot
            if cum <= p.volume_floor:
                t = te
                continue
            xi = sample_market_volume(rng, p, cum, side)
            z, zeta = sample_regen_marks(te, rng, p, K - 1, side)
            new, rep = book.apply_market_order(state, side, book.MarketOrderMarks(xi, z, zeta))
            level, q = rep.levels_consumed, book.to_lots(xi, state.lot)
        elif kind.type is EventType.LIMIT:
            z = sample_limit_distance(te, rng, p, side)
            zeta = sample_volume_mark(rng, p, side)
            new, rep = book.apply_limit_order(state, side, book.LimitOrderMarks(z, zeta))
            level, q = rep.inserted_rank or 0, book.to_lots(zeta, state.lot)
        else:
            z = sample_limit_distance(te, rng, p, side)
            zeta = sample_volume_mark(rng, p, side)
            q = lots[kind.level - 1]
            new, rep = book.cancel_with_report(state, side, book.CancelMarks(kind.level, z, zeta))
            level = kind.level
        state = new.at(te)

        g = kind_group(kind.index(K), K)
        w = _window_index(te, config)
        if w >= 0:
            counts[w, g] += 1
        cols["times"].append(te)
        cols["kinds"].append(kind.index(K))
        cols["levels"].append(level)
        cols["lots"].append(q)
        cols["price"].append(book.to_ticks(rep.price, state.tick))
        cols["bb"].append(state.bid_ticks[0])
        cols["ba"].append(state.ask_ticks[0])
        cols["nreg"].append(len(rep.regenerated))
        for pt, qt in rep.regenerated:
            cols["rgt"].append(pt)
            cols["rgq"].append(qt)
        t = te

    for s in snaps:
        snapshots[s] = state
    i64 = lambda k: np.asarray(cols[k], dtype=np.int64)
    return Trajectory(
        run_index=run_index,
        start_time=config.start_time,
        cutoff_time=config.cutoff_time,
        initial=init,
        final=state,
        times=np.asarray(cols["times"], dtype=float),
        kinds=i64("kinds"),
        levels=i64("levels"),
        lots=i64("lots"),
        price_ticks=i64("price"),
        best_bid=i64("bb"),
        best_ask=i64("ba"),
        n_regen=i64("nreg"),
        regen_ticks=i64("rgt"),
        regen_lots=i64("rgq"),
        snapshots=snapshots,
        window_counts=counts,
    )


# --- compiled engine ------------------------------------------------------


def _kernel_args(config: SimConfig) -> dict:
    p = config.params
    sides = (p.bid, p.ask)
    return dict(
        T=p.horizon_T,
        start=config.start_time,
        cutoff=config.cutoff_time,
        bound_step=config.bound_step,
        tick=p.tick,
        lot=p.volume_floor,
        volume_floor=p.volume_floor,
        mkt=np.array([[s.market.lambda_bar, s.market.kappa, s.market.beta] for s in sides]),
        lim=np.array([[s.limit.lambda_bar, s.limit.kappa, s.limit.A, s.limit.b] for s in sides]),
        can=np.array([[s.cancel.lambda_bar, s.cancel.kappa] for s in sides]),
        mv_cum=np.array([s.market_volume.cum_probs for s in sides]),
        mv_vol=np.array([s.market_volume.volumes for s in sides]),
        lv_cum=np.array([s.limit_volume.cum_probs for s in sides]),
        lv_vol=np.array([s.limit_volume.volumes for s in sides]),
        snap_times=np.array(config.snapshot_times, dtype=float),
        win_start=config.start_time,
        win_len=config.window_hours,
        n_win=config.n_windows,
    )


def _book_arrays(state: BookState) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.array([state.bid_ticks, state.ask_ticks], dtype=np.int64),
        np.array([state.bid_lots, state.ask_lots], dtype=np.int64),
    )


def _state_from_arrays(ticks, lots, like: BookState, time: float) -> BookState:
    return BookState(
        time,
        tuple(int(x) for x in ticks[0]),
        tuple(int(x) for x in ticks[1]),
        tuple(int(x) for x in lots[0]),
        tuple(int(x) for x in lots[1]),
        like.tick,
        like.lot,
    )


def _run_kernel(config: SimConfig, run_index: int, record: bool, args: dict | None = None):
    from . import _kernel

    args = args or _kernel_args(config)
    init = initial_state(config, run_index)
    bt, bq = _book_arrays(init)
    cap = 8192
    while True:
        rng = make_stream(config.master_seed, run_index)
        out = _kernel.run_session(rng, bt, bq, record=record, cap=cap, **args)
        if not out[1]:
            return init, out
        cap *= 4


def _simulate_fast(config: SimConfig, run_index: int) -> Trajectory:
    init, out = _run_kernel(config, run_index, record=True)
    (n_ev, _, bt, bq, snap_t, snap_q, counts, times, kinds, levels, lots,
     price, best, nreg, rgt, rgq) = out
    final_time = float(times[-1]) if n_ev else config.start_time
    snapshots = {}
    for i, s in enumerate(config.snapshot_times):
        before = times[times <= s]
        ts = float(before[-1]) if len(before) else config.start_time
        snapshots[s] = _state_from_arrays(snap_t[i], snap_q[i], init, ts)
    return Trajectory(
        run_index=run_index,
        start_time=config.start_time,
        cutoff_time=config.cutoff_time,
        initial=init,
        final=_state_from_arrays(bt, bq, init, final_time),
        times=times.copy(),
        kinds=kinds.copy(),
        levels=levels.copy(),
        lots=lots.copy(),
        price_ticks=price.copy(),
        best_bid=best[:, 0].copy(),
        best_ask=best[:, 1].copy(),
        n_regen=nreg.copy(),
        regen_ticks=rgt.copy(),
        regen_lots=rgq.copy(),
        snapshots=snapshots,
        window_counts=counts,
    )


def simulate(config: SimConfig, run_index: int = 0, engine: str = "fast") -> Trajectory:
    """Simulate one session from ``config.start_time`` to ``config.cutoff_time``.

    ``engine`` is ``"fast"`` (compiled) or ``"python"`` (reference); both
    return identical trajectories.
    """
    if engine == "fast":
        traj = _simulate_fast(config, run_index)
    elif engine == "python":
        traj = _simulate_python(config, run_index)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    if book.validate(traj.final):
        raise SimulationError(f"run {run_index}: final book invalid: {book.validate(traj.final)}")
    return traj


# --- ensembles ------------------------------------------------------------


@dataclass
class EnsembleResult:
    """Per-run summaries of a Monte-Carlo ensemble, in run-index order."""

    run_indices: np.ndarray
    n_events: np.ndarray
    snapshot_times: tuple[float, ...]
    snap_ticks: np.ndarray  # (runs, snapshots, 2, K), row 0 bid
    snap_lots: np.ndarray
    window_counts: np.ndarray  # (runs, windows, 6)
    window_edges: np.ndarray
    tick: float

    def __len__(self) -> int:
        return len(self.run_indices)

    @property
    def K(self) -> int:
        return self.snap_ticks.shape[-1]

    def snapshot_index(self, at_time: float) -> int:
        for i, s in enumerate(self.snapshot_times):
            if abs(s - at_time) < 1e-9:
                return i
        raise KeyError(at_time)

    def limit_distances(self, k: int, at_time: float) -> np.ndarray:
        i = self.snapshot_index(at_time)
        d = self.snap_ticks[:, i, 1, k - 1] - self.snap_ticks[:, i, 0, k - 1]
        return d * self.tick

    def rows(self, at_time: float | None = None, levels=(1, 2, 3)) -> list[dict]:
        at_time = self.snapshot_times[-1] if at_time is None else at_time
        cols = {k: self.limit_distances(k, at_time) for k in levels}
        i = self.snapshot_index(at_time)
        out = []
        for r, run in enumerate(self.run_indices):
            row = {"run_index": int(run), "n_events": int(self.n_events[r])}
            bb, ba = self.snap_ticks[r, i, 0, 0], self.snap_ticks[r, i, 1, 0]
            row["mid_eur"] = (bb + ba) * self.tick / 2
            for k in levels:
                row[f"distance_{k}_eur"] = float(cols[k][r])
            row["window_counts"] = self.window_counts[r].sum(axis=1)
            out.append(row)
        return out


def _ensemble_block(config: SimConfig, run_indices: list[int]):
    args = _kernel_args(config)
    n = len(run_indices)
    K, S, W = config.params.K, len(config.snapshot_times), config.n_windows
    n_ev = np.empty(n, np.int64)
    snap_t = np.empty((n, S, 2, K), np.int64)
    snap_q = np.empty((n, S, 2, K), np.int64)
    counts = np.empty((n, W, 6), np.int64)
    for j, r in enumerate(run_indices):
        _, out = _run_kernel(config, r, record=False, args=args)
        n_ev[j], snap_t[j], snap_q[j], counts[j] = out[0], out[4], out[5], out[6]
        for s in range(S):
            if book.validate(_state_from_arrays(out[4][s], out[5][s], config.initial_book, 0.0)):
                raise SimulationError(f"run {r}: invalid snapshot book")
    return n_ev, snap_t, snap_q, counts


def run_monte_carlo(config: SimConfig, n_runs: int, workers: int = 1, chunk: int = 250) -> EnsembleResult:
    """Run ``n_runs`` independent sessions; output does not depend on ``workers``."""
    if n_runs < 1:
        raise ConfigError("n_runs >= 1")
    if not config.snapshot_times:
        raise ConfigError("ensembles need at least one snapshot time")
    runs = list(range(n_runs))
    blocks = [runs[i : i + chunk] for i in range(0, n_runs, chunk)]
    if workers <= 1:
        parts = [_ensemble_block(config, b) for b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_ensemble_block, [config] * len(blocks), blocks))
    return EnsembleResult(
        run_indices=np.asarray(runs, dtype=np.int64),
        n_events=np.concatenate([p[0] for p in parts]),
        snapshot_times=config.snapshot_times,
        snap_ticks=np.concatenate([p[1] for p in parts]),
        snap_lots=np.concatenate([p[2] for p in parts]),
        window_counts=np.concatenate([p[3] for p in parts]),
        window_edges=config.window_edges,
        tick=config.params.tick,
    )


def simulate_many(config: SimConfig, n_runs: int, engine: str = "fast") -> list[Trajectory]:
    return [simulate(config, r, engine) for r in range(n_runs)]
