"""Sparse limit order book state and its event transitions.

The book keeps exactly ``K`` occupied levels per side with a single order per
level. Prices are stored as integer ticks and volumes as integer lots so that
every transition is exact; the euro / MWh views are derived properties.

Transitions are pure: they return a new :class:`BookState` and never mutate
their input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Sequence

import numpy as np

DEFAULT_TICK = 0.01
DEFAULT_LOT = 0.1

# Guards float division of euro distances by the tick (e.g. 0.29 / 0.01).
_GRID_EPS = 1e-9


class Side(IntEnum):
    BID = -1
    ASK = 1

    @property
    def label(self) -> str:
        return "bid" if self is Side.BID else "ask"


class BookError(ValueError):
    """Base class for rejected transitions."""


class VolumeExceedsSide(BookError):
    pass


class InvalidMarks(BookError):
    pass


class InvalidLevel(BookError):
    pass


def to_ticks(price: float, tick: float = DEFAULT_TICK) -> int:
    n = round(price / tick)
    if abs(n * tick - price) > 1e-6 * max(1.0, abs(price)):
        raise ValueError(f"price {price} is not on the {tick} grid")
    return int(n)


def to_lots(volume: float, lot: float = DEFAULT_LOT) -> int:
    """Volume in MWh to whole lots; any positive volume occupies at least one lot."""
    n = int(round(volume / lot))
    if n == 0 and volume > 0:
        return 1
    return n


def inside_ticks(distance: float, tick: float = DEFAULT_TICK) -> int:
    """Distance rounded toward the reference price (used for new limit orders)."""
    return int(math.floor(distance / tick + _GRID_EPS))


def outside_ticks(distance: float, tick: float = DEFAULT_TICK) -> int:
    """Distance rounded away from the reference price, never below one tick."""
    return max(1, int(math.ceil(distance / tick - _GRID_EPS)))


@dataclass(frozen=True)
class BookState:
    """Price ladder of the K best levels on each side.

    ``bid_ticks[0]`` is the best bid, ``ask_ticks[0]`` the best ask; index
    ``K-1`` is the deepest modelled level.
    """

    time: float
    bid_ticks: tuple[int, ...]
    ask_ticks: tuple[int, ...]
    bid_lots: tuple[int, ...]
    ask_lots: tuple[int, ...]
    tick: float = DEFAULT_TICK
    lot: float = DEFAULT_LOT

    @classmethod
    def from_prices(
        cls,
        bid_prices: Sequence[float],
        ask_prices: Sequence[float],
        bid_volumes: Sequence[float],
        ask_volumes: Sequence[float],
        time: float = 0.0,
        tick: float = DEFAULT_TICK,
        lot: float = DEFAULT_LOT,
    ) -> BookState:
        return cls(
            time=time,
            bid_ticks=tuple(to_ticks(p, tick) for p in bid_prices),
            ask_ticks=tuple(to_ticks(p, tick) for p in ask_prices),
            bid_lots=tuple(int(round(v / lot)) for v in bid_volumes),
            ask_lots=tuple(int(round(v / lot)) for v in ask_volumes),
            tick=tick,
            lot=lot,
        )

    @property
    def K(self) -> int:
        return len(self.bid_ticks)

    @property
    def bid_prices(self) -> tuple[float, ...]:
        return tuple(round(n * self.tick, 10) for n in self.bid_ticks)

    @property
    def ask_prices(self) -> tuple[float, ...]:
        return tuple(round(n * self.tick, 10) for n in self.ask_ticks)

    @property
    def bid_volumes(self) -> tuple[float, ...]:
        return tuple(round(n * self.lot, 10) for n in self.bid_lots)

    @property
    def ask_volumes(self) -> tuple[float, ...]:
        return tuple(round(n * self.lot, 10) for n in self.ask_lots)

    def ticks(self, side: Side) -> tuple[int, ...]:
        return self.bid_ticks if side is Side.BID else self.ask_ticks

    def lots(self, side: Side) -> tuple[int, ...]:
        return self.bid_lots if side is Side.BID else self.ask_lots

    def with_side(self, side: Side, ticks, lots) -> BookState:
        if side is Side.BID:
            return replace(self, bid_ticks=tuple(ticks), bid_lots=tuple(lots))
        return replace(self, ask_ticks=tuple(ticks), ask_lots=tuple(lots))

    def at(self, time: float) -> BookState:
        return replace(self, time=time)

    def level_distance(self, k: int) -> float:
        """S^k - S^-k, the distance between the k-th limits on each side."""
        return round((self.ask_ticks[k - 1] - self.bid_ticks[k - 1]) * self.tick, 10)


@dataclass(frozen=True)
class MarketOrderMarks:
    volume: float
    regen_distances: tuple[float, ...]
    regen_volumes: tuple[float, ...]


@dataclass(frozen=True)
class LimitOrderMarks:
    distance: float
    volume: float


@dataclass(frozen=True)
class CancelMarks:
    level: int
    regen_distance: float
    regen_volume: float


@dataclass(frozen=True)
class TransitionReport:
    levels_consumed: int = 0
    executed_volume: float = 0.0
    # 1-based rank of an inserted limit order, None when it was rejected
    inserted_rank: int | None = None
    regenerated_levels: int = 0
    # euro price attached to the event: deepest level touched by a market
    # order, or the (rounded) price of a limit order
    price: float | None = None
    regenerated: tuple[tuple[int, int], ...] = ()


def mid_price(state: BookState) -> float:
    return (state.bid_ticks[0] + state.ask_ticks[0]) * state.tick / 2


def spread(state: BookState) -> float:
    return round((state.ask_ticks[0] - state.bid_ticks[0]) * state.tick, 10)


def cumulative_volumes(state: BookState, side: Side) -> tuple[float, ...]:
    lots = np.cumsum(state.lots(side))
    return tuple(round(int(n) * state.lot, 10) for n in lots)


def _regenerate(last: int, side: Side, distances_ticks, lots):
    """Append levels beyond ``last`` at cumulative tick offsets."""
    out = []
    price = last
    for dz, q in zip(distances_ticks, lots):
        price = price + side * dz
        out.append((price, q))
    return out


def apply_market_order(
    state: BookState, side: Side, marks: MarketOrderMarks
) -> tuple[BookState, TransitionReport]:
    """Execute a market order against ``side`` (BID: a sell hitting the bids).

    Levels whose cumulative volume is at most the order size are removed
    (weak inequality, so an exact fill of ``i`` levels promotes level ``i+1``
    untouched), the next level keeps the residual, and one regenerated level
    per removed level is appended beyond the previous deepest price.
    """
    side = Side(side)
    K = state.K
    if marks.volume <= 0:
        raise InvalidMarks("market order volume must be positive")
    if len(marks.regen_distances) < K - 1 or len(marks.regen_volumes) < K - 1:
        raise InvalidMarks(f"need {K - 1} regeneration marks")
    if any(z <= 0 for z in marks.regen_distances) or any(v <= 0 for v in marks.regen_volumes):
        raise InvalidMarks("regeneration distances and volumes must be positive")

    ticks = state.ticks(side)
    lots = state.lots(side)
    xi = to_lots(marks.volume, state.lot)
    cum = 0
    consumed = 0
    for q in lots:
        if cum + q <= xi:
            cum += q
            consumed += 1
        else:
            break
    if consumed >= K:
        raise VolumeExceedsSide(
            f"order of {marks.volume} MWh would empty the {side.label} side"
        )

    residual = cum + lots[consumed] - xi
    new_ticks = list(ticks[consumed:])
    new_lots = [residual] + list(lots[consumed + 1 :])
    regen = _regenerate(
        ticks[-1],
        side,
        [outside_ticks(z, state.tick) for z in marks.regen_distances[:consumed]],
        [to_lots(v, state.lot) for v in marks.regen_volumes[:consumed]],
    )
    new_ticks += [p for p, _ in regen]
    new_lots += [q for _, q in regen]

    report = TransitionReport(
        levels_consumed=consumed,
        executed_volume=round(xi * state.lot, 10),
        regenerated_levels=consumed,
        price=round(ticks[consumed] * state.tick, 10),
        regenerated=tuple(regen),
    )
    return state.with_side(side, new_ticks, new_lots), report


def apply_limit_order(
    state: BookState, side: Side, marks: LimitOrderMarks
) -> tuple[BookState, TransitionReport]:
    """Insert a limit order at ``marks.distance`` from the opposite best price.

    The price is rounded to the grid toward the mid. Orders deeper than the
    K-th level are rejected; an order landing on an occupied price moves one
    tick at a time toward the mid and is rejected if it reaches the opposite
    best. On insertion the previous K-th level drops out.
    """
    side = Side(side)
    if marks.distance <= 0 or marks.volume <= 0:
        raise InvalidMarks("limit order distance and volume must be positive")

    ticks = state.ticks(side)
    lots = state.lots(side)
    opposite_best = state.ticks(Side(-side))[0]
    # towards the mid is -side: up for bids, down for asks
    inward = -int(side)
    price = opposite_best + int(side) * inside_ticks(marks.distance, state.tick)

    rejected = TransitionReport(price=round(price * state.tick, 10))
    if side * (price - ticks[-1]) > 0:
        return state, rejected
    occupied = set(ticks)
    while price in occupied:
        price += inward
    if side * (price - opposite_best) <= 0:
        return state, rejected

    rank = next(i for i, p in enumerate(ticks) if side * (p - price) > 0)
    q = to_lots(marks.volume, state.lot)
    new_ticks = list(ticks[:rank]) + [price] + list(ticks[rank:-1])
    new_lots = list(lots[:rank]) + [q] + list(lots[rank:-1])
    report = TransitionReport(inserted_rank=rank + 1, price=round(price * state.tick, 10))
    return state.with_side(side, new_ticks, new_lots), report


def apply_cancel(state: BookState, side: Side, marks: CancelMarks) -> BookState:
    """Remove level ``marks.level`` entirely and regenerate a new deepest level."""
    return cancel_with_report(state, side, marks)[0]


def cancel_with_report(
    state: BookState, side: Side, marks: CancelMarks
) -> tuple[BookState, TransitionReport]:
    side = Side(side)
    K = state.K
    if not 1 <= marks.level <= K:
        raise InvalidLevel(f"cancel level {marks.level} outside 1..{K}")
    if marks.regen_distance <= 0 or marks.regen_volume <= 0:
        raise InvalidMarks("regeneration distance and volume must be positive")

    ticks = state.ticks(side)
    lots = state.lots(side)
    k = marks.level - 1
    (regen,) = _regenerate(
        ticks[-1],
        side,
        [outside_ticks(marks.regen_distance, state.tick)],
        [to_lots(marks.regen_volume, state.lot)],
    )
    new_ticks = list(ticks[:k]) + list(ticks[k + 1 :]) + [regen[0]]
    new_lots = list(lots[:k]) + list(lots[k + 1 :]) + [regen[1]]
    report = TransitionReport(
        executed_volume=round(lots[k] * state.lot, 10),
        regenerated_levels=1,
        price=round(ticks[k] * state.tick, 10),
        regenerated=(regen,),
    )
    return state.with_side(side, new_ticks, new_lots), report


def validate(state: BookState, K: int | None = None) -> list[str]:
    """Return one message per violated book invariant; empty when valid."""
    problems = []
    K = state.K if K is None else K
    for side in (Side.BID, Side.ASK):
        ticks = state.ticks(side)
        lots = state.lots(side)
        if len(ticks) != K or len(lots) != K:
            problems.append(
                f"{side.label}: expected {K} levels, got {len(ticks)} prices / {len(lots)} volumes"
            )
        bad = [i + 1 for i in range(len(ticks) - 1) if side * (ticks[i + 1] - ticks[i]) <= 0]
        if bad:
            order = "decreasing" if side is Side.BID else "increasing"
            problems.append(f"{side.label}: prices not strictly {order} at levels {bad}")
        bad = [i + 1 for i, q in enumerate(lots) if q <= 0]
        if bad:
            problems.append(f"{side.label}: non-positive volume at levels {bad}")
        bad = [i + 1 for i, p in enumerate(ticks) if not isinstance(p, (int, np.integer))]
        if bad:
            problems.append(f"{side.label}: prices off the tick grid at levels {bad}")
    if state.bid_ticks and state.ask_ticks and state.bid_ticks[0] >= state.ask_ticks[0]:
        problems.append("spread: best bid is not below best ask")
    return problems
