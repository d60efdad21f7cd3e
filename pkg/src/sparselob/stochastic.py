"""Order-flow intensities, mark distributions and the next-event sampler.

All intensities are exponential in time to maturity, so between two events
the total rate is a deterministic, increasing function of time (the spread
only enters through its value just before the next event). The sampler is a
thinning scheme with a piecewise-constant dominating rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from itertools import accumulate

import numpy as np

from .book import BookState, Side


class ParamsError(ValueError):
    pass


class SideTooThin(ValueError):
    pass


@dataclass(frozen=True)
class MarketFlow:
    lambda_bar: float  # 1/h
    kappa: float  # 1/h
    beta: float  # 1/EUR


@dataclass(frozen=True)
class LimitFlow:
    lambda_bar: float  # 1/h
    kappa: float  # 1/h
    A: float  # 1/EUR, rate of the distance law at maturity
    b: float  # 1/h, time decay of that rate


@dataclass(frozen=True)
class CancelFlow:
    lambda_bar: float  # 1/h, per level
    kappa: float  # 1/h


@dataclass(frozen=True)
class VolumeLaw:
    probs: tuple[float, ...]
    volumes: tuple[float, ...]  # MWh

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        object.__setattr__(self, "volumes", tuple(float(v) for v in self.volumes))

    @property
    def cum_probs(self) -> tuple[float, ...]:
        return tuple(accumulate(self.probs))


@dataclass(frozen=True)
class SideParams:
    market: MarketFlow
    limit: LimitFlow
    cancel: CancelFlow
    market_volume: VolumeLaw
    limit_volume: VolumeLaw


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set. ``bid`` and ``ask`` are identical unless overridden."""

    horizon_T: float
    K: int
    bid: SideParams
    ask: SideParams
    volume_floor: float = 0.1
    tick: float = 0.01

    @classmethod
    def symmetric(
        cls,
        horizon_T: float,
        K: int,
        market: MarketFlow,
        limit: LimitFlow,
        cancel: CancelFlow,
        market_volume: VolumeLaw,
        limit_volume: VolumeLaw,
        volume_floor: float = 0.1,
        tick: float = 0.01,
    ) -> ModelParams:
        sp = SideParams(market, limit, cancel, market_volume, limit_volume)
        return cls(horizon_T, K, sp, sp, volume_floor, tick)

    def side(self, side: Side) -> SideParams:
        return self.bid if side == Side.BID else self.ask

    def replace_blocks(self, **blocks) -> ModelParams:
        """Replace parameter blocks (``market=...`` etc.) on both sides."""
        return replace(self, bid=replace(self.bid, **blocks), ask=replace(self.ask, **blocks))

    def __post_init__(self):
        problems = params_violations(self)
        if problems:
            raise ParamsError("; ".join(problems))


def params_violations(p: ModelParams) -> list[str]:
    out = []
    if not (isinstance(p.K, (int, np.integer)) and p.K >= 2):
        out.append("K >= 2")
    if not p.horizon_T > 0:
        out.append("horizon_T > 0")
    if not p.volume_floor > 0:
        out.append("volume_floor > 0")
    if not p.tick > 0:
        out.append("tick > 0")
    for name, sp in (("bid", p.bid), ("ask", p.ask)):
        prefix = "" if p.bid == p.ask else f"{name}."
        for block in ("market", "limit", "cancel"):
            for key, value in vars(getattr(sp, block)).items():
                # a zero rate switches a flow off; decay constants may be zero
                ok = value >= 0 if key in ("lambda_bar", "kappa", "beta", "b") else value > 0
                if not (ok and math.isfinite(value)):
                    op = ">= 0" if key in ("lambda_bar", "kappa", "beta", "b") else "> 0"
                    out.append(f"{prefix}{block}.{key} {op}")
        for block in ("market_volume", "limit_volume"):
            law = getattr(sp, block)
            if len(law.probs) != len(law.volumes) or not law.probs:
                out.append(f"{prefix}{block}: probs and volumes must have equal non-zero length")
                continue
            if any(q < 0 for q in law.probs) or abs(sum(law.probs) - 1.0) > 1e-12:
                out.append(f"{prefix}{block}.probs must be a probability vector summing to 1")
            if any(v <= 0 for v in law.volumes) or any(
                b <= a for a, b in zip(law.volumes, law.volumes[1:])
            ):
                out.append(f"{prefix}{block}.volumes must be positive and strictly increasing")
    return out


def reference_params(horizon_T: float = 4.0, K: int = 5) -> ModelParams:
    """Reference calibration for the 18H intraday product."""
    vols = (1.0, 2.0, 5.0, 10.0, 15.0, 25.0)
    return ModelParams.symmetric(
        horizon_T=horizon_T,
        K=K,
        market=MarketFlow(lambda_bar=45.72, kappa=0.51, beta=0.5),
        limit=LimitFlow(lambda_bar=450.0, kappa=5.22e-4, A=0.145, b=0.02),
        cancel=CancelFlow(lambda_bar=72.0, kappa=0.6),
        market_volume=VolumeLaw((0.480, 0.158, 0.314, 0.032, 0.012, 0.004), vols),
        limit_volume=VolumeLaw((0.322, 0.152, 0.464, 0.022, 0.011, 0.029), vols),
    )


# --- intensities -----------------------------------------------------------


def market_intensity(t: float, spread: float, params: ModelParams, side: Side = Side.ASK) -> float:
    m = params.side(side).market
    return m.lambda_bar * math.exp(-m.kappa * (params.horizon_T - t)) * math.exp(-m.beta * spread)


def limit_intensity(t: float, params: ModelParams, side: Side = Side.ASK) -> float:
    lf = params.side(side).limit
    return lf.lambda_bar * math.exp(-lf.kappa * (params.horizon_T - t))


def cancel_intensity(t: float, params: ModelParams, side: Side = Side.ASK) -> float:
    """Cancellation rate of a single level; a side carries K of these."""
    c = params.side(side).cancel
    return c.lambda_bar * math.exp(-c.kappa * (params.horizon_T - t))


def limit_distance_rate(t: float, params: ModelParams, side: Side = Side.ASK) -> float:
    lf = params.side(side).limit
    return lf.A * math.exp(-lf.b * (params.horizon_T - t))


class EventType(IntEnum):
    MARKET = 0
    LIMIT = 1
    CANCEL = 2


@dataclass(frozen=True)
class EventKind:
    """One of the 4 + 2K point processes: market/limit per side, cancel per level."""

    type: EventType
    side: Side
    level: int = 0  # 1..K for cancellations

    def index(self, K: int) -> int:
        s = 0 if self.side == Side.BID else 1
        if self.type is EventType.CANCEL:
            return 4 + s * K + self.level - 1
        return 2 * int(self.type) + s

    @classmethod
    def from_index(cls, i: int, K: int) -> EventKind:
        if i < 4:
            return cls(EventType(i // 2), Side.BID if i % 2 == 0 else Side.ASK)
        j = i - 4
        return cls(EventType.CANCEL, Side.BID if j < K else Side.ASK, j % K + 1)

    @property
    def name(self) -> str:
        base = {EventType.MARKET: "market", EventType.LIMIT: "limit", EventType.CANCEL: "cancel"}
        return f"{base[self.type]}_{self.side.label}"


#: Kind groups used for histograms (cancel levels pooled per side).
KIND_GROUPS = ("market_bid", "market_ask", "limit_bid", "limit_ask", "cancel_bid", "cancel_ask")


def kind_group(i: int, K: int) -> int:
    return i if i < 4 else 4 + (i - 4) // K


def intensity_vector(t: float, spread: float, params: ModelParams) -> list[float]:
    """Per-kind intensities in :meth:`EventKind.index` order."""
    rates = [
        market_intensity(t, spread, params, Side.BID),
        market_intensity(t, spread, params, Side.ASK),
        limit_intensity(t, params, Side.BID),
        limit_intensity(t, params, Side.ASK),
    ]
    rates += [cancel_intensity(t, params, Side.BID)] * params.K
    rates += [cancel_intensity(t, params, Side.ASK)] * params.K
    return rates


def _raw_spread(state: BookState) -> float:
    return (state.ask_ticks[0] - state.bid_ticks[0]) * state.tick


def total_intensity(t: float, state: BookState, params: ModelParams) -> tuple[float, np.ndarray]:
    breakdown = intensity_vector(t, _raw_spread(state), params)
    total = 0.0
    for r in breakdown:
        total += r
    return total, np.asarray(breakdown)


# --- randomness ------------------------------------------------------------


def make_stream(master_seed: int, run_index: int) -> np.random.Generator:
    """Counter-based stream keyed by (master seed, run index)."""
    ss = np.random.SeedSequence([int(master_seed) & 0xFFFFFFFFFFFFFFFF, int(run_index)])
    return np.random.Generator(np.random.Philox(ss))


def categorical(u: float, cum_probs) -> int:
    for i, c in enumerate(cum_probs):
        if u < c:
            return i
    return len(cum_probs) - 1


def sample_market_volume(
    rng: np.random.Generator, params: ModelParams, side_cum_volume: float, side: Side = Side.ASK
) -> float:
    """Market order size, truncated to stay strictly inside the side's depth."""
    if side_cum_volume <= params.volume_floor:
        raise SideTooThin(f"side depth {side_cum_volume} MWh <= volume floor")
    law = params.side(side).market_volume
    v = law.volumes[categorical(rng.random(), law.cum_probs)]
    return min(v, side_cum_volume - params.volume_floor)


def sample_limit_distance(
    t: float, rng: np.random.Generator, params: ModelParams, side: Side = Side.ASK
) -> float:
    return rng.standard_exponential() / limit_distance_rate(t, params, side)


def sample_volume_mark(rng: np.random.Generator, params: ModelParams, side: Side = Side.ASK) -> float:
    law = params.side(side).limit_volume
    return law.volumes[categorical(rng.random(), law.cum_probs)]


def sample_regen_marks(
    t: float, rng: np.random.Generator, params: ModelParams, count: int, side: Side = Side.ASK
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    if count < 1:
        raise ValueError("count >= 1")
    distances = tuple(sample_limit_distance(t, rng, params, side) for _ in range(count))
    volumes = tuple(sample_volume_mark(rng, params, side) for _ in range(count))
    return distances, volumes


#: Returned by :func:`sample_next_event` when no event occurs before the cutoff.
SESSION_END = None

DEFAULT_BOUND_STEP = 0.1  # hours


def sample_next_event(
    t: float,
    state: BookState,
    params: ModelParams,
    rng: np.random.Generator,
    cutoff: float,
    bound_step: float = DEFAULT_BOUND_STEP,
):
    """Next event time and kind after ``t``, or ``SESSION_END``.

    Thinning on windows of length ``bound_step``: every intensity increases
    with time at fixed spread, so the total at the window's right end
    dominates on the whole window. One uniform both accepts the candidate and
    picks its kind.
    """
    spread = _raw_spread(state)
    while True:
        u_end = min(t + bound_step, cutoff)
        bound = _total(intensity_vector(u_end, spread, params))
        if bound <= 0.0:
            if u_end >= cutoff:
                return SESSION_END
            t = u_end
            continue
        cand = t + rng.standard_exponential() / bound
        if cand > u_end:
            if u_end >= cutoff:
                return SESSION_END
            t = u_end
            continue
        rates = intensity_vector(cand, spread, params)
        x = rng.random() * bound
        acc = 0.0
        for i, r in enumerate(rates):
            acc += r
            if x < acc:
                return cand, EventKind.from_index(i, params.K)
        t = cand


def _total(rates) -> float:
    total = 0.0
    for r in rates:
        total += r
    return total
