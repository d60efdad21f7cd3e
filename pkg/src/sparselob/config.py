"""Configuration files.

Sectioned ``key = value`` text (INI syntax). Units: times in hours, prices
and distances in EUR, volumes in MWh, rates in 1/h. Every key is optional;
omitted keys take the 18H reference values. Model keys may be prefixed with
``bid.`` or ``ask.`` to override one side only. Inline comments start
with ``#``; ``;`` only starts a comment at the beginning of a line, so
``delimiter = ;`` works (``delimiter = tab`` for tabs).
"""

from __future__ import annotations

import configparser
import os
from dataclasses import replace
from importlib import resources
from pathlib import Path

from .book import BookState
from .engine import ConfigError, SimConfig, StatsOptions, reference_config
from .stochastic import (
    CancelFlow,
    LimitFlow,
    MarketFlow,
    ModelParams,
    ParamsError,
    SideParams,
    VolumeLaw,
    reference_params,
)

CONFIG_DIR_ENV = "SPARSELOB_CONFIG_DIR"
DEFAULT_CONFIG = "paper-18H.cfg"


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass


_BLOCKS = {
    "market": (MarketFlow, ("lambda_bar", "kappa", "beta")),
    "limit": (LimitFlow, ("lambda_bar", "kappa", "A", "b")),
    "cancel": (CancelFlow, ("lambda_bar", "kappa")),
    "market_volume": (VolumeLaw, ("probs", "volumes")),
    "limit_volume": (VolumeLaw, ("probs", "volumes")),
}
_MODEL_SCALARS = ("horizon_T", "K", "tick", "volume_floor")
_BOOK_KEYS = ("bid_prices", "ask_prices", "bid_volumes", "ask_volumes", "jitter")
_SIM_KEYS = ("start_time", "cutoff_time", "seed", "snapshot_times", "bound_step", "window_minutes")
_STATS_KEYS = ("tau_grid", "bin_width", "clip_quantile", "levels")
_OUTPUT_KEYS = ("dir", "delimiter")
_SECTIONS = ("model", "initial_book", "simulation", "outputs", "stats")


def shipped_config_path(name: str = DEFAULT_CONFIG) -> Path:
    return Path(str(resources.files("sparselob") / "configs" / name))


def resolve_config_path(path: str | os.PathLike | None) -> Path:
    """Explicit path, else ``$SPARSELOB_CONFIG_DIR/<name>``, else the shipped copy."""
    name = DEFAULT_CONFIG if path is None else str(path)
    p = Path(name)
    if path is not None and p.exists():
        return p
    env = os.environ.get(CONFIG_DIR_ENV)
    if env and (Path(env) / p.name).exists():
        return Path(env) / p.name
    if shipped_config_path(p.name).exists():
        return shipped_config_path(p.name)
    raise ParseError(f"config file not found: {name}")


def _floats(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())
    except ValueError:
        raise ParseError(f"{key}: expected a comma-separated list of numbers, got {text!r}") from None


def _float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"{key}: expected a number, got {text!r}") from None


def _int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{key}: expected an integer, got {text!r}") from None


def _side_params(base: SideParams, overrides: dict[str, str], prefix: str) -> SideParams:
    blocks = {}
    for block, (cls, fields) in _BLOCKS.items():
        current = getattr(base, block)
        kw = {}
        for f in fields:
            key = f"{block}.{f}"
            if key in overrides:
                conv = _floats if cls is VolumeLaw else _float
                kw[f] = conv(overrides[key], prefix + key)
        blocks[block] = replace(current, **kw) if kw else current
    return SideParams(**blocks)


def parse_config(text: str, source: str = "<string>") -> SimConfig:
    cp = configparser.ConfigParser(
        inline_comment_prefixes=("#",), interpolation=None, delimiters=("=",)
    )
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ParseError(f"{source}: {exc}") from None

    for section in cp.sections():
        if section not in _SECTIONS:
            raise ParseError(f"{source}: unknown section [{section}]")
    get = lambda s: dict(cp[s]) if cp.has_section(s) else {}
    model, ib, sim, outputs, stats = (get(s) for s in _SECTIONS)

    # -- model
    side_keys = {f"{b}.{f}" for b, (_, fs) in _BLOCKS.items() for f in fs}
    shared, per_side = {}, {"bid": {}, "ask": {}}
    for key, value in model.items():
        head, _, rest = key.partition(".")
        if key in _MODEL_SCALARS or key in side_keys:
            shared[key] = value
        elif head in per_side and rest in side_keys:
            per_side[head][rest] = value
        else:
            raise ParseError(f"{source}: unknown key [model] {key}")

    ref = reference_params()
    horizon = _float(shared.get("horizon_T", str(ref.horizon_T)), "model.horizon_T")
    K = _int(shared.get("K", str(ref.K)), "model.K")
    tick = _float(shared.get("tick", str(ref.tick)), "model.tick")
    floor = _float(shared.get("volume_floor", str(ref.volume_floor)), "model.volume_floor")
    base = _side_params(ref.ask, shared, "")
    try:
        params = ModelParams(
            horizon_T=horizon,
            K=K,
            bid=_side_params(base, per_side["bid"], "bid."),
            ask=_side_params(base, per_side["ask"], "ask."),
            volume_floor=floor,
            tick=tick,
        )
    except ParamsError as exc:
        raise ValidationError(str(exc)) from None

    # -- initial book
    for key in ib:
        if key not in _BOOK_KEYS:
            raise ParseError(f"{source}: unknown key [initial_book] {key}")
    ref_cfg = reference_config() if K == 5 else None
    def ladder(key, default):
        if key in ib:
            return _floats(ib[key], f"initial_book.{key}")
        if default is None:
            raise ValidationError(f"initial_book.{key} is required when K != 5")
        return default
    rb = ref_cfg.initial_book if ref_cfg else None
    bid_p = ladder("bid_prices", rb and rb.bid_prices)
    ask_p = ladder("ask_prices", rb and rb.ask_prices)
    bid_v = ladder("bid_volumes", (5.0,) * len(bid_p))
    ask_v = ladder("ask_volumes", (5.0,) * len(ask_p))
    try:
        initial = BookState.from_prices(bid_p, ask_p, bid_v, ask_v, tick=tick, lot=floor)
    except ValueError as exc:
        raise ValidationError(f"initial_book: {exc}") from None

    # -- simulation
    for key in sim:
        if key not in _SIM_KEYS:
            raise ParseError(f"{source}: unknown key [simulation] {key}")
    start = _float(sim.get("start_time", str(horizon - 4.0)), "simulation.start_time")
    cutoff = _float(sim.get("cutoff_time", str(horizon - 1.0)), "simulation.cutoff_time")
    seed = _int(sim.get("seed", "20210107"), "simulation.seed")
    snaps = _floats(sim["snapshot_times"], "simulation.snapshot_times") if "snapshot_times" in sim else (cutoff,)

    for key in stats:
        if key not in _STATS_KEYS:
            raise ParseError(f"{source}: unknown key [stats] {key}")
    d = StatsOptions()
    stats_opts = StatsOptions(
        tau_grid=_floats(stats["tau_grid"], "stats.tau_grid") if "tau_grid" in stats else d.tau_grid,
        bin_width=_float(stats.get("bin_width", str(d.bin_width)), "stats.bin_width"),
        clip_quantile=_float(stats.get("clip_quantile", str(d.clip_quantile)), "stats.clip_quantile"),
        levels=tuple(int(x) for x in _floats(stats["levels"], "stats.levels")) if "levels" in stats else d.levels,
    )
    if any(t <= 0 for t in stats_opts.tau_grid) or not stats_opts.tau_grid:
        raise ValidationError("stats.tau_grid entries > 0")
    if stats_opts.bin_width <= 0:
        raise ValidationError("stats.bin_width > 0")
    if not 0 < stats_opts.clip_quantile <= 1:
        raise ValidationError("stats.clip_quantile in (0, 1]")
    if any(not 1 <= k <= K for k in stats_opts.levels):
        raise ValidationError("stats.levels within 1..K")

    for key in outputs:
        if key not in _OUTPUT_KEYS:
            raise ParseError(f"{source}: unknown key [outputs] {key}")
    if "delimiter" in outputs:
        delim = "\t" if outputs["delimiter"] == "tab" else outputs["delimiter"]
        if len(delim) != 1:
            raise ValidationError("outputs.delimiter must be a single character or 'tab'")
        outputs["delimiter"] = delim

    try:
        return SimConfig(
            params=params,
            initial_book=initial,
            start_time=start,
            cutoff_time=cutoff,
            master_seed=seed,
            snapshot_times=snaps,
            window_minutes=_float(sim.get("window_minutes", "10"), "simulation.window_minutes"),
            initial_jitter=_float(ib.get("jitter", "0"), "initial_book.jitter"),
            bound_step=_float(sim.get("bound_step", "0.1"), "simulation.bound_step"),
            stats=stats_opts,
            outputs=dict(outputs),
        )
    except ConfigError as exc:
        raise ValidationError(str(exc)) from None


def load_config(path: str | os.PathLike | None = None) -> SimConfig:
    p = resolve_config_path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {p}: {exc}") from None
    return parse_config(text, source=str(p))


def _fmt(values) -> str:
    return ", ".join(repr(float(v)) for v in values)


def dump_config(c: SimConfig) -> str:
    p = c.params
    lines = ["[model]"]
    lines += [f"horizon_T = {p.horizon_T!r}", f"K = {p.K}", f"tick = {p.tick!r}",
              f"volume_floor = {p.volume_floor!r}"]
    for block, (cls, fields) in _BLOCKS.items():
        for f in fields:
            v = getattr(getattr(p.bid, block), f)
            lines.append(f"{block}.{f} = {_fmt(v) if cls is VolumeLaw else repr(float(v))}")
    for block, (cls, fields) in _BLOCKS.items():
        for f in fields:
            v, w = getattr(getattr(p.bid, block), f), getattr(getattr(p.ask, block), f)
            if v != w:
                lines.append(f"ask.{block}.{f} = {_fmt(w) if cls is VolumeLaw else repr(float(w))}")
    b = c.initial_book
    lines += ["", "[initial_book]",
              f"bid_prices = {_fmt(b.bid_prices)}", f"ask_prices = {_fmt(b.ask_prices)}",
              f"bid_volumes = {_fmt(b.bid_volumes)}", f"ask_volumes = {_fmt(b.ask_volumes)}",
              f"jitter = {c.initial_jitter!r}"]
    lines += ["", "[simulation]",
              f"start_time = {c.start_time!r}", f"cutoff_time = {c.cutoff_time!r}",
              f"seed = {c.master_seed}", f"snapshot_times = {_fmt(c.snapshot_times)}",
              f"bound_step = {c.bound_step!r}", f"window_minutes = {c.window_minutes!r}"]
    s = c.stats
    lines += ["", "[stats]", f"tau_grid = {_fmt(s.tau_grid)}", f"bin_width = {s.bin_width!r}",
              f"clip_quantile = {s.clip_quantile!r}", f"levels = {', '.join(map(str, s.levels))}"]
    lines += ["", "[outputs]"] + [
        f"{k} = {'tab' if k == 'delimiter' and v == chr(9) else v}" for k, v in c.outputs.items()
    ]
    return "\n".join(lines) + "\n"


def write_config(c: SimConfig, path: str | os.PathLike) -> None:
    Path(path).write_text(dump_config(c), encoding="utf-8")
