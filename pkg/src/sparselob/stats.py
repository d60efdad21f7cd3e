"""Ensemble and trajectory statistics.

Produces plot-ready tables: limit-distance distributions at a snapshot time,
per-window event counts, mid-price series and the realized-volatility
signature plot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import EnsembleResult, Trajectory
from .stochastic import KIND_GROUPS, ModelParams, Side


class MissingSnapshot(KeyError):
    pass


class EmptyWindow(ValueError):
    pass


@dataclass(frozen=True)
class DistributionSummary:
    edges: np.ndarray
    counts: np.ndarray
    mean: float
    std: float
    n: int

    def rows(self) -> list[tuple[float, float, int]]:
        return [(float(a), float(b), int(c)) for a, b, c in zip(self.edges[:-1], self.edges[1:], self.counts)]


def summarize(values, bin_width: float = 0.25, clip_quantile: float = 0.995) -> DistributionSummary:
    """Histogram with ``bin_width`` bins; values above the clip point fall in the last bin."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("no values to summarize")
    mean = float(x.mean())
    lo = math.floor(x.min() / bin_width + 1e-9) * bin_width
    clip = max(float(np.quantile(x, clip_quantile)), mean)
    hi = math.ceil(clip / bin_width - 1e-9) * bin_width
    n_bins = max(1, int(round((hi - lo) / bin_width)))
    if lo + n_bins * bin_width <= clip:
        n_bins += 1
    edges = lo + bin_width * np.arange(n_bins + 1)
    idx = np.clip(np.floor((x - lo) / bin_width + 1e-9).astype(np.int64), 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    return DistributionSummary(edges, counts, mean, float(x.std()), int(x.size))


def _distances(ensemble, k: int, at_time: float) -> np.ndarray:
    if isinstance(ensemble, EnsembleResult):
        if not 1 <= k <= ensemble.K:
            raise ValueError(f"level {k} outside 1..{ensemble.K}")
        try:
            return ensemble.limit_distances(k, at_time)
        except KeyError:
            raise MissingSnapshot(at_time) from None
    out = []
    for traj in ensemble:
        snap = next((b for s, b in traj.snapshots.items() if abs(s - at_time) < 1e-9), None)
        if snap is None:
            raise MissingSnapshot(at_time)
        if not 1 <= k <= snap.K:
            raise ValueError(f"level {k} outside 1..{snap.K}")
        out.append(snap.level_distance(k))
    return np.asarray(out)


def limit_distance_distribution(
    ensemble, k: int, at_time: float, bin_width: float = 0.25, clip_quantile: float = 0.995
) -> DistributionSummary:
    """Distribution of S^k - S^-k across runs; ``k = 1`` is the spread."""
    return summarize(_distances(ensemble, k, at_time), bin_width, clip_quantile)


def mid_price_series(traj: Trajectory, grid) -> np.ndarray:
    """Mid price in force at each grid time (post-event value at an event time)."""
    g = np.asarray(grid, dtype=float)
    if g.size == 0:
        raise EmptyWindow("empty sampling grid")
    eps = 1e-12
    if g.min() < traj.start_time - eps or g.max() > traj.cutoff_time + eps:
        raise EmptyWindow("grid outside the trajectory window")
    init_mid = (traj.initial.bid_ticks[0] + traj.initial.ask_ticks[0]) * traj.tick / 2
    mids = np.concatenate([[init_mid], traj.mids])
    return mids[np.searchsorted(traj.times, g, side="right")]


@dataclass(frozen=True)
class SignaturePlot:
    tau_grid: np.ndarray  # seconds
    c_hat: np.ndarray  # EUR^2 per hour
    window: tuple[float, float]  # hours
    n_runs: int = 1

    def rows(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.tau_grid, self.c_hat)]


def realized_variance(traj: Trajectory, tau_seconds: float, t0: float, t_end: float) -> float:
    """Sum of squared mid increments on the grid t0, t0+tau, ... over the window length."""
    tau = tau_seconds / 3600
    if tau <= 0:
        raise ValueError("tau must be positive")
    span = t_end - t0
    n = int(math.floor(span / tau + 1e-9))
    if n < 1:
        raise EmptyWindow(f"tau = {tau_seconds} s does not fit in the window")
    s = mid_price_series(traj, t0 + tau * np.arange(n + 1))
    return float(np.sum(np.diff(s) ** 2) / span)


def signature_plot(trajectories, tau_grid: Sequence[float], t0: float | None = None,
                   t_end: float | None = None) -> SignaturePlot:
    """Realized volatility against sampling step, averaged pointwise over runs."""
    if isinstance(trajectories, Trajectory):
        trajectories = [trajectories]
    trajectories = list(trajectories)
    if not trajectories:
        raise EmptyWindow("no trajectories")
    t0 = trajectories[0].start_time if t0 is None else t0
    t_end = trajectories[0].cutoff_time if t_end is None else t_end
    if not t0 < t_end:
        raise EmptyWindow("t0 must precede t_end")
    taus = np.asarray(tau_grid, dtype=float)
    c = np.array([[realized_variance(tr, tau, t0, t_end) for tau in taus] for tr in trajectories])
    return SignaturePlot(taus, c.mean(axis=0), (t0, t_end), len(trajectories))


@dataclass(frozen=True)
class IntensityHistogram:
    edges: np.ndarray  # hours
    mean_counts: np.ndarray  # (windows, kind groups)
    n_runs: int
    total_events: int

    @property
    def mean_total(self) -> np.ndarray:
        return self.mean_counts.sum(axis=1)

    def rows(self) -> list[dict]:
        out = []
        for i in range(len(self.edges) - 1):
            row = {"t_start_h": float(self.edges[i]), "t_end_h": float(self.edges[i + 1])}
            row.update({g: float(self.mean_counts[i, j]) for j, g in enumerate(KIND_GROUPS)})
            row["total"] = float(self.mean_total[i])
            out.append(row)
        return out


def _rebin(counts: np.ndarray, edges: np.ndarray, window_minutes: float):
    base = (edges[1] - edges[0]) * 60
    factor = window_minutes / base
    if abs(factor - round(factor)) > 1e-9 or counts.shape[1] % round(factor):
        raise ValueError(f"window of {window_minutes} min is not a multiple of the stored {base} min")
    f = int(round(factor))
    runs, w, g = counts.shape
    return counts.reshape(runs, w // f, f, g).sum(axis=2), edges[::f]


def event_intensity_histogram(ensemble, window_minutes: float = 10.0) -> IntensityHistogram:
    """Mean event counts per time window and kind group across runs."""
    if isinstance(ensemble, EnsembleResult):
        counts, edges = _rebin(ensemble.window_counts, ensemble.window_edges, window_minutes)
    else:
        trajs = list(ensemble)
        t0, t1 = trajs[0].start_time, trajs[0].cutoff_time
        n = (t1 - t0) * 60 / window_minutes
        if abs(n - round(n)) > 1e-9:
            raise ValueError("window must divide the session length")
        n = int(round(n))
        w = window_minutes / 60
        edges = t0 + w * np.arange(n + 1)
        counts = np.zeros((len(trajs), n, len(KIND_GROUPS)), np.int64)
        for r, tr in enumerate(trajs):
            idx = np.minimum(((tr.times - t0) / w).astype(np.int64), n - 1)
            groups = np.where(tr.kinds < 4, tr.kinds, 4 + (tr.kinds - 4) // tr.K)
            np.add.at(counts[r], (idx, groups), 1)
    return IntensityHistogram(edges, counts.mean(axis=0), counts.shape[0], int(counts.sum()))


def integrated_rate(lambda_bar: float, kappa: float, T: float, a: float, b: float) -> float:
    """Integral of lambda_bar * exp(-kappa (T - s)) over [a, b]."""
    if kappa == 0:
        return lambda_bar * (b - a)
    return lambda_bar * (math.exp(-kappa * (T - b)) - math.exp(-kappa * (T - a))) / kappa


def expected_window_counts(params: ModelParams, edges, spread: float | None = None) -> np.ndarray:
    """Closed-form expected counts per window and kind group.

    Market-order rates depend on the spread; pass ``spread`` to freeze it
    (exact when ``beta = 0``), otherwise the market columns are NaN.
    """
    edges = np.asarray(edges, dtype=float)
    T = params.horizon_T
    out = np.zeros((len(edges) - 1, len(KIND_GROUPS)))
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        for j, side in enumerate((Side.BID, Side.ASK)):
            sp = params.side(side)
            if spread is None:
                out[i, j] = np.nan
            else:
                out[i, j] = integrated_rate(sp.market.lambda_bar, sp.market.kappa, T, a, b) * math.exp(
                    -sp.market.beta * spread
                )
            out[i, 2 + j] = integrated_rate(sp.limit.lambda_bar, sp.limit.kappa, T, a, b)
            out[i, 4 + j] = params.K * integrated_rate(sp.cancel.lambda_bar, sp.cancel.kappa, T, a, b)
    return out
