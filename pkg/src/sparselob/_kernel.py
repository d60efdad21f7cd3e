"""Compiled event loop.

Mirrors ``engine._simulate_python`` draw for draw and operation for operation,
so both paths give identical trajectories for the same generator. Any change
here must be made there too (``tests/test_engine.py`` checks parity).

Side index convention inside the kernel: 0 = bid, 1 = ask.
"""

import math

import numba
import numpy as np

_GRID_EPS = 1e-9


@numba.njit(cache=True)
def _categorical(u, cum):
    n = cum.shape[0]
    for i in range(n):
        if u < cum[i]:
            return i
    return n - 1


@numba.njit(cache=True)
def _rates(t, spread, T, K, mkt, lim, can, out):
    """Fill ``out`` with the 4 + 2K per-kind intensities; return their sum."""
    out[0] = mkt[0, 0] * math.exp(-mkt[0, 1] * (T - t)) * math.exp(-mkt[0, 2] * spread)
    out[1] = mkt[1, 0] * math.exp(-mkt[1, 1] * (T - t)) * math.exp(-mkt[1, 2] * spread)
    out[2] = lim[0, 0] * math.exp(-lim[0, 1] * (T - t))
    out[3] = lim[1, 0] * math.exp(-lim[1, 1] * (T - t))
    cb = can[0, 0] * math.exp(-can[0, 1] * (T - t))
    ca = can[1, 0] * math.exp(-can[1, 1] * (T - t))
    for k in range(K):
        out[4 + k] = cb
        out[4 + K + k] = ca
    total = 0.0
    for i in range(4 + 2 * K):
        total += out[i]
    return total


@numba.njit(cache=True)
def _outside_ticks(z, tick):
    n = int(math.ceil(z / tick - _GRID_EPS))
    return n if n > 1 else 1


@numba.njit(cache=True)
def _to_lots(v, lot):
    n = int(round(v / lot))
    if n == 0 and v > 0:
        return 1
    return n


@numba.njit(cache=True)
def run_session(
    rng,
    book_t,  # (2, K) int64 ticks, row 0 bid, row 1 ask
    book_q,  # (2, K) int64 lots
    T,
    start,
    cutoff,
    bound_step,
    tick,
    lot,
    volume_floor,
    mkt,  # (2, 3): lambda_bar, kappa, beta
    lim,  # (2, 4): lambda_bar, kappa, A, b
    can,  # (2, 2): lambda_bar, kappa
    mv_cum,  # (2, n) market volume cumulative probs
    mv_vol,  # (2, n) market volumes MWh
    lv_cum,  # (2, m)
    lv_vol,  # (2, m)
    snap_times,  # sorted
    win_start,
    win_len,
    n_win,
    record,
    cap,
):
    K = book_t.shape[1]
    bt = book_t.copy()
    bq = book_q.copy()
    rates = np.empty(4 + 2 * K)
    regen_t = np.empty(K - 1, np.int64)
    regen_q = np.empty(K - 1, np.int64)
    zs = np.empty(K - 1)

    n_snap = snap_times.shape[0]
    snap_t = np.empty((n_snap, 2, K), np.int64)
    snap_q = np.empty((n_snap, 2, K), np.int64)
    si = 0
    counts = np.zeros((n_win, 6), np.int64)

    rcap = cap if record else 1
    ev_time = np.empty(rcap)
    ev_kind = np.empty(rcap, np.int64)
    ev_level = np.empty(rcap, np.int64)
    ev_lots = np.empty(rcap, np.int64)
    ev_price = np.empty(rcap, np.int64)
    ev_best = np.empty((rcap, 2), np.int64)
    ev_nregen = np.empty(rcap, np.int64)
    rg_t = np.empty(rcap * (K - 1), np.int64)
    rg_q = np.empty(rcap * (K - 1), np.int64)
    n_ev = 0
    n_rg = 0
    overflow = False

    t = start
    while True:
        # --- next event by thinning -----------------------------------
        spread = (bt[1, 0] - bt[0, 0]) * tick
        kind = -1
        te = 0.0
        while True:
            u_end = t + bound_step
            if u_end > cutoff:
                u_end = cutoff
            bound = _rates(u_end, spread, T, K, mkt, lim, can, rates)
            if bound <= 0.0:
                if u_end >= cutoff:
                    break
                t = u_end
                continue
            cand = t + rng.standard_exponential() / bound
            if cand > u_end:
                if u_end >= cutoff:
                    break
                t = u_end
                continue
            _rates(cand, spread, T, K, mkt, lim, can, rates)
            x = rng.random() * bound
            acc = 0.0
            for i in range(4 + 2 * K):
                acc += rates[i]
                if x < acc:
                    kind = i
                    break
            if kind >= 0:
                te = cand
                break
            t = cand
        if kind < 0:
            break

        while si < n_snap and snap_times[si] < te:
            snap_t[si] = bt
            snap_q[si] = bq
            si += 1

        # --- marks and transition -------------------------------------
        if kind < 4:
            s = kind % 2
            sgn = 1 if s == 1 else -1
        else:
            s = 0 if kind - 4 < K else 1
            sgn = 1 if s == 1 else -1
        level = 0
        q_ev = 0
        p_ev = 0
        n_new = 0

        if kind < 2:
            cum_lots = 0
            for k in range(K):
                cum_lots += bq[s, k]
            cum = cum_lots * lot
            if cum <= volume_floor:
                t = te
                continue
            v = mv_vol[s, _categorical(rng.random(), mv_cum[s])]
            lim_v = cum - volume_floor
            xi = _to_lots(v if v < lim_v else lim_v, lot)
            beta_t = lim[s, 2] * math.exp(-lim[s, 3] * (T - te))
            for j in range(K - 1):
                zs[j] = rng.standard_exponential() / beta_t
            for j in range(K - 1):
                regen_q[j] = _to_lots(lv_vol[s, _categorical(rng.random(), lv_cum[s])], lot)
            c = 0
            consumed = 0
            for k in range(K):
                if c + bq[s, k] <= xi:
                    c += bq[s, k]
                    consumed += 1
                else:
                    break
            residual = c + bq[s, consumed] - xi
            p_ev = bt[s, consumed]
            last = bt[s, K - 1]
            for j in range(consumed):
                last = last + sgn * _outside_ticks(zs[j], tick)
                regen_t[j] = last
            for k in range(K - consumed):
                bt[s, k] = bt[s, k + consumed]
                bq[s, k] = bq[s, k + consumed]
            bq[s, 0] = residual
            for j in range(consumed):
                bt[s, K - consumed + j] = regen_t[j]
                bq[s, K - consumed + j] = regen_q[j]
            level = consumed
            q_ev = xi
            n_new = consumed
        elif kind < 4:
            beta_t = lim[s, 2] * math.exp(-lim[s, 3] * (T - te))
            z = rng.standard_exponential() / beta_t
            zq = _to_lots(lv_vol[s, _categorical(rng.random(), lv_cum[s])], lot)
            opp = bt[1 - s, 0]
            price = opp + sgn * int(math.floor(z / tick + _GRID_EPS))
            p_ev = price
            q_ev = zq
            ok = sgn * (price - bt[s, K - 1]) <= 0
            if ok:
                moved = True
                while moved:
                    moved = False
                    for k in range(K):
                        if bt[s, k] == price:
                            price -= sgn
                            moved = True
                            break
                if sgn * (price - opp) <= 0:
                    ok = False
            if ok:
                rank = 0
                for k in range(K):
                    if sgn * (bt[s, k] - price) > 0:
                        rank = k
                        break
                for k in range(K - 1, rank, -1):
                    bt[s, k] = bt[s, k - 1]
                    bq[s, k] = bq[s, k - 1]
                bt[s, rank] = price
                bq[s, rank] = zq
                level = rank + 1
                p_ev = price
        else:
            k0 = (kind - 4) % K
            beta_t = lim[s, 2] * math.exp(-lim[s, 3] * (T - te))
            z = rng.standard_exponential() / beta_t
            zq = _to_lots(lv_vol[s, _categorical(rng.random(), lv_cum[s])], lot)
            p_ev = bt[s, k0]
            q_ev = bq[s, k0]
            new_p = bt[s, K - 1] + sgn * _outside_ticks(z, tick)
            for k in range(k0, K - 1):
                bt[s, k] = bt[s, k + 1]
                bq[s, k] = bq[s, k + 1]
            bt[s, K - 1] = new_p
            bq[s, K - 1] = zq
            regen_t[0] = new_p
            regen_q[0] = zq
            level = k0 + 1
            n_new = 1

        w = int((te - win_start) / win_len)
        if w >= n_win:
            w = n_win - 1
        if w >= 0:
            g = kind if kind < 4 else 4 + (kind - 4) // K
            counts[w, g] += 1

        if record:
            if n_ev >= rcap:
                overflow = True
                break
            ev_time[n_ev] = te
            ev_kind[n_ev] = kind
            ev_level[n_ev] = level
            ev_lots[n_ev] = q_ev
            ev_price[n_ev] = p_ev
            ev_best[n_ev, 0] = bt[0, 0]
            ev_best[n_ev, 1] = bt[1, 0]
            ev_nregen[n_ev] = n_new
            for j in range(n_new):
                rg_t[n_rg] = regen_t[j]
                rg_q[n_rg] = regen_q[j]
                n_rg += 1
        n_ev += 1
        t = te

    while si < n_snap:
        snap_t[si] = bt
        snap_q[si] = bq
        si += 1

    return (
        n_ev,
        overflow,
        bt,
        bq,
        snap_t,
        snap_q,
        counts,
        ev_time[: n_ev if record else 0],
        ev_kind[: n_ev if record else 0],
        ev_level[: n_ev if record else 0],
        ev_lots[: n_ev if record else 0],
        ev_price[: n_ev if record else 0],
        ev_best[: n_ev if record else 0],
        ev_nregen[: n_ev if record else 0],
        rg_t[:n_rg],
        rg_q[:n_rg],
    )

