"""Stand-alone reference simulator used as a statistical oracle.

Written against the model description only: plain lists, ``random.Random``,
a different thinning step and a separate uniform for kind selection. It
shares no code with the package, so agreement in distribution is evidence
that both implement the same law.
"""

import math
import random

T = 4.0
K = 5
LM, KM, BM = 45.72, 0.51, 0.5
LL, KL, A, B = 450.0, 5.22e-4, 0.145, 0.02
LC, KC = 72.0, 0.6
PM = [0.480, 0.158, 0.314, 0.032, 0.012, 0.004]
PL = [0.322, 0.152, 0.464, 0.022, 0.011, 0.029]
V = [10, 20, 50, 100, 150, 250]  # lots of 0.1 MWh
TICK = 0.01


def _rates(s, spread_eur):
    m = LM * math.exp(-KM * (T - s)) * math.exp(-BM * spread_eur)
    lim = LL * math.exp(-KL * (T - s))
    c = K * LC * math.exp(-KC * (T - s))
    return [m, m, lim, lim, c, c]


def run(seed, start=0.0, cutoff=3.0, step=0.05):
    """One session; returns (spreads at levels 1..3 at the cutoff, event count)."""
    R = random.Random(seed)
    # [price in ticks, lots]; bids descending, asks ascending
    bid = [[4500, 50], [4400, 50], [4200, 50], [3900, 50], [3500, 50]]
    ask = [[5500, 50], [5600, 50], [5800, 50], [6100, 50], [6500, 50]]
    t, n = start, 0
    while True:
        spread = (ask[0][0] - bid[0][0]) * TICK
        u = min(t + step, cutoff)
        bound = sum(_rates(u, spread))
        c = t + R.expovariate(bound)
        if c > u:
            if u >= cutoff:
                break
            t = u
            continue
        t = c
        r = _rates(c, spread)
        if R.random() * bound >= sum(r):
            continue
        i = R.choices(range(6), weights=r)[0]
        beta = A * math.exp(-B * (T - t))
        is_bid = i % 2 == 0
        side, opp = (bid, ask) if is_bid else (ask, bid)
        out = -1 if is_bid else 1  # direction away from the mid

        def regen():
            z = R.expovariate(beta)
            d = max(1, math.ceil(z / TICK - 1e-9))
            side.append([side[-1][0] + out * d, R.choices(V, PL)[0]])

        if i < 2:
            depth = sum(q for _, q in side)
            if depth <= 1:
                continue
            xi = min(R.choices(V, PM)[0], depth - 1)
            n += 1
            while side[0][1] <= xi:
                xi -= side.pop(0)[1]
            side[0][1] -= xi
            while len(side) < K:
                regen()
        elif i < 4:
            n += 1
            z = R.expovariate(beta)
            p = opp[0][0] + out * math.floor(z / TICK + 1e-9)
            if out * (p - side[-1][0]) > 0:
                continue
            taken = {q for q, _ in side}
            while p in taken:
                p -= out
            if out * (p - opp[0][0]) <= 0:
                continue
            side.append([p, R.choices(V, PL)[0]])
            side.sort(key=lambda e: out * e[0])
            side.pop()
        else:
            n += 1
            k = R.randrange(K)
            deepest = side[-1][0]
            side.pop(k)
            z = R.expovariate(beta)
            side.append([deepest + out * max(1, math.ceil(z / TICK - 1e-9)), R.choices(V, PL)[0]])
    return [(ask[k][0] - bid[k][0]) * TICK for k in range(3)], n
