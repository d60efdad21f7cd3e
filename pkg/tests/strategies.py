"""Hypothesis strategies for random valid books and marks."""

from hypothesis import strategies as st

from sparselob.book import BookState, CancelMarks, LimitOrderMarks, MarketOrderMarks

distances = st.one_of(
    st.floats(min_value=1e-4, max_value=0.05),  # sub-tick and near-tick values
    st.floats(min_value=1e-3, max_value=60.0),
)
volumes = st.one_of(st.sampled_from([1.0, 2.0, 5.0, 10.0, 15.0, 25.0]), st.floats(0.01, 30.0))


@st.composite
def books(draw, K=None):
    K = draw(st.integers(2, 7)) if K is None else K
    gaps = st.integers(1, 800)
    best_bid = draw(st.integers(-5000, 10000))
    bid = [best_bid]
    for _ in range(K - 1):
        bid.append(bid[-1] - draw(gaps))
    ask = [best_bid + draw(st.integers(1, 1500))]
    for _ in range(K - 1):
        ask.append(ask[-1] + draw(gaps))
    lots = st.lists(st.integers(1, 300), min_size=K, max_size=K)
    return BookState(0.0, tuple(bid), tuple(ask), tuple(draw(lots)), tuple(draw(lots)))


@st.composite
def market_marks(draw, state, side):
    cum = sum(state.lots(side))
    xi_lots = draw(st.integers(1, cum - 1)) if cum > 1 else None
    n = state.K - 1
    return MarketOrderMarks(
        volume=xi_lots * state.lot,
        regen_distances=tuple(draw(st.lists(distances, min_size=n, max_size=n))),
        regen_volumes=tuple(draw(st.lists(volumes, min_size=n, max_size=n))),
    )


def limit_marks():
    return st.builds(LimitOrderMarks, distance=distances, volume=volumes)


def cancel_marks(K):
    return st.builds(CancelMarks, level=st.integers(1, K), regen_distance=distances, regen_volume=volumes)
