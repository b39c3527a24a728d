import pytest
from hypothesis import given
from hypothesis import strategies as st

from okapi import hlc
from okapi.hlc import HybridTimestamp as T

ts = st.builds(T, st.integers(0, 2**20), st.integers(0, 50))
clocks = st.integers(0, 2**20)


def put_oracle(vv, clock, hd):
    """Smallest timestamp that is at least the clock and above vv and hd."""
    return max(T(clock, 0), T(vv.p, vv.l + 1), T(hd.p, hd.l + 1))


def test_compare_examples():
    assert hlc.compare(T(10, 0), T(6, 3)) == 1
    assert hlc.compare(T(10, 1), T(10, 0)) == 1
    assert hlc.compare(T(7, 5), T(7, 5)) == 0
    assert hlc.compare(T(6, 3), T(10, 0)) == -1


def test_encode_examples():
    assert hlc.encode(T(0, 0)) == 0
    assert hlc.encode(T(1, 0)) == 1 << 16
    assert hlc.encode(T(1, 1)) == (1 << 16) | 1
    assert hlc.decode(65537) == T(1, 1)


def test_encode_rejects_out_of_range():
    with pytest.raises(hlc.EncodingError):
        hlc.encode(T(1 << 48, 0))
    with pytest.raises(hlc.EncodingError):
        hlc.encode(T(0, 1 << 16))
    with pytest.raises(hlc.EncodingError):
        hlc.decode(-1)


@given(st.integers(0, hlc.MAX_PHYSICAL), st.integers(0, hlc.MAX_LOGICAL))
def test_encode_roundtrip(p, l):
    assert hlc.decode(hlc.encode(T(p, l))) == T(p, l)


@given(ts, ts)
def test_encoding_preserves_order(a, b):
    assert (a < b) == (hlc.encode(a) < hlc.encode(b))


def test_put_examples():
    # a dependency ahead of the clock is absorbed without waiting
    assert hlc.update_on_put(T(6, 0), 6, T(10, 0), T(10, 0)) == T(10, 1)
    assert hlc.update_on_put(T(15, 3), 20, T(10, 2), T(10, 2)) == T(20, 0)
    assert hlc.update_on_put(T(10, 4), 10, T(10, 7), T(10, 7)) == T(10, 8)


def test_put_examples_literal_mode():
    lit = hlc.LITERAL
    assert hlc.update_on_put(T(6, 0), 6, T(10, 0), T(10, 0), lit) == T(10, 1)
    assert hlc.update_on_put(T(15, 3), 20, T(10, 2), T(10, 2), lit) == T(20, 0)
    assert hlc.update_on_put(T(10, 4), 10, T(10, 7), T(10, 7), lit) == T(10, 8)


def test_literal_mode_can_tie_a_remote_dependency():
    # the largest dependency is remote: the literal branch resets l to 0
    vv, hd = T(5, 0), T(10, 3)
    assert hlc.update_on_put(vv, 5, T(0, 0), hd, hlc.LITERAL) == T(10, 0)
    assert hlc.update_on_put(vv, 5, T(0, 0), hd, hlc.STRICT) == T(10, 4)


def test_put_overflow():
    with pytest.raises(hlc.HLCOverflow) as exc:
        hlc.update_on_put(T(10, hlc.MAX_LOGICAL), 5, T(0, 0), T(0, 0))
    assert exc.value.max_p == 10


def test_unknown_mode():
    with pytest.raises(ValueError):
        hlc.update_on_put(T(0, 0), 1, T(0, 0), T(0, 0), "sloppy")


@given(ts, clocks, ts, ts)
def test_strict_put_matches_oracle(vv, clock, dl, hd):
    hd = max(hd, dl)
    got = hlc.update_on_put(vv, clock, dl, hd)
    assert got == put_oracle(vv, clock, hd)
    assert got > vv and got > hd and got.p >= clock


@given(ts, clocks)
def test_consecutive_puts_increase(vv, clock):
    a = hlc.update_on_put(vv, clock, hlc.ZERO, hlc.ZERO)
    b = hlc.update_on_put(a, clock, hlc.ZERO, hlc.ZERO)
    assert b > a


def test_tx_examples():
    assert hlc.update_on_tx(T(6, 0), 6, T(10, 0)) == T(10, 0)
    assert hlc.update_on_tx(T(12, 0), 6, T(10, 0)) == T(12, 0)
    assert hlc.update_on_tx(T(8, 0), 20, T(10, 0)) == T(8, 0)


def test_tx_at_current_tick_moves_clock():
    # a snapshot at exactly (clock, 0) must still fence later writes
    assert hlc.update_on_tx(T(5, 0), 10, T(10, 0)) == T(10, 0)


@given(ts, clocks, ts)
def test_tx_fences_snapshot(vv, clock, snap):
    got = hlc.update_on_tx(vv, clock, snap)
    assert got >= vv
    # any later put lands strictly above the snapshot
    nxt = hlc.update_on_put(got, clock, hlc.ZERO, hlc.ZERO)
    assert nxt > snap


def test_heartbeat_examples():
    assert hlc.update_on_heartbeat(T(5, 7), 9) == T(9, 0)
    assert hlc.update_on_heartbeat(T(9, 3), 9) == T(9, 3)
    assert hlc.update_on_heartbeat(T(12, 0), 9) == T(12, 0)


@given(ts, clocks)
def test_heartbeat_monotone(vv, clock):
    assert hlc.update_on_heartbeat(vv, clock) >= vv


vectors = st.lists(ts, min_size=3, max_size=3).map(tuple)


@given(vectors, vectors)
def test_vector_lattice(a, b):
    lo, hi = hlc.vmin([a, b]), hlc.vmax(a, b)
    assert hlc.vleq(lo, a) and hlc.vleq(lo, b)
    assert hlc.vleq(a, hi) and hlc.vleq(b, hi)
    assert hlc.vleq(a, b) == (hlc.vmax(a, b) == b)


def test_vector_helpers():
    assert hlc.zero_vector(2) == (T(0, 0), T(0, 0))
    assert hlc.with_entry((T(1), T(2)), 1, T(9)) == (T(1), T(9))
    v = (T(3, 1), T(4, 2))
    assert hlc.decode_vector(hlc.encode_vector(v)) == v
    with pytest.raises(ValueError):
        hlc.vmin([])
