import pytest

from okapi.harness.checker import IncompleteTrace, check_history
from okapi.harness.trace import HistoryTrace, OpRecord


def history(*ops, complete=True):
    t = HistoryTrace(meta={"complete": complete})
    for session, index, kind, keys, results in ops:
        t.add_op(OpRecord(session, index, 0, kind, tuple(keys), results=list(results)))
    return t


def kinds(vs):
    return sorted(v.kind for v in vs)


def test_empty_history():
    assert check_history(history()) == []


def test_incomplete_refused():
    with pytest.raises(IncompleteTrace):
        check_history(history(complete=False))
    assert check_history(history(complete=False), require_complete=False) == []


def test_consistent_history():
    h = history(
        (1, 0, "put", [0], [(0, 10, 0)]),
        (1, 1, "put", [1], [(1, 20, 0)]),
        (2, 0, "get", [1], [(1, 20, 0)]),
        (2, 1, "get", [0], [(0, 10, 0)]),
        (2, 2, "put", [0], [(0, 30, 1)]),
        (3, 0, "rotx", [0, 1], [(0, 30, 1), (1, 20, 0)]),
    )
    assert check_history(h) == []


def test_stale_get_after_dependency():
    # session 2 saw y written after x, then reads the initial x
    h = history(
        (1, 0, "put", [0], [(0, 10, 0)]),
        (1, 1, "put", [1], [(1, 20, 0)]),
        (2, 0, "get", [1], [(1, 20, 0)]),
        (2, 1, "get", [0], [None]),
    )
    vs = check_history(h)
    assert len(vs) == 1
    v = vs[0]
    assert v.kind == "stale-read" and v.op == (2, 1)
    assert v.path == [(1, 0), (1, 1), (2, 0), (2, 1)]
    assert "2:1" in str(v)


def test_overwritten_version_is_stale():
    h = history(
        (1, 0, "put", [0], [(0, 5, 0)]),
        (1, 1, "put", [0], [(0, 10, 0)]),
        (2, 0, "get", [0], [(0, 10, 0)]),
        (2, 1, "get", [0], [(0, 5, 0)]),
    )
    vs = check_history(h)
    assert kinds(vs) == ["stale-read"]
    assert vs[0].path[0] == (1, 0)


def test_concurrent_older_version_is_fine():
    # two unrelated writers: reading the lower timestamp is allowed
    h = history(
        (1, 0, "put", [0], [(0, 5, 0)]),
        (2, 0, "put", [0], [(0, 10, 1)]),
        (3, 0, "get", [0], [(0, 10, 1)]),
        (3, 1, "get", [0], [(0, 5, 0)]),
    )
    assert check_history(h) == []


def test_timestamp_order():
    h = history(
        (1, 0, "put", [0], [(0, 10, 0)]),
        (2, 0, "get", [0], [(0, 10, 0)]),
        (2, 1, "put", [1], [(1, 9, 1)]),
    )
    vs = check_history(h)
    assert kinds(vs) == ["timestamp-order"]
    assert vs[0].path == [(1, 0), (2, 0), (2, 1)]


def test_equal_timestamp_tie_broken_by_dc():
    h = history(
        (1, 0, "put", [0], [(0, 10, 0)]),
        (1, 1, "put", [1], [(1, 10, 1)]),
    )
    assert check_history(h) == []
    h = history(
        (1, 0, "put", [0], [(0, 10, 1)]),
        (1, 1, "put", [1], [(1, 10, 0)]),
    )
    assert kinds(check_history(h)) == ["timestamp-order"]


def test_fractured_transaction():
    # x5 -> x10 -> y20, but the transaction pairs x5 with y20
    h = history(
        (1, 0, "put", [0], [(0, 5, 0)]),
        (1, 1, "put", [0], [(0, 10, 0)]),
        (1, 2, "put", [1], [(1, 20, 0)]),
        (2, 0, "rotx", [0, 1], [(0, 5, 0), (1, 20, 0)]),
    )
    vs = check_history(h)
    assert kinds(vs) == ["snapshot", "stale-read"]
    snap = next(v for v in vs if v.kind == "snapshot")
    assert snap.path == [(1, 0), (1, 1), (1, 2)]


def test_phantom_and_cycle():
    assert kinds(check_history(history((1, 0, "get", [0], [(0, 3, 2)])))) == ["phantom"]
    # a read of a version its own session writes later
    h = history(
        (1, 0, "get", [0], [(0, 10, 0)]),
        (1, 1, "put", [0], [(0, 10, 0)]),
    )
    assert set(kinds(check_history(h))) == {"cycle"}


def test_writer_from_version_records():
    # a put whose reply was lost still has its writer in the version records
    t = history(
        (1, 0, "put", [0], [(0, 10, 0)]),
        (1, 1, "put", [1], [None]),
        (2, 0, "get", [1], [(1, 20, 0)]),
        (2, 1, "get", [0], [None]),
    )
    t.ops[1].results = None
    t.add_version(0, 0, 0, (1, 20, 0), (1, 1))
    assert kinds(check_history(t)) == ["stale-read"]
