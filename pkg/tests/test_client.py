import pytest

from okapi import wire
from okapi.client import GET, PUT, ROTX, GentleRainClient, OkapiClient
from okapi.harness.experiment import preset, run_experiment
from okapi.hlc import ZERO, decode
from okapi.hlc import HybridTimestamp as T
from okapi.store import ItemVersion


def vec(*ps):
    return tuple(T(p) for p in ps)


def session(cluster, cls=OkapiClient, dc=0, home=(0, 0)):
    """A hand-driven client: it stops after each operation."""
    c = cls(cluster.sim, dc, 0, cluster.server(*home).id, None, cluster.recorder,
            cluster.trace, stop_at=0)
    sent = []
    real = c.send

    def spy(msg, nbytes):
        sent.append(msg)
        real(msg, nbytes)

    c.send = spy
    return c, sent


def step(cluster, client, kind, keys):
    client.issue(kind, keys)
    cluster.sim.run(cluster.sim.now + 1_000)
    assert client.outstanding is None


def test_fresh_session_first_read_adopts_server_vector(cluster_factory):
    cl = cluster_factory("okapi")
    cl.server(0, 0).usv = vec(3, 4, 5)
    c, _ = session(cl)
    step(cl, c, GET, (0,))
    assert c.usv_c == vec(3, 4, 5)
    assert c.dt_c == ZERO


def test_local_read_raises_dependency(cluster_factory):
    cl = cluster_factory("okapi")
    cl.server(0, 0).store.insert(ItemVersion(0, 1, T(9), 0, vec(9, 0, 0)))
    c, sent = session(cl)
    step(cl, c, GET, (0,))
    assert c.dt_c >= T(9)
    step(cl, c, PUT, (0,))
    assert sent[-1][4][0] >= T(9)


def test_remote_read_keeps_dependency(cluster_factory):
    cl = cluster_factory("okapi")
    s = cl.server(0, 0)
    s.store.insert(ItemVersion(0, 1, T(9), 1))
    s.usv = vec(0, 9, 0)
    c, _ = session(cl)
    step(cl, c, GET, (0,))
    assert c.dt_c == ZERO
    assert c.usv_c[1] == T(9)


def test_fresh_put_sends_zero_vector(cluster_factory):
    cl = cluster_factory("okapi", clocks={"p0@dc0": 77})
    c, sent = session(cl)
    step(cl, c, PUT, (0,))
    assert sent[0][4] == vec(0, 0, 0)
    # stamped when the request reached the server, one client hop later
    assert c.dt_c == T(77 + cl.sim.topology.client_us)


def test_second_put_depends_on_first(cluster_factory):
    cl = cluster_factory("okapi")
    c, sent = session(cl)
    step(cl, c, PUT, (0,))
    first = c.dt_c
    step(cl, c, PUT, (2,))
    assert sent[1][4][0] == first


def test_tx_with_remote_items_keeps_dependency(cluster_factory):
    cl = cluster_factory("okapi")
    s = cl.server(0, 0)
    s.store.insert(ItemVersion(0, 1, T(9), 2))
    s.usv = vec(0, 0, 9)
    c, _ = session(cl)
    step(cl, c, ROTX, (0,))
    assert c.dt_c == ZERO


def test_tx_with_fresh_local_item_advances_dependency(cluster_factory):
    cl = cluster_factory("okapi", clocks={"p0@dc0": 50})
    s = cl.server(0, 0)
    # as left behind by a PUT stamped (20,0)
    s.store.insert(ItemVersion(0, 1, T(20), 0, vec(20, 0, 0)))
    s.vv = vec(20, 0, 0)
    c, _ = session(cl)
    step(cl, c, ROTX, (0,))
    assert c.dt_c == T(20)


def test_empty_tx_still_merges_vector(cluster_factory):
    cl = cluster_factory("okapi")
    cl.server(0, 0).usv = vec(1, 2, 3)
    c, _ = session(cl)
    step(cl, c, ROTX, ())
    assert c.usv_c == vec(1, 2, 3)


def test_one_operation_at_a_time(cluster_factory):
    cl = cluster_factory("okapi")
    c, _ = session(cl)
    c.issue(GET, (0,))
    with pytest.raises(RuntimeError):
        c.issue(GET, (0,))


def test_gentlerain_client_tracks_everything_read(cluster_factory):
    cl = cluster_factory("gentlerain")
    s = cl.server(0, 0)
    s.store.insert(ItemVersion(0, 1, T(9), 1))
    s.gst = T(10)
    c, sent = session(cl, GentleRainClient)
    step(cl, c, GET, (0,))
    assert c.dt_c == T(9) and c.gst_c == T(10)
    step(cl, c, PUT, (0,))
    assert sent[-1][0] == wire.PUT_REQ and sent[-1][4] == T(9)


@pytest.mark.parametrize("protocol", ["okapi", "gentlerain", "cure"])
def test_session_state_never_regresses(protocol):
    cfg = preset("sweep", protocol, 4)[0].replace(horizon_us=250_000, drain_us=250_000)
    res = run_experiment(cfg)
    last = {}
    for op in res.trace.ops:
        state = [decode(w) for w in op.sent]
        prev = last.get(op.session)
        if prev is not None:
            assert all(a >= b for a, b in zip(state, prev)), (op.session, op.index)
        last[op.session] = state
    # every session stays on its home data center
    homes = {}
    for op in res.trace.ops:
        assert homes.setdefault(op.session, op.dc) == op.dc
