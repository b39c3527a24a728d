from okapi import wire
from okapi.harness.config import ClockSpec
from okapi.harness.experiment import preset, run_experiment
from okapi.hlc import ZERO
from okapi.hlc import HybridTimestamp as T
from okapi.simnet import DEFAULT_EPOCH_US
from okapi.store import ItemVersion

RID = (0, 0)


def vec(*ps):
    return tuple(T(p) for p in ps)


def test_gentlerain_put_ahead_of_clock_waits_then_stamps_11(cluster_factory, replies_for):
    c = cluster_factory("gentlerain", clocks={"p0@dc0": 6})
    r = replies_for(c.sim)
    c.server(0, 0).serve_put((wire.PUT_REQ, RID, 0, 1, T(10, 0), ZERO), r)
    assert r.got == []
    c.sim.run(100)
    # the clock has to read 11 before anything can be stamped above 10
    assert r.got == [(5, (wire.PUT_REPLY, RID, T(11, 0)))]
    assert c.recorder.put_waits == [5]


def test_cure_put_ahead_of_clock_stamps_11(cluster_factory, replies_for):
    c = cluster_factory("cure", clocks={"p0@dc0": 6})
    r = replies_for(c.sim)
    c.server(0, 0).serve_put((wire.PUT_REQ, RID, 0, 1, vec(10, 0, 0)), r)
    c.sim.run(100)
    assert r.got == [(5, (wire.PUT_REPLY, RID, T(11, 0)))]


def test_cure_slice_ahead_of_clock_waits_until_10(cluster_factory):
    c = cluster_factory("cure", clocks={"p1@dc0": 6})
    s = c.server(0, 1)
    done = []
    s.handle_slice([1], vec(10, 0, 0), lambda out, w: done.append((c.sim.now, s.clock(), w)))
    assert done == []
    c.sim.run(100)
    assert done == [(4, 10, 4)]
    assert s.floor == T(10)


def test_cure_no_skew_no_wait(cluster_factory, replies_for):
    c = cluster_factory("cure", clocks={"p0@dc0": 50})
    r = replies_for(c.sim)
    c.server(0, 0).serve_put((wire.PUT_REQ, RID, 0, 1, vec(20, 0, 0)), r)
    assert r.got == [(0, (wire.PUT_REPLY, RID, T(50, 0)))]
    assert c.recorder.put_waits == [0]


def test_cure_lagging_server_waits_out_its_skew(cluster_factory, replies_for):
    lag = 50_000
    c = cluster_factory("cure", clocks={"p0@dc0": DEFAULT_EPOCH_US - lag})
    r = replies_for(c.sim)
    # dependency stamped by a server with an accurate clock
    c.server(0, 0).serve_put((wire.PUT_REQ, RID, 0, 1, vec(DEFAULT_EPOCH_US, 0, 0)), r)
    c.sim.run(10**6)
    assert abs(c.recorder.put_waits[0] - lag) <= 1


def test_cure_remote_visibility_needs_full_dv(cluster_factory):
    c = cluster_factory("cure")
    s = c.server(0, 0)
    s.gsv = vec(0, 5, 2)
    c.recorder.version_created((0, T(5).encode(), 1), 1, 0, 0)
    s.on_Replicate(None, (wire.REPLICATE, 0, 1, T(5), 1, vec(0, 5, 3)))
    assert s.visible_version(0) is None
    s.on_gsv(vec(0, 5, 3))
    assert s.visible_version(0).ut == T(5)
    assert c.recorder.visibility[(1, 0)] == [0]


def test_cure_replication_carries_vector(cluster_factory, replies_for):
    c = cluster_factory("cure", clocks={"p0@dc0": 9})
    c.server(0, 0).serve_put((wire.PUT_REQ, RID, 0, 1, vec(0, 0, 0)), replies_for(c.sim))
    assert c.sim.msg_bytes[wire.REPLICATE] == 2 * 44
    c.sim.run(100_000)
    assert c.server(1, 0).store.chain(0).newest().dv == vec(9, 0, 0)


def test_gentlerain_tx_without_wait_when_stable(cluster_factory, replies_for):
    c = cluster_factory("gentlerain")
    s = c.server(0, 0)
    s.gst = T(100)
    s.store.insert(ItemVersion(0, 1, T(40), 1))
    s.store.insert(ItemVersion(0, 2, T(120), 1))
    r = replies_for(c.sim)
    s.serve_ro_tx((wire.TX_REQ, RID, (0,), ZERO, T(50)), r)
    assert r.got[0][1][2][0].ut == T(40)
    assert c.recorder.tx_waits == [(1, 0)]


def test_gentlerain_tx_waits_for_gst(cluster_factory, replies_for):
    c = cluster_factory("gentlerain")
    s = c.server(0, 0)
    r = replies_for(c.sim)
    s.serve_ro_tx((wire.TX_REQ, RID, (0,), ZERO, T(500)), r)
    assert r.got == []
    c.sim.run(300)
    s.on_gst(T(600))
    assert r.got and r.got[0][0] == 300
    assert c.recorder.tx_waits == [(1, 300)]


def test_gentlerain_gst_is_scalar_min(cluster_factory):
    c = cluster_factory("gentlerain")
    a, b = c.server(0, 0), c.server(0, 1)
    a.vv = vec(9, 4, 7)
    b.vv = vec(8, 6, 5)
    c.datacenters[0].gsv_round()
    assert a.gst == b.gst == T(4)


def test_stabilization_message_sizes():
    assert wire.exchange_payload_bytes("gentlerain", 3) == 8
    assert wire.exchange_payload_bytes("okapi", 3) == 24
    assert wire.exchange_payload_bytes("cure", 3) == 24
    assert wire.exchange_bytes("okapi", 3) == 28


def test_okapi_never_waits_under_skew():
    cfg = preset("sweep", "okapi", 5)[0].replace(horizon_us=300_000, drain_us=200_000,
                                                 clocks=ClockSpec(skew_us=50_000))
    s = run_experiment(cfg).report.summary
    assert s["put_wait_prob"] == 0 and s["rotx_wait_prob"] == 0


def test_zero_skew_timestamps_track_clocks():
    """Without skew, Okapi and the vector baseline stamp from the same clocks
    and differ at most in logical parts."""
    uts = {}
    for proto in ("okapi", "cure"):
        cfg = preset("sweep", proto, 2)[0].replace(horizon_us=200_000, drain_us=100_000,
                                                   clocks=ClockSpec(skew_us=0))
        res = run_experiment(cfg)
        uts[proto] = [T(*divmod(o.results[0][1], 1 << 16)) for o in res.trace.ops if o.kind == "put"]
        assert all(u.p >= DEFAULT_EPOCH_US for u in uts[proto])
    assert all(u.l < 50 for u in uts["okapi"])
    assert all(u.l == 0 for u in uts["cure"])
