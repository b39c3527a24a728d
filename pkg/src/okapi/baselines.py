"""Physical-clock baselines: a scalar-stable-time store and a vector-stable
store, sharing the substrate of the HLC server.

Both stamp updates with the bare physical clock, so a PUT whose dependencies
are ahead of the local clock has to wait until the clock passes them. The
scalar variant makes a remote version visible once its timestamp is below
the data center's global stable time; a read-only transaction waits until
that time covers its snapshot. The vector variant ships the whole dependency
vector with every replicated update and makes a remote version visible once
that vector is below the local stable vector; transaction slices wait until
the local clock reaches the snapshot's local entry.
"""

from __future__ import annotations

import itertools
from collections import deque

from . import wire
from .hlc import ZERO, HybridTimestamp, vleq, vmax, with_entry, zero_vector
from .server import DataCenter, ServerBase
from .store import ItemVersion


class PhysicalServer(ServerBase):
    """Physical timestamping with the wait-until-clock-passes rule."""

    def __init__(self, sim, dc, partition, params, recorder):
        super().__init__(sim, dc, partition, params, recorder)
        # no local version may be stamped at or below this
        self.floor = ZERO
        self._tx_ids = itertools.count()
        self._tx: dict[int, list] = {}

    def advance_on_heartbeat(self, clock: int) -> HybridTimestamp:
        vm = self.vv[self.dc]
        if clock > vm.p:
            vm = HybridTimestamp(clock, 0)
            self.vv = with_entry(self.vv, self.dc, vm)
        return vm

    def stamp_when_clear(self, target: HybridTimestamp, fn, arrived: int, *args) -> None:
        """Run ``fn(ut, waited, *args)`` once the clock is past ``target``, the
        version clock and the floor; ``ut`` is the clock reading then."""
        m = self.dc
        bound = max(target, self.vv[m], self.floor)
        clock = self.clock()
        if clock > bound.p:
            ut = HybridTimestamp(clock, 0)
            self.vv = with_entry(self.vv, m, ut)
            fn(ut, self.sim.now - arrived, *args)
            return
        at = self.sim.time_when(self.id, bound.p + 1)
        self.sim.schedule_at(at, self.stamp_when_clear, target, fn, arrived, *args)

    def finish_put(self, ut, waited, key, value, dv, rid, respond) -> None:
        m = self.dc
        self.recorder.put_waits.append(waited)
        d = ItemVersion(key, value, ut, m, None if dv is None else with_entry(dv, m, ut))
        self.store.insert(d)
        now = self.sim.now
        self.recorder.version_created(d.vid, m, self.partition, now, rid)
        respond((wire.PUT_REPLY, rid, ut), wire.request_bytes(wire.PUT_REPLY, self.m))
        self.replicate(d, self.clock())

    # -- transactions: coordinator side -------------------------------------

    def start_tx(self, rid, keys, snapshot, visible, respond, waited: int) -> None:
        """Fan a snapshot read out to the owners of ``keys``."""
        groups: dict[int, list] = {}
        for k in keys:
            groups.setdefault(self.owner(k), []).append(k)
        if not groups:
            self.recorder.tx_waits.append((0, waited))
            respond((wire.TX_RESP, rid, [], visible), wire.request_bytes(wire.TX_RESP, self.m))
            return
        txid = next(self._tx_ids)
        self._tx[txid] = [rid, keys, visible, respond, len(groups), {}, waited]
        for part in sorted(groups):
            ks = groups[part]
            if part == self.partition:
                self.handle_slice(ks, snapshot, lambda out, w, ks=ks: self._slice_done(txid, ks, out, w))
            else:
                self.send(self.dc_servers[part], (wire.SLICE_REQ, txid, ks, snapshot),
                          wire.request_bytes(wire.SLICE_REQ, self.m, nkeys=len(ks)))

    def on_SliceREQ(self, src, msg):
        txid, keys, snapshot = msg[1], msg[2], msg[3]

        def reply(out, waited):
            nver = sum(d is not None for d in out)
            self.send(src, (wire.SLICE_RESP, txid, keys, out, waited),
                      wire.request_bytes(wire.SLICE_RESP, self.m, nversions=nver))

        self.handle_slice(keys, snapshot, reply)

    def on_SliceRESP(self, src, msg):
        self._slice_done(msg[1], msg[2], msg[3], msg[4])

    def _slice_done(self, txid, keys, versions, waited) -> None:
        state = self._tx[txid]
        got = state[5]
        for k, d in zip(keys, versions):
            got[k] = d
        state[6] = max(state[6], waited)
        state[4] -= 1
        if state[4]:
            return
        del self._tx[txid]
        rid, keys_all, visible, respond = state[0], state[1], state[2], state[3]
        ngroups = len({self.owner(k) for k in keys_all})
        self.recorder.tx_waits.append((ngroups, state[6]))
        out = [got[k] for k in keys_all]
        nver = sum(d is not None for d in out)
        respond((wire.TX_RESP, rid, out, visible),
                wire.request_bytes(wire.TX_RESP, self.m, nversions=nver))

    def handle_slice(self, keys, snapshot, done) -> None:  # pragma: no cover
        raise NotImplementedError


# -- scalar stable time ------------------------------------------------------


class GentleRainServer(PhysicalServer):
    protocol = "gentlerain"

    def __init__(self, sim, dc, partition, params, recorder):
        super().__init__(sim, dc, partition, params, recorder)
        self.gst = ZERO
        self._invisible = [deque() for _ in range(self.m)]
        # transactions waiting for gst, as (snapshot, callback)
        self._gst_waiters: list = []

    def _stable_view(self):
        return (self.gst,) * self.m

    def merge_gst(self, g: HybridTimestamp) -> None:
        if g <= self.gst:
            return
        self.gst = g
        now = self.sim.now
        for sr in range(self.m):
            q = self._invisible[sr]
            while q and q[0].ut <= g:
                self.recorder.version_visible(q.popleft().vid, sr, self.dc, now)
        if self._gst_waiters:
            ready = [w for w in self._gst_waiters if w[0] <= g]
            if ready:
                self._gst_waiters = [w for w in self._gst_waiters if w[0] > g]
                for _, fn in ready:
                    fn()

    def on_gst(self, g: HybridTimestamp) -> None:
        self.merge_gst(g)

    def remote_arrived(self, d: ItemVersion) -> None:
        if d.ut <= self.gst:
            self.recorder.version_visible(d.vid, d.sr, self.dc, self.sim.now)
        else:
            self._invisible[d.sr].append(d)

    def visible_version(self, key):
        return self.store.read_visible(key, self._stable_view(), self.dc)

    def serve_get(self, msg, respond):
        rid, key, gst_c = msg[1], msg[2], msg[3]
        self.merge_gst(gst_c)
        d = self.store.read_visible(key, self._stable_view(), self.dc)
        respond((wire.GET_REPLY, rid, d, self.gst), wire.request_bytes(wire.GET_REPLY, 1))

    def serve_put(self, msg, respond):
        rid, key, value, dt_c, gst_c = msg[1], msg[2], msg[3], msg[4], msg[5]
        self.merge_gst(gst_c)
        self.stamp_when_clear(dt_c, self.finish_put, self.sim.now, key, value, None, rid, respond)

    def serve_ro_tx(self, msg, respond):
        rid, keys, gst_c, dt_c = msg[1], msg[2], msg[3], msg[4]
        self.merge_gst(gst_c)
        t = max(dt_c, self.gst)
        arrived = self.sim.now

        def go():
            self.start_tx(rid, keys, t, self.gst, respond, self.sim.now - arrived)

        if t <= self.gst:
            go()
        else:
            self._gst_waiters.append((t, go))

    def handle_slice(self, keys, t, done) -> None:
        # t never exceeds the coordinator's stable time, so it is stable here too
        self.merge_gst(t)
        read = self.store.read_at
        done([read(k, t) for k in keys], 0)


class GentleRainDataCenter(DataCenter):
    def gsv_round(self) -> None:
        g = min(min(s.vv) for s in self.servers)
        self.charge_round(wire.GSV_EXCHANGE, "gentlerain")
        for s in self.servers:
            s.on_gst(g)


# -- vector stable time ------------------------------------------------------


class CureServer(PhysicalServer):
    protocol = "cure"

    def __init__(self, sim, dc, partition, params, recorder):
        super().__init__(sim, dc, partition, params, recorder)
        self.gsv = zero_vector(self.m)
        # remote versions not yet visible, per origin, in ut order
        self._invisible = [deque() for _ in range(self.m)]

    def replicate_msg(self, d: ItemVersion) -> tuple:
        return (wire.REPLICATE, d.key, d.value, d.ut, d.sr, d.dv)

    def merge_gsv(self, v) -> None:
        gsv = self.gsv
        if vleq(v, gsv):
            return
        self.gsv = gsv = vmax(gsv, v)
        self._release()

    def _release(self) -> None:
        gsv = self.gsv
        now = self.sim.now
        for sr in range(self.m):
            q = self._invisible[sr]
            if not q or q[0].ut > gsv[sr]:
                continue
            keep = deque()
            while q and q[0].ut <= gsv[sr]:
                d = q.popleft()
                if vleq(d.dv, gsv):
                    self.recorder.version_visible(d.vid, sr, self.dc, now)
                else:
                    keep.append(d)
            keep.extend(q)
            self._invisible[sr] = keep

    def on_gsv(self, gsv) -> None:
        self.merge_gsv(gsv)

    def remote_arrived(self, d: ItemVersion) -> None:
        if vleq(d.dv, self.gsv):
            self.recorder.version_visible(d.vid, d.sr, self.dc, self.sim.now)
        else:
            self._invisible[d.sr].append(d)

    def visible_version(self, key: int):
        chain = self.store.chain(key)
        if chain is None:
            return None
        m, gsv = self.dc, self.gsv
        for d in reversed(chain.versions):
            if d.sr == m or vleq(d.dv, gsv):
                return d
        return None

    def serve_get(self, msg, respond):
        rid, key, ss_c = msg[1], msg[2], msg[3]
        self.merge_gsv(ss_c)
        d = self.visible_version(key)
        respond((wire.GET_REPLY, rid, d, self.gsv), wire.request_bytes(wire.GET_REPLY, self.m))

    def serve_put(self, msg, respond):
        rid, key, value, dv_c = msg[1], msg[2], msg[3], msg[4]
        self.merge_gsv(with_entry(dv_c, self.dc, ZERO))
        self.stamp_when_clear(max(dv_c), self.finish_put, self.sim.now, key, value, dv_c, rid,
                              respond)

    def serve_ro_tx(self, msg, respond):
        rid, keys, ss_c, dt_c = msg[1], msg[2], msg[3], msg[4]
        m = self.dc
        self.merge_gsv(ss_c)
        local = max(HybridTimestamp(self.clock(), 0), dt_c)
        ts = with_entry(self.gsv, m, local)
        self.start_tx(rid, keys, ts, self.gsv, respond, 0)

    def handle_slice(self, keys, ts, done, arrived=None) -> None:
        m = self.dc
        now = self.sim.now
        if arrived is None:
            arrived = now
        if self.clock() < ts[m].p:
            at = self.sim.time_when(self.id, ts[m].p)
            self.sim.schedule_at(at, self.handle_slice, keys, ts, done, arrived)
            return
        # later local versions must land above the snapshot
        if ts[m] > self.floor:
            self.floor = ts[m]
        self.merge_gsv(with_entry(ts, m, ZERO))
        out = []
        chains = self.store.chains
        for k in keys:
            chain = chains.get(k)
            found = None
            if chain is not None:
                for d in reversed(chain.versions):
                    if vleq(d.dv, ts):
                        found = d
                        break
            out.append(found)
        done(out, now - arrived)


class CureDataCenter(DataCenter):
    pass

