"""Partition replicas: shared plumbing plus the HLC/UST server.

A server owns the keys ``k`` with ``k % N == partition``. Clients talk to
their home server only; GET and PUT requests for keys owned elsewhere are
forwarded inside the data center and the reply is relayed back.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

from . import wire
from .hlc import (
    STRICT,
    ZERO,
    HLCOverflow,
    HybridTimestamp,
    update_on_heartbeat,
    update_on_put,
    update_on_tx,
    vleq,
    vmax,
    vmin,
    with_entry,
    zero_vector,
)
from .recorder import Recorder
from .simnet import INF, Node, ProtocolViolation, Simulator
from .store import ItemVersion, Store


@dataclass
class ServerParams:
    heartbeat_us: int = 1_000
    gsv_us: int = 5_000
    usv_us: int = 5_000
    gc_us: int = 100_000
    hlc_mode: str = STRICT
    gc_enabled: bool = True
    # forward another DC's stable vector to the remaining peers once the
    # direct feed from that DC has been silent this long
    relay_after_us: int = 100_000

    def validate(self) -> list[str]:
        errs = []
        for name in ("heartbeat_us", "gsv_us", "usv_us", "gc_us", "relay_after_us"):
            if getattr(self, name) <= 0:
                errs.append(f"protocol.{name}: must be positive")
        if self.hlc_mode not in ("strict", "literal"):
            errs.append("protocol.hlc_mode: must be 'strict' or 'literal'")
        return errs


Respond = Callable[[tuple, int], None]


class ServerBase(Node):
    """Routing, forwarding, heartbeats and replication bookkeeping."""

    protocol = "base"

    def __init__(self, sim: Simulator, dc: int, partition: int, params: ServerParams,
                 recorder: Recorder):
        super().__init__(sim, dc, f"p{partition}@dc{dc}")
        topo = sim.topology
        self.m = topo.m
        self.n = topo.n
        self.partition = partition
        self.params = params
        self.recorder = recorder
        self.store = Store()
        self.vv = zero_vector(self.m)
        self.last_out_msg = -INF
        # filled in by the cluster builder
        self.replicas: dict[int, int] = {}
        self.dc_servers: list[int] = []
        self.datacenter = None
        self._pending_fwd: dict[int, tuple] = {}
        self._fwd_ids = itertools.count()
        self._handlers = {
            wire.GET_REQ: self.on_GETReq,
            wire.PUT_REQ: self.on_PUTReq,
            wire.TX_REQ: self.on_RO_TXReq,
            wire.SLICE_REQ: self.on_SliceREQ,
            wire.SLICE_RESP: self.on_SliceRESP,
            wire.REPLICATE: self.on_Replicate,
            wire.HEARTBEAT: self.on_Heartbeat,
            wire.USV_EXCHANGE: self.on_USVExchange,
            wire.GSV_RELAY: self.on_GSVRelay,
            wire.FORWARD: self.on_Forward,
            wire.FORWARD_REPLY: self.on_ForwardReply,
        }

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"

    # -- plumbing -----------------------------------------------------------

    def receive(self, src: int, msg: tuple) -> None:
        self._handlers[msg[0]](src, msg)

    def send(self, dst: int, msg: tuple, nbytes: int) -> None:
        self.sim.send(self.id, dst, msg, nbytes)

    def owner(self, key: int) -> int:
        return key % self.n

    def peer_ids(self):
        return [nid for dc, nid in sorted(self.replicas.items()) if dc != self.dc]

    def start(self) -> None:
        """Install periodic timers with a seeded phase."""
        hb = self.params.heartbeat_us
        self.sim.every(hb, self.heartbeat_tick, start=self.sim.rng.randrange(hb))

    def violation(self, message: str, **context):
        raise ProtocolViolation(f"{self.name}: {message}", server=self.name,
                                time=self.sim.now, **context)

    # -- client requests and forwarding --------------------------------------

    def _reply_to(self, dst: int) -> Respond:
        return lambda msg, nbytes: self.send(dst, msg, nbytes)

    def on_GETReq(self, src, msg):
        if self.owner(msg[2]) != self.partition:
            self._forward(src, msg, wire.request_bytes(wire.GET_REQ, self.m))
        else:
            self.serve_get(msg, self._reply_to(src))

    def on_PUTReq(self, src, msg):
        if self.owner(msg[2]) != self.partition:
            self._forward(src, msg, wire.request_bytes(wire.PUT_REQ, self.m))
        else:
            self.serve_put(msg, self._reply_to(src))

    def on_RO_TXReq(self, src, msg):
        self.serve_ro_tx(msg, self._reply_to(src))

    def _forward(self, client: int, msg: tuple, nbytes: int) -> None:
        fid = next(self._fwd_ids)
        self._pending_fwd[fid] = client
        self.send(self.dc_servers[self.owner(msg[2])], (wire.FORWARD, fid, msg), nbytes)

    def on_Forward(self, src, msg):
        fid, inner = msg[1], msg[2]

        def respond(reply, nbytes):
            self.send(src, (wire.FORWARD_REPLY, fid, reply), nbytes)

        if inner[0] == wire.GET_REQ:
            self.serve_get(inner, respond)
        else:
            self.serve_put(inner, respond)

    def on_ForwardReply(self, src, msg):
        client = self._pending_fwd.pop(msg[1])
        reply = msg[2]
        self.send(client, reply, wire.request_bytes(reply[0], self.m))

    # -- heartbeats and replication -----------------------------------------

    def heartbeat_tick(self) -> None:
        clock = self.clock()
        if clock >= self.last_out_msg + self.params.heartbeat_us:
            ts = self.advance_on_heartbeat(clock)
            msg = (wire.HEARTBEAT, ts, self.dc)
            nbytes = wire.heartbeat_bytes()
            for peer in self.peer_ids():
                self.send(peer, msg, nbytes)
            self.last_out_msg = clock

    def advance_on_heartbeat(self, clock: int) -> HybridTimestamp:
        vm = update_on_heartbeat(self.vv[self.dc], clock)
        self.vv = with_entry(self.vv, self.dc, vm)
        return vm

    def on_Heartbeat(self, src, msg):
        ts, sr = msg[1], msg[2]
        if ts < self.vv[sr]:
            self.violation("heartbeat moves a version vector entry backwards",
                           origin=sr, carried=ts, current=self.vv[sr])
        if ts != self.vv[sr]:
            self.vv = with_entry(self.vv, sr, ts)

    def replicate(self, d: ItemVersion, clock: int) -> None:
        msg = self.replicate_msg(d)
        nbytes = wire.replicate_bytes(self.protocol, self.m)
        for peer in self.peer_ids():
            self.send(peer, msg, nbytes)
        self.last_out_msg = clock

    def replicate_msg(self, d: ItemVersion) -> tuple:
        return (wire.REPLICATE, d.key, d.value, d.ut, d.sr)

    def on_Replicate(self, src, msg):
        key, value, ut, sr = msg[1], msg[2], msg[3], msg[4]
        if ut <= self.vv[sr]:
            self.violation("replicated update is not newer than the version vector entry",
                           origin=sr, key=key, ut=ut, current=self.vv[sr])
        d = ItemVersion(key, value, ut, sr, msg[5] if len(msg) > 5 else None)
        self.store.insert(d)
        self.vv = with_entry(self.vv, sr, ut)
        self.remote_arrived(d)

    def remote_arrived(self, d: ItemVersion) -> None:
        """Hook: a remote version has been stored."""

    # -- protocol hooks -------------------------------------------------------

    def visible_version(self, key: int) -> Optional[ItemVersion]:  # pragma: no cover
        """What a GET of ``key`` would return right now."""
        raise NotImplementedError

    def serve_get(self, msg: tuple, respond: Respond) -> None:  # pragma: no cover
        raise NotImplementedError

    def serve_put(self, msg: tuple, respond: Respond) -> None:  # pragma: no cover
        raise NotImplementedError

    def serve_ro_tx(self, msg: tuple, respond: Respond) -> None:  # pragma: no cover
        raise NotImplementedError

    def on_SliceREQ(self, src, msg):  # pragma: no cover
        raise NotImplementedError

    def on_SliceRESP(self, src, msg):  # pragma: no cover
        raise NotImplementedError

    def on_USVExchange(self, src, msg):
        self.violation("unexpected USV exchange")

    def on_GSVRelay(self, src, msg):
        self.violation("unexpected GSV relay")


class DataCenter:
    """Intra-DC aggregation. Rounds are computed atomically from the current
    state of every server; the fanout-2 tree that would carry them is only
    charged for in message accounting."""

    def __init__(self, sim: Simulator, dc: int, servers: list, params: ServerParams,
                 recorder: Recorder):
        self.sim = sim
        self.dc = dc
        self.servers = servers
        self.params = params
        self.recorder = recorder
        self.m = sim.topology.m
        # freshest stable-vector snapshot known from each other data center
        self.known_gsv: list[Optional[tuple]] = [None] * self.m

    def learn_gsv(self, origin: int, gsv: tuple) -> None:
        old = self.known_gsv[origin]
        # snapshots of one DC only ever grow, so the entrywise max is the newest
        self.known_gsv[origin] = gsv if old is None else vmax(old, gsv)

    def start(self) -> None:
        rng = self.sim.rng
        p = self.params
        self.sim.every(p.gsv_us, self.gsv_round, start=rng.randrange(p.gsv_us))

    def charge_round(self, kind: str, protocol: str) -> None:
        count = wire.tree_messages(len(self.servers))
        if count:
            self.sim.charge(kind, count, wire.exchange_bytes(protocol, self.m))

    def gsv_round(self) -> None:
        gsv = vmin(s.vv for s in self.servers)
        self.charge_round(wire.GSV_EXCHANGE, self.servers[0].protocol)
        for s in self.servers:
            s.on_gsv(gsv)


class OkapiDataCenter(DataCenter):
    def start(self) -> None:
        super().start()
        p = self.params
        self.sim.every(p.gc_us, self.gc_round, start=self.sim.rng.randrange(p.gc_us))

    def gc_round(self) -> None:
        gv = vmin(s.gc_snapshot() for s in self.servers)
        self.charge_round(wire.GC_EXCHANGE, "okapi")
        if not self.params.gc_enabled:
            return
        removed = 0
        for s in self.servers:
            removed += s.store.collect_garbage(gv, self.dc)
        self.recorder.gc_removed += removed
        self.recorder.gc_rounds += 1


class OkapiServer(ServerBase):
    protocol = "okapi"

    def __init__(self, sim, dc, partition, params, recorder):
        super().__init__(sim, dc, partition, params, recorder)
        self.gsv = zero_vector(self.m)
        self.usv = zero_vector(self.m)
        self.heard = [-INF] * self.m
        # remote versions not yet visible, per origin, in arrival (= ut) order
        self._invisible = [deque() for _ in range(self.m)]
        self._tx_ids = itertools.count()
        self._tx: dict[int, list] = {}
        self.active_tx: dict[int, tuple] = {}
        # optional observer with usv_changed(server) / returned(server, versions)
        self.observer = None

    def start(self) -> None:
        super().start()
        p = self.params
        self.heard = [self.clock()] * self.m
        self.sim.every(p.usv_us, self.usv_round, start=self.sim.rng.randrange(p.usv_us))

    # -- stable vectors -------------------------------------------------------

    def on_gsv(self, gsv: tuple) -> None:
        self.gsv = gsv

    def merge_usv(self, v) -> None:
        usv = self.usv
        if vleq(v, usv):
            return
        self.usv = usv = vmax(usv, v)
        now = self.sim.now
        for sr in range(self.m):
            q = self._invisible[sr]
            if q and q[0].ut <= usv[sr]:
                rec = self.recorder
                while q and q[0].ut <= usv[sr]:
                    d = q.popleft()
                    rec.version_visible(d.vid, sr, self.dc, now)
        if self.observer is not None:
            self.observer.usv_changed(self)

    def usv_round(self) -> None:
        dc = self.datacenter
        nbytes = wire.exchange_bytes(self.protocol, self.m)
        msg = (wire.USV_EXCHANGE, self.gsv, self.dc)
        for peer in self.peer_ids():
            self.send(peer, msg, nbytes)
        clock = self.clock()
        relay_after = self.params.relay_after_us
        for j in range(self.m):
            if j == self.dc or dc.known_gsv[j] is None:
                continue
            if clock - self.heard[j] > relay_after:
                relay = (wire.GSV_RELAY, dc.known_gsv[j], j)
                for i, peer in sorted(self.replicas.items()):
                    if i != self.dc and i != j:
                        self.send(peer, relay, wire.relay_bytes(self.m))
        vectors = [self.gsv]
        zero = None
        for j in range(self.m):
            if j == self.dc:
                continue
            g = dc.known_gsv[j]
            if g is None:
                zero = zero or zero_vector(self.m)
                g = zero
            vectors.append(g)
        self.merge_usv(vmin(vectors))

    def on_USVExchange(self, src, msg):
        gsv, sr = msg[1], msg[2]
        self.heard[sr] = self.clock()
        self.datacenter.learn_gsv(sr, gsv)

    def on_GSVRelay(self, src, msg):
        gsv, origin = msg[1], msg[2]
        if origin != self.dc:
            self.datacenter.learn_gsv(origin, gsv)

    def remote_arrived(self, d: ItemVersion) -> None:
        if d.ut <= self.usv[d.sr]:
            self.recorder.version_visible(d.vid, d.sr, self.dc, self.sim.now)
        else:
            self._invisible[d.sr].append(d)

    def gc_snapshot(self) -> tuple:
        if self.active_tx:
            return vmin(self.active_tx.values())
        return with_entry(self.usv, self.dc, self.vv[self.dc])

    # -- operations -------------------------------------------------------------

    def visible_version(self, key):
        return self.store.read_visible(key, self.usv, self.dc)

    def serve_get(self, msg, respond):
        rid, key, usv_c = msg[1], msg[2], msg[3]
        self.merge_usv(usv_c)
        d = self.store.read_visible(key, self.usv, self.dc)
        if self.observer is not None and d is not None:
            self.observer.returned(self, (d,))
        respond((wire.GET_REPLY, rid, d, self.usv), wire.request_bytes(wire.GET_REPLY, self.m))

    def serve_put(self, msg, respond, arrived=None):
        rid, key, value, dv_c = msg[1], msg[2], msg[3], msg[4]
        m = self.dc
        now = self.sim.now
        if arrived is None:
            arrived = now
        clock = self.clock()
        hd = max(dv_c)
        try:
            ut = update_on_put(self.vv[m], clock, dv_c[m], hd, self.params.hlc_mode)
        except HLCOverflow as exc:
            self.recorder.hlc_overflows += 1
            at = self.sim.time_when(self.id, exc.max_p + 1)
            self.sim.schedule_at(at, self.serve_put, msg, respond, arrived)
            return
        self.recorder.put_waits.append(now - arrived)
        self.vv = with_entry(self.vv, m, ut)
        d = ItemVersion(key, value, ut, m, with_entry(dv_c, m, ut))
        self.store.insert(d)
        self.recorder.version_created(d.vid, m, self.partition, now, rid)
        # the remote entries of DV_c come from some server's usv and are stable
        self.merge_usv(with_entry(dv_c, m, ZERO))
        respond((wire.PUT_REPLY, rid, ut), wire.request_bytes(wire.PUT_REPLY, self.m))
        self.replicate(d, clock)

    def serve_ro_tx(self, msg, respond):
        rid, keys, usv_c, dt_c = msg[1], msg[2], msg[3], msg[4]
        m = self.dc
        self.vv = with_entry(self.vv, m, update_on_tx(self.vv[m], self.clock(), dt_c))
        self.merge_usv(usv_c)
        lts = max(self.vv[m], dt_c)
        usv = self.usv
        groups: dict[int, list] = {}
        for k in keys:
            groups.setdefault(self.owner(k), []).append(k)
        if not groups:
            respond((wire.TX_RESP, rid, [], usv), wire.request_bytes(wire.TX_RESP, self.m))
            return
        txid = next(self._tx_ids)
        self.active_tx[txid] = with_entry(usv, m, lts)
        self._tx[txid] = [rid, keys, usv, respond, len(groups), {}]
        self.recorder.tx_waits.append((len(groups), 0))
        for part in sorted(groups):
            ks = groups[part]
            if part == self.partition:
                self._slice_done(txid, ks, self.handle_slice(ks, lts, usv))
            else:
                self.send(self.dc_servers[part], (wire.SLICE_REQ, txid, ks, lts, usv),
                          wire.request_bytes(wire.SLICE_REQ, self.m, nkeys=len(ks)))

    def handle_slice(self, keys, lts, usv_coord) -> list:
        m = self.dc
        self.vv = with_entry(self.vv, m, update_on_tx(self.vv[m], self.clock(), lts))
        self.merge_usv(usv_coord)
        ts = with_entry(usv_coord, m, lts)
        read = self.store.read_slice
        out = [read(k, ts, m) for k in keys]
        if self.observer is not None:
            self.observer.returned(self, [d for d in out if d is not None])
        return out

    def on_SliceREQ(self, src, msg):
        txid, keys, lts, usv = msg[1], msg[2], msg[3], msg[4]
        out = self.handle_slice(keys, lts, usv)
        nver = sum(d is not None for d in out)
        self.send(src, (wire.SLICE_RESP, txid, keys, out),
                  wire.request_bytes(wire.SLICE_RESP, self.m, nversions=nver))

    def on_SliceRESP(self, src, msg):
        self._slice_done(msg[1], msg[2], msg[3])

    def _slice_done(self, txid, keys, versions) -> None:
        state = self._tx[txid]
        got = state[5]
        for k, d in zip(keys, versions):
            got[k] = d
        state[4] -= 1
        if state[4]:
            return
        del self._tx[txid]
        del self.active_tx[txid]
        rid, keys_all, usv, respond = state[0], state[1], state[2], state[3]
        out = [got[k] for k in keys_all]
        nver = sum(d is not None for d in out)
        respond((wire.TX_RESP, rid, out, usv),
                wire.request_bytes(wire.TX_RESP, self.m, nversions=nver))
