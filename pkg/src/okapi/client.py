"""Closed-loop client sessions.

A session is pinned to one home server and keeps at most one operation
outstanding. Each finished operation is appended to the history trace (when
one is kept) and its latency to the recorder.
"""

from __future__ import annotations

from . import wire
from .hlc import ZERO, encode_vector, vmax, with_entry, zero_vector
from .harness.trace import OpRecord
from .simnet import Node

GET = "get"
PUT = "put"
ROTX = "rotx"


class ClientBase(Node):
    is_client = True

    def __init__(self, sim, dc: int, session: int, home: int, workload, recorder,
                 trace=None, think_us: int = 0, stop_at: float = 0):
        super().__init__(sim, dc, f"c{session}@dc{dc}")
        self.session = session
        self.home = home
        self.workload = workload
        self.recorder = recorder
        self.trace = trace
        self.think_us = think_us
        self.stop_at = stop_at
        self.m = sim.topology.m
        self.index = -1
        self.outstanding = None
        self._op = None
        self._started_at = 0
        self._keys = ()

    def start(self, at: int) -> None:
        self.sim.schedule_at(at, self.next_op)

    def send(self, msg: tuple, nbytes: int) -> None:
        self.sim.send(self.id, self.home, msg, nbytes)

    def next_op(self) -> None:
        if self.sim.now >= self.stop_at:
            return
        kind, keys = self.workload.next_op()
        self.issue(kind, keys)

    def issue(self, kind: str, keys) -> None:
        """Send one operation; ``keys`` is a tuple (one key for get and put)."""
        if self.outstanding is not None:
            raise RuntimeError(f"{self.name} already has an operation outstanding")
        self.index += 1
        rid = (self.session, self.index)
        self.outstanding = kind
        self._started_at = self.sim.now
        self._keys = keys
        if self.trace is not None:
            self._op = OpRecord(self.session, self.index, self.dc, kind, tuple(keys),
                                sent=self.state_words(), start=self.sim.now)
        if kind == GET:
            self.send_get(rid, keys[0])
        elif kind == PUT:
            self.send_put(rid, keys[0], (self.session << 24) | self.index)
        elif kind == ROTX:
            self.send_ro_tx(rid, tuple(keys))
        else:
            raise ValueError(f"unknown operation kind {kind!r}")

    def complete(self, results: list) -> None:
        now = self.sim.now
        kind = self.outstanding
        self.outstanding = None
        self.recorder.op_done(kind, now - self._started_at)
        if self._op is not None:
            self._op.end = now
            self._op.results = results
            self.trace.add_op(self._op)
            self._op = None
        if self.think_us:
            self.sim.schedule(self.think_us, self.next_op)
        else:
            self.next_op()

    def receive(self, src: int, msg: tuple) -> None:
        kind = msg[0]
        if kind == wire.GET_REPLY:
            d = msg[2]
            self.absorb_stable(msg[3])
            if d is not None:
                self.absorb_read(d)
            self.complete([None if d is None else d.vid])
        elif kind == wire.PUT_REPLY:
            ut = msg[2]
            self.absorb_write(ut)
            self.complete([(self._keys[0], ut.encode(), self.dc)])
        elif kind == wire.TX_RESP:
            self.absorb_stable(msg[3])
            out = []
            for d in msg[2]:
                if d is None:
                    out.append(None)
                else:
                    self.absorb_read(d)
                    out.append(d.vid)
            self.complete(out)
        else:
            raise ValueError(f"{self.name}: unexpected message {kind}")

    # -- protocol specific --------------------------------------------------

    def state_words(self) -> tuple:  # pragma: no cover
        raise NotImplementedError

    def absorb_stable(self, stable) -> None:  # pragma: no cover
        raise NotImplementedError

    def absorb_read(self, d) -> None:  # pragma: no cover
        raise NotImplementedError

    def absorb_write(self, ut) -> None:  # pragma: no cover
        raise NotImplementedError


class OkapiClient(ClientBase):
    """Tracks the freshest stable vector it was served from (``usv_c``) and
    its highest local dependency (``dt_c``). Also used for the vector
    baseline, whose client state has the same shape."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.usv_c = zero_vector(self.m)
        self.dt_c = ZERO

    def state_words(self) -> tuple:
        return tuple(encode_vector(self.usv_c)) + (self.dt_c.encode(),)

    def send_get(self, rid, key):
        self.send((wire.GET_REQ, rid, key, self.usv_c), wire.request_bytes(wire.GET_REQ, self.m))

    def send_put(self, rid, key, value):
        m = self.dc
        dv = with_entry(self.usv_c, m, max(self.dt_c, self.usv_c[m]))
        self.send((wire.PUT_REQ, rid, key, value, dv), wire.request_bytes(wire.PUT_REQ, self.m))

    def send_ro_tx(self, rid, keys):
        self.send((wire.TX_REQ, rid, keys, self.usv_c, self.dt_c),
                  wire.request_bytes(wire.TX_REQ, self.m, nkeys=len(keys)))

    def absorb_stable(self, usv) -> None:
        self.usv_c = vmax(self.usv_c, usv)

    def absorb_read(self, d) -> None:
        if d.sr == self.dc and d.ut > self.dt_c:
            self.dt_c = d.ut

    def absorb_write(self, ut) -> None:
        self.dt_c = ut


CureClient = OkapiClient


class GentleRainClient(ClientBase):
    """Scalar state: highest timestamp read or written (``dt_c``) and the
    freshest global stable time seen (``gst_c``)."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.dt_c = ZERO
        self.gst_c = ZERO

    def state_words(self) -> tuple:
        return (self.gst_c.encode(), self.dt_c.encode())

    def send_get(self, rid, key):
        self.send((wire.GET_REQ, rid, key, self.gst_c), wire.request_bytes(wire.GET_REQ, 1))

    def send_put(self, rid, key, value):
        self.send((wire.PUT_REQ, rid, key, value, self.dt_c, self.gst_c),
                  wire.request_bytes(wire.PUT_REQ, 1) + wire.TS_BYTES)

    def send_ro_tx(self, rid, keys):
        self.send((wire.TX_REQ, rid, keys, self.gst_c, self.dt_c),
                  wire.request_bytes(wire.TX_REQ, 1, nkeys=len(keys)))

    def absorb_stable(self, gst) -> None:
        if gst > self.gst_c:
            self.gst_c = gst

    def absorb_read(self, d) -> None:
        if d.ut > self.dt_c:
            self.dt_c = d.ut

    def absorb_write(self, ut) -> None:
        self.dt_c = ut
