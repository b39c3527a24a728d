"""Deterministic discrete-event network simulation.

Time is an integer number of microseconds. Events firing at the same
instant run in insertion order, so a run is a pure function of its
configuration and seed. Links are lossless and FIFO; a link touching a
partitioned data center holds its messages until the partition heals
(forever if it never does).
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Optional

INF = math.inf
DEFAULT_EPOCH_US = 1_000_000


class ProtocolViolation(RuntimeError):
    """A node observed something the protocol rules out (e.g. broken FIFO)."""

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context

    def __str__(self) -> str:
        base = super().__str__()
        if not self.context:
            return base
        extra = ", ".join(f"{k}={v!r}" for k, v in self.context.items() if k != "trace")
        return f"{base} [{extra}]"


@dataclass
class Topology:
    m: int = 3
    n: int = 4
    # one-way latency between data centers, symmetric, microseconds
    inter_dc_us: list = field(default_factory=lambda: [
        [0, 35_000, 70_000],
        [35_000, 0, 40_000],
        [70_000, 40_000, 0],
    ])
    intra_dc_us: int = 250
    client_us: int = 50
    jitter_us: int = 0

    def validate(self) -> list[str]:
        errs = []
        if self.m < 1:
            errs.append("topology.m: need at least one data center")
        if self.n < 1:
            errs.append("topology.n: need at least one partition")
        lat = self.inter_dc_us
        if len(lat) != self.m or any(len(row) != self.m for row in lat):
            errs.append(f"topology.inter_dc_us: expected a {self.m}x{self.m} matrix")
        else:
            for i in range(self.m):
                for j in range(self.m):
                    if lat[i][j] < 0:
                        errs.append(f"topology.inter_dc_us[{i}][{j}]: negative latency")
                    if lat[i][j] != lat[j][i]:
                        errs.append(f"topology.inter_dc_us[{i}][{j}]: matrix is not symmetric")
        for name in ("intra_dc_us", "client_us", "jitter_us"):
            if getattr(self, name) < 0:
                errs.append(f"topology.{name}: negative value")
        return errs

    def max_one_way_us(self) -> int:
        return max(max(row) for row in self.inter_dc_us)


@dataclass
class SimClock:
    """Physical clock of one node: ``epoch + now * drift + offset``."""

    offset: int = 0
    drift: float = 1.0
    epoch: int = DEFAULT_EPOCH_US

    def read(self, now: int) -> int:
        if self.drift == 1.0:
            return self.epoch + now + self.offset
        return self.epoch + int(now * self.drift) + self.offset

    def time_when(self, value: int) -> float:
        """Earliest global time at which the reading is >= value."""
        base = value - self.epoch - self.offset
        if self.drift == 1.0:
            return base
        if self.drift <= 0:
            return INF
        t = max(0, math.ceil(base / self.drift))
        while self.read(t) < value:
            t += 1
        while t > 0 and self.read(t - 1) >= value:
            t -= 1
        return t


class Node:
    """Anything that can receive messages. Subclasses set ``dc`` and implement
    :meth:`receive`."""

    is_client = False

    def __init__(self, sim: "Simulator", dc: int, name: str):
        self.sim = sim
        self.dc = dc
        self.name = name
        self.id = sim.add_node(self)

    def receive(self, src: int, msg: tuple) -> None:  # pragma: no cover - abstract
        raise NotImplementedError

    def clock(self) -> int:
        return self.sim.clock(self.id)


class EventLog:
    """Append-only list of tuples; serialized as one JSON array per line."""

    LEVELS = ("off", "ops", "full")

    def __init__(self, level: str = "ops"):
        if level not in self.LEVELS:
            raise ValueError(f"log level must be one of {self.LEVELS}")
        self.level = level
        self.records: list[tuple] = []

    @property
    def enabled(self) -> bool:
        return self.level != "off"

    @property
    def full(self) -> bool:
        return self.level == "full"

    def append(self, record: tuple) -> None:
        if self.level != "off":
            self.records.append(record)

    def lines(self):
        for r in self.records:
            yield json.dumps(r, separators=(",", ":"))

    def dumps(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def write(self, path) -> None:
        with open(path, "w") as fh:
            for line in self.lines():
                fh.write(line)
                fh.write("\n")


class Simulator:
    def __init__(self, topology: Optional[Topology] = None, seed: int = 0,
                 epoch_us: int = DEFAULT_EPOCH_US, log_level: str = "ops"):
        self.topology = topology or Topology()
        self.seed = seed
        self.epoch = epoch_us
        self.rng = random.Random(seed)
        self.now = 0
        self.nodes: list[Node] = []
        self.clocks: list[SimClock] = []
        self.log = EventLog(log_level)
        self.msg_count: dict[str, int] = defaultdict(int)
        self.msg_bytes: dict[str, int] = defaultdict(int)
        self.held: list[tuple] = []
        self._queue: list = []
        self._seq = itertools.count()
        self._mid = itertools.count()
        self._last_arrival: dict[tuple, float] = {}
        self._outages: list[tuple] = []
        self._started = False

    # -- topology -----------------------------------------------------------

    def add_node(self, node: Node) -> int:
        self.nodes.append(node)
        self.clocks.append(SimClock(epoch=self.epoch))
        return len(self.nodes) - 1

    def set_skew(self, node_id: int, offset_us: int) -> None:
        if self._started:
            raise RuntimeError("clock skew must be set before the run starts")
        if self.epoch + offset_us < 0:
            raise ValueError(f"offset {offset_us} would make clock readings negative")
        self.clocks[node_id].offset = offset_us

    def set_drift(self, node_id: int, drift: float) -> None:
        if self._started:
            raise RuntimeError("clock drift must be set before the run starts")
        if drift < 0:
            raise ValueError("drift must be non-negative")
        self.clocks[node_id].drift = drift

    def partition_dc(self, dc: int, at: int, heal_at: float = INF) -> None:
        """Cut every inter-DC link touching ``dc`` during ``[at, heal_at)``.

        Messages that would arrive inside the window are held and delivered
        in order at ``heal_at``.
        """
        if not at < heal_at:
            raise ValueError("partition must start before it heals")
        self._outages.append((dc, at, heal_at))
        self.log.append(("partition", at, dc, None if heal_at == INF else heal_at))

    def clock(self, node_id: int) -> int:
        return self.clocks[node_id].read(self.now)

    def time_when(self, node_id: int, value: int) -> float:
        """Global time at which ``node_id``'s clock reads at least ``value``
        (never earlier than now)."""
        return max(self.now, self.clocks[node_id].time_when(value))

    # -- scheduling ---------------------------------------------------------

    def schedule_at(self, t: float, fn: Callable, *args) -> None:
        if t < self.now:
            raise ValueError(f"cannot schedule in the past ({t} < {self.now})")
        heapq.heappush(self._queue, (t, next(self._seq), fn, args))

    def schedule(self, delay: float, fn: Callable, *args) -> None:
        self.schedule_at(self.now + delay, fn, *args)

    def every(self, period: int, fn: Callable, start: int = 0) -> None:
        """Call ``fn()`` at ``start`` and then every ``period``."""
        if period <= 0:
            raise ValueError("period must be positive")

        def tick():
            fn()
            heapq.heappush(self._queue, (self.now + period, next(self._seq), tick, ()))

        self.schedule_at(start, tick)

    # -- messaging ----------------------------------------------------------

    def latency(self, src: Node, dst: Node) -> int:
        topo = self.topology
        if src.dc != dst.dc:
            lat = topo.inter_dc_us[src.dc][dst.dc]
        elif src.is_client or dst.is_client:
            lat = topo.client_us
        else:
            lat = topo.intra_dc_us
        if topo.jitter_us:
            lat += self.rng.randrange(topo.jitter_us + 1)
        return lat

    def _apply_outages(self, a: int, b: int, t: float) -> float:
        moved = True
        while moved and t != INF:
            moved = False
            for dc, at, heal in self._outages:
                if (dc == a or dc == b) and at <= t < heal:
                    t = heal
                    moved = True
        return t

    def send(self, src: int, dst: int, msg: tuple, nbytes: int) -> None:
        kind = msg[0]
        self.msg_count[kind] += 1
        self.msg_bytes[kind] += nbytes
        s = self.nodes[src]
        d = self.nodes[dst]
        t = self.now + self.latency(s, d)
        if self._outages and s.dc != d.dc:
            t = self._apply_outages(s.dc, d.dc, t)
        link = (src, dst)
        last = self._last_arrival.get(link, 0)
        if t < last:
            t = last
        self._last_arrival[link] = t
        log = self.log
        if log.level == "full":
            mid = next(self._mid)
            log.records.append(("send", self.now, mid, src, dst, kind, None if t == INF else t))
            if t == INF:
                self.held.append((src, dst, msg))
                return
            heapq.heappush(self._queue, (t, next(self._seq), self._deliver_logged, (mid, src, dst, msg)))
            return
        if t == INF:
            self.held.append((src, dst, msg))
            return
        heapq.heappush(self._queue, (t, next(self._seq), d.receive, (src, msg)))

    def charge(self, kind: str, count: int, nbytes_each: int) -> None:
        """Account for messages that are modeled as a cost rather than sent."""
        self.msg_count[kind] += count
        self.msg_bytes[kind] += count * nbytes_each

    def _deliver_logged(self, mid, src, dst, msg):
        self.log.records.append(("recv", self.now, mid, src, dst, msg[0]))
        self.nodes[dst].receive(src, msg)

    # -- running ------------------------------------------------------------

    def run(self, until: float) -> None:
        """Process events up to and including time ``until``."""
        self._started = True
        q = self._queue
        pop = heapq.heappop
        while q and q[0][0] <= until:
            t, _, fn, args = pop(q)
            self.now = t
            fn(*args)
        if until != INF and until > self.now:
            self.now = until

    def pending(self) -> int:
        return len(self._queue)
