"""Raw measurements gathered while a simulation runs."""

from __future__ import annotations

from collections import defaultdict


class Recorder:
    def __init__(self, trace=None):
        self.trace = trace
        self.created: dict[tuple, int] = {}
        self.visibility: dict[tuple, list] = defaultdict(list)
        self.latency: dict[str, list] = defaultdict(list)
        self.put_waits: list[int] = []
        # (partitions contacted, wait in us)
        self.tx_waits: list[tuple] = []
        self.hlc_overflows = 0
        self.gc_removed = 0
        self.gc_rounds = 0
        self.completed_ops = 0

    def version_created(self, vid: tuple, dc: int, partition: int, t: int, writer=None) -> None:
        self.created[vid] = t
        if self.trace is not None:
            self.trace.add_version(t, dc, partition, vid, writer)

    def version_visible(self, vid: tuple, origin: int, dest: int, t: int) -> None:
        created = self.created.get(vid)
        if created is not None:
            self.visibility[(origin, dest)].append(t - created)
        if self.trace is not None:
            self.trace.add_visibility(t, dest, vid)

    def op_done(self, kind: str, latency: int) -> None:
        self.latency[kind].append(latency)
        self.completed_ops += 1
