"""History traces: client operation logs plus server-side version records.

A trace is written as line-delimited JSON. Every line is an object with a
``type`` field:

``meta``
    run description (protocol, m, n, seed, complete, partitions, ...)
``op``
    one client operation: ``session``, ``index``, ``dc``, ``kind`` (get, put
    or rotx), ``keys``, ``results`` (one version id or null per key; for a
    put the version written), ``sent`` (dependency state sent with the
    request, timestamps encoded as 64-bit words), ``start``, ``end``
``version``
    creation of a version at its origin: ``t``, ``dc``, ``partition``,
    ``vid``, ``writer`` ([session, index])
``visible``
    a remote version became visible at a data center: ``t``, ``dc``, ``vid``

A version id ``vid`` is ``[key, ut, sr]`` with ``ut`` the encoded timestamp.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional


@dataclass(slots=True)
class OpRecord:
    session: int
    index: int
    dc: int
    kind: str
    keys: tuple
    sent: tuple = ()
    start: int = 0
    end: Optional[int] = None
    results: Optional[list] = None

    def to_json(self) -> dict:
        return {
            "type": "op",
            "session": self.session,
            "index": self.index,
            "dc": self.dc,
            "kind": self.kind,
            "keys": list(self.keys),
            "results": None if self.results is None
            else [None if r is None else list(r) for r in self.results],
            "sent": list(self.sent),
            "start": self.start,
            "end": self.end,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "OpRecord":
        results = rec.get("results")
        if results is not None:
            results = [None if r is None else tuple(r) for r in results]
        return cls(
            session=rec["session"],
            index=rec["index"],
            dc=rec.get("dc", 0),
            kind=rec["kind"],
            keys=tuple(rec["keys"]),
            sent=tuple(rec.get("sent", ())),
            start=rec.get("start", 0),
            end=rec.get("end"),
            results=results,
        )


@dataclass
class HistoryTrace:
    meta: dict = field(default_factory=dict)
    ops: list = field(default_factory=list)
    versions: list = field(default_factory=list)
    visibility: list = field(default_factory=list)

    def add_op(self, op: OpRecord) -> None:
        self.ops.append(op)

    def add_version(self, t, dc, partition, vid, writer=None) -> None:
        self.versions.append((t, dc, partition, vid, writer))

    def add_visibility(self, t, dc, vid) -> None:
        self.visibility.append((t, dc, vid))

    @property
    def complete(self) -> bool:
        return bool(self.meta.get("complete", False))

    def records(self):
        yield {"type": "meta", **self.meta}
        for op in self.ops:
            yield op.to_json()
        for t, dc, partition, vid, writer in self.versions:
            yield {"type": "version", "t": t, "dc": dc, "partition": partition,
                   "vid": list(vid), "writer": None if writer is None else list(writer)}
        for t, dc, vid in self.visibility:
            yield {"type": "visible", "t": t, "dc": dc, "vid": list(vid)}

    def dumps(self) -> str:
        return "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in self.records())

    def write(self, path) -> None:
        with open(path, "w") as fh:
            for r in self.records():
                fh.write(json.dumps(r, separators=(",", ":")))
                fh.write("\n")

    @classmethod
    def loads(cls, text: str) -> "HistoryTrace":
        return cls.from_lines(text.splitlines())

    @classmethod
    def read(cls, path) -> "HistoryTrace":
        with open(path) as fh:
            return cls.from_lines(fh)

    @classmethod
    def from_lines(cls, lines) -> "HistoryTrace":
        trace = cls()
        for lineno, line in enumerate(lines, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                kind = rec.pop("type")
            except (ValueError, KeyError) as exc:
                raise ValueError(f"trace line {lineno}: malformed record ({exc})") from None
            if kind == "meta":
                trace.meta.update(rec)
            elif kind == "op":
                trace.ops.append(OpRecord.from_json(rec))
            elif kind == "version":
                w = rec.get("writer")
                trace.versions.append((rec["t"], rec["dc"], rec["partition"], tuple(rec["vid"]),
                                       None if w is None else tuple(w)))
            elif kind == "visible":
                trace.visibility.append((rec["t"], rec["dc"], tuple(rec["vid"])))
            else:
                raise ValueError(f"trace line {lineno}: unknown record type {kind!r}")
        return trace
