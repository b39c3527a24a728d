"""Offline causal-consistency checker.

Happens-before between operations is the transitive closure of session
order and read-from (the write that produced a version precedes every
operation that read it). Version ``X`` causally precedes ``Y`` when the
write of ``X`` happens before the write of ``Y``. Three families of checks:

timestamp-order
    ``X`` before ``Y`` implies ``(X.ut, X.sr) < (Y.ut, Y.sr)``.
stale-read
    A read of key ``x`` (GET, or one element of a transaction) must not
    return a version that causally precedes another ``x`` version already in
    the reader's causal past, nor the initial value when such a version
    exists.
snapshot
    For two versions ``X`` (key ``x``) and ``Y`` returned by one transaction,
    no ``x`` version ``X'`` may satisfy ``X -> X' -> Y``.

Every violation carries a causal path of operations explaining it.
"""

from __future__ import annotations

from bisect import bisect_right
from collections import defaultdict, deque
from dataclasses import dataclass, field


class IncompleteTrace(ValueError):
    pass


@dataclass
class Violation:
    kind: str
    op: tuple
    detail: str
    path: list = field(default_factory=list)

    def __str__(self) -> str:
        path = " -> ".join(f"{s}:{i}" for s, i in self.path)
        return f"[{self.kind}] op {self.op[0]}:{self.op[1]}: {self.detail}" + (f" (path {path})" if path else "")


class _History:
    def __init__(self, trace):
        ops = sorted(trace.ops, key=lambda o: (o.session, o.index))
        self.ops = ops
        self.pos = {(o.session, o.index): i for i, o in enumerate(ops)}
        sessions = sorted({o.session for o in ops})
        self.slot = {s: k for k, s in enumerate(sessions)}
        # version id -> op position of its write
        self.writer: dict[tuple, int] = {}
        for i, o in enumerate(ops):
            if o.kind == "put" and o.results:
                self.writer[tuple(o.results[0])] = i
        for _, _, _, vid, w in getattr(trace, "versions", ()):
            if w is not None and tuple(w) in self.pos:
                self.writer.setdefault(tuple(vid), self.pos[tuple(w)])
        self.preds: list[list] = []
        for i, o in enumerate(ops):
            ps = []
            if i > 0 and ops[i - 1].session == o.session:
                ps.append(i - 1)
            if o.kind != "put":
                for vid in o.results or ():
                    if vid is not None:
                        w = self.writer.get(tuple(vid))
                        if w is not None and w != i:
                            ps.append(w)
            self.preds.append(ps)

    def topo_order(self):
        """Kahn order over the dependency graph; returns (order, cyclic ops)."""
        n = len(self.ops)
        indeg = [len(ps) for ps in self.preds]
        succ = [[] for _ in range(n)]
        for i, ps in enumerate(self.preds):
            for p in ps:
                succ[p].append(i)
        ready = deque(i for i in range(n) if indeg[i] == 0)
        order = []
        while ready:
            i = ready.popleft()
            order.append(i)
            for j in succ[i]:
                indeg[j] -= 1
                if indeg[j] == 0:
                    ready.append(j)
        stuck = [i for i in range(n) if indeg[i] > 0]
        return order, stuck

    def path(self, src: int, dst: int) -> list:
        """Operations on one happens-before path from ``src`` to ``dst``."""
        prev = {dst: None}
        q = deque([dst])
        while q:
            i = q.popleft()
            if i == src:
                break
            for p in self.preds[i]:
                if p not in prev:
                    prev[p] = i
                    q.append(p)
        if src not in prev:
            return []
        out = []
        i = src
        while i is not None:
            o = self.ops[i]
            out.append((o.session, o.index))
            i = prev[i]
        return out

    def key(self, i: int) -> tuple:
        o = self.ops[i]
        return (o.session, o.index)


def _order(vid) -> tuple:
    return (vid[1], vid[2])


def check_history(trace, require_complete: bool = True) -> list[Violation]:
    if require_complete and not trace.complete:
        raise IncompleteTrace(
            "trace is not complete (run unfinished or operations outstanding); "
            "refusing to check a partial history")
    h = _History(trace)
    ops = h.ops
    if not ops:
        return []
    violations: list[Violation] = []

    order, stuck = h.topo_order()
    if stuck:
        for i in stuck[:10]:
            violations.append(Violation("cycle", h.key(i), "operation lies on a happens-before cycle"))
        return violations

    # vector clocks over sessions: vc[i][slot(s)] = highest index of session s
    # that happens before or at op i
    nslots = len(h.slot)
    vc: list = [None] * len(ops)
    # highest version (by (ut, sr)) written strictly in the causal past
    past_max: list = [None] * len(ops)
    for i in order:
        o = ops[i]
        ps = h.preds[i]
        if ps:
            v = list(vc[ps[0]])
            for p in ps[1:]:
                vp = vc[p]
                v = [a if a >= b else b for a, b in zip(v, vp)]
        else:
            v = [-1] * nslots
        v[h.slot[o.session]] = o.index
        vc[i] = v
        best = None
        for p in ps:
            cand = past_max[p]
            if ops[p].kind == "put" and ops[p].results:
                w = _order(ops[p].results[0])
                cand = w if cand is None or w > cand else cand
            if cand is not None and (best is None or cand > best):
                best = cand
        past_max[i] = best

    def hb(a: int, b: int) -> bool:
        """Op a happens before or equals op b."""
        oa = ops[a]
        return vc[b][h.slot[oa.session]] >= oa.index

    # x-writes per (key, session): sorted indices and op positions
    writes_by = defaultdict(lambda: defaultdict(list))
    for i, o in enumerate(ops):
        if o.kind == "put" and o.results:
            writes_by[o.keys[0]][o.session].append((o.index, i))
    idx_lists = {k: {s: [ix for ix, _ in lst] for s, lst in d.items()} for k, d in writes_by.items()}

    def latest_writes(key, i: int, strict: bool):
        """Per session, the latest write of ``key`` in the causal past of op i."""
        out = []
        v = vc[i]
        me = ops[i]
        for s, ixs in idx_lists.get(key, {}).items():
            bound = v[h.slot[s]]
            if strict and s == me.session:
                bound = me.index - 1
            j = bisect_right(ixs, bound) - 1
            if j >= 0:
                out.append(writes_by[key][s][j][1])
        return out

    # (1) timestamp order
    for i, o in enumerate(ops):
        if o.kind != "put" or not o.results:
            continue
        mine = _order(o.results[0])
        if past_max[i] is not None and past_max[i] >= mine:
            culprit = None
            for j in range(len(ops)):
                oj = ops[j]
                if j != i and oj.kind == "put" and oj.results and _order(oj.results[0]) >= mine and hb(j, i):
                    culprit = j
                    break
            violations.append(Violation(
                "timestamp-order", h.key(i),
                f"write {tuple(o.results[0])} is not above causally earlier write "
                f"{None if culprit is None else tuple(ops[culprit].results[0])}",
                h.path(culprit, i) if culprit is not None else []))

    def stale_check(i: int, key, got, past_of: int, strict: bool, kind: str, what: str):
        for w in latest_writes(key, past_of, strict):
            x = tuple(ops[w].results[0])
            if got is None:
                violations.append(Violation(
                    kind, h.key(i), f"{what} returned the initial value of key {key} "
                    f"although {x} is in its causal past", h.path(w, past_of)))
                return
            gw = h.writer.get(got)
            if gw is None or gw == w:
                continue
            if hb(gw, w):
                violations.append(Violation(
                    kind, h.key(i), f"{what} returned {got} which causally precedes {x}",
                    h.path(gw, w) + h.path(w, past_of)[1:]))
                return

    for i, o in enumerate(ops):
        if o.kind == "put" or not o.results:
            continue
        res = [None if r is None else tuple(r) for r in o.results]
        for key, got in zip(o.keys, res):
            if got is not None and got not in h.writer:
                violations.append(Violation("phantom", h.key(i), f"read {got} that no write produced"))
                continue
            # (2) nothing stale with respect to the reader's own past
            stale_check(i, key, got, i, False, "stale-read", "read")
        if o.kind != "rotx" or len(res) < 2:
            continue
        # (3) snapshot: for each returned Y, x-versions in Y's past
        for ky, y in zip(o.keys, res):
            if y is None or y not in h.writer:
                continue
            wy = h.writer[y]
            for kx, x in zip(o.keys, res):
                if kx == ky:
                    continue
                if x is not None and x not in h.writer:
                    continue
                stale_check(i, kx, x, wy, True, "snapshot", f"transaction element for key {kx}")
    return violations
