"""Per-partition multiversion storage.

Each key owns a :class:`VersionChain` kept sorted by ``(ut, sr)``; that
pair is also the last-writer-wins order, so "freshest visible version" is
always the last visible element of the chain.
"""

from __future__ import annotations

from bisect import bisect_left, insort
from typing import NamedTuple, Optional

from .hlc import HybridTimestamp, vleq

KEY_BYTES = 8
VALUE_BYTES = 8


class ItemVersion(NamedTuple):
    key: int
    value: int
    ut: HybridTimestamp
    sr: int
    # dependency vector; None for versions received through replication
    dv: Optional[tuple] = None

    @property
    def order(self) -> tuple:
        return (self.ut, self.sr)

    @property
    def vid(self) -> tuple:
        """Globally unique version id: (key, encoded ut, sr)."""
        return (self.key, self.ut.encode(), self.sr)


def _order(d: ItemVersion) -> tuple:
    return (d.ut, d.sr)


class VersionChain:
    __slots__ = ("key", "versions")

    def __init__(self, key: int, versions=()):
        self.key = key
        self.versions: list[ItemVersion] = sorted(versions, key=_order)

    def __len__(self) -> int:
        return len(self.versions)

    def __iter__(self):
        return iter(self.versions)

    def __repr__(self) -> str:
        return f"VersionChain({self.key}, {[(d.ut, d.sr) for d in self.versions]})"

    def newest(self) -> Optional[ItemVersion]:
        return self.versions[-1] if self.versions else None

    def insert(self, d: ItemVersion) -> bool:
        """Insert ``d`` in order. Returns False (and leaves the chain as is)
        when a version with the same ``(ut, sr)`` is already present."""
        if d.key != self.key:
            raise ValueError(f"version of key {d.key} inserted in chain of key {self.key}")
        vs = self.versions
        # fast path: replication and local writes mostly append
        if not vs or _order(vs[-1]) < _order(d):
            vs.append(d)
            return True
        o = _order(d)
        i = bisect_left(vs, o, key=_order)
        if i < len(vs) and _order(vs[i]) == o:
            return False
        insort(vs, d, key=_order)
        return True

    def read_visible(self, usv, local_dc: int) -> Optional[ItemVersion]:
        """Freshest version that is local or covered by ``usv``."""
        for d in reversed(self.versions):
            if d.sr == local_dc or d.ut <= usv[d.sr]:
                return d
        return None

    def read_slice(self, ts, local_dc: int) -> Optional[ItemVersion]:
        """Freshest version inside the snapshot vector ``ts``.

        Local versions need their whole dependency vector under ``ts``;
        remote ones only their timestamp under the entry of their origin.
        """
        for d in reversed(self.versions):
            if d.sr == local_dc:
                if vleq(d.dv, ts):
                    return d
            elif d.ut <= ts[d.sr]:
                return d
        return None

    def collect_garbage(self, gv, local_dc: int) -> int:
        """Drop every version older than the one visible under ``gv``.

        Returns the number of versions removed. Nothing is removed when no
        version is visible under ``gv``.
        """
        vs = self.versions
        for i in range(len(vs) - 1, 0, -1):
            d = vs[i]
            if (vleq(d.dv, gv) if d.sr == local_dc else d.ut <= gv[d.sr]):
                del vs[:i]
                return i
        return 0


class Store:
    """All version chains of one partition replica."""

    def __init__(self):
        self.chains: dict[int, VersionChain] = {}
        # keys holding more than one version; the only ones GC has to visit
        self._multi: set[int] = set()
        self.duplicates = 0

    def chain(self, key: int) -> Optional[VersionChain]:
        return self.chains.get(key)

    def insert(self, d: ItemVersion) -> bool:
        chain = self.chains.get(d.key)
        if chain is None:
            chain = self.chains[d.key] = VersionChain(d.key)
        ok = chain.insert(d)
        if not ok:
            self.duplicates += 1
        elif len(chain.versions) > 1:
            self._multi.add(d.key)
        return ok

    def read_visible(self, key: int, usv, local_dc: int) -> Optional[ItemVersion]:
        chain = self.chains.get(key)
        return chain.read_visible(usv, local_dc) if chain else None

    def read_slice(self, key: int, ts, local_dc: int) -> Optional[ItemVersion]:
        chain = self.chains.get(key)
        return chain.read_slice(ts, local_dc) if chain else None

    def read_at(self, key: int, t) -> Optional[ItemVersion]:
        """Freshest version of ``key`` whose timestamp is at most ``t``."""
        chain = self.chains.get(key)
        if chain is None:
            return None
        for d in reversed(chain.versions):
            if d.ut <= t:
                return d
        return None

    def collect_garbage(self, gv, local_dc: int) -> int:
        removed = 0
        done = []
        for key in sorted(self._multi):
            chain = self.chains[key]
            removed += chain.collect_garbage(gv, local_dc)
            if len(chain.versions) <= 1:
                done.append(key)
        self._multi.difference_update(done)
        return removed

    def version_count(self) -> int:
        return sum(len(c.versions) for c in self.chains.values())
