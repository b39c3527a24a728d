"""Closed-loop workloads.

Each client repeats a cycle. In ``tx-put`` mode the cycle is one read-only
transaction over ``p`` distinct partitions followed by one PUT; in
``get-put`` mode it is ``g`` GETs followed by one PUT. ``mixed`` picks one
of ``tx_choices`` / ``get_choices`` at random for every cycle. Keys inside a
partition follow a zipf law; key ``i`` of partition ``n`` is ``i * N + n``.
"""

from __future__ import annotations

import random
from bisect import bisect_left
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import accumulate

MODES = ("tx-put", "get-put", "mixed")


@dataclass
class WorkloadSpec:
    mode: str = "tx-put"
    p: int = 2
    g: int = 1
    clients_per_dc: int = 20
    keys_per_partition: int = 1000
    zipf: float = 0.99
    key_bytes: int = 8
    value_bytes: int = 8
    think_us: int = 0
    # cycle shapes drawn from in mixed mode
    tx_choices: list = field(default_factory=lambda: [1, 2, 4])
    get_choices: list = field(default_factory=lambda: [1])

    def validate(self, n: int) -> list[str]:
        errs = []
        if self.mode not in MODES:
            errs.append(f"workload.mode: expected one of {', '.join(MODES)}")
        if self.zipf <= 0:
            errs.append("workload.zipf: must be > 0")
        if self.keys_per_partition < 1:
            errs.append("workload.keys_per_partition: must be at least 1")
        if self.clients_per_dc < 0:
            errs.append("workload.clients_per_dc: must be non-negative")
        if self.think_us < 0:
            errs.append("workload.think_us: must be non-negative")
        if self.key_bytes != 8 or self.value_bytes != 8:
            errs.append("workload.key_bytes/value_bytes: only 8-byte keys and values are modeled")
        if self.mode == "tx-put" and not 1 <= self.p <= n:
            errs.append(f"workload.p: need 1 <= p <= N ({n})")
        if self.g < 1:
            errs.append("workload.g: must be at least 1")
        choices = self.tx_choices if self.mode == "mixed" else ()
        for i, p in enumerate(choices):
            if not 1 <= p <= n:
                errs.append(f"workload.tx_choices[{i}]: need 1 <= p <= N ({n})")
        for i, g in enumerate(self.get_choices):
            if g < 1:
                errs.append(f"workload.get_choices[{i}]: must be at least 1")
        return errs


@lru_cache(maxsize=16)
def zipf_cdf(n: int, s: float) -> tuple:
    weights = [1.0 / (i ** s) for i in range(1, n + 1)]
    total = sum(weights)
    cdf = [w / total for w in accumulate(weights)]
    cdf[-1] = 1.0
    return tuple(cdf)


class ZipfSampler:
    """Draws ranks in ``[0, n)``; rank 0 is the most popular."""

    def __init__(self, n: int, s: float, rng: random.Random):
        self.cdf = zipf_cdf(n, s)
        self.rng = rng

    def sample(self) -> int:
        return bisect_left(self.cdf, self.rng.random())


class ClientWorkload:
    def __init__(self, spec: WorkloadSpec, n: int, rng: random.Random):
        self.spec = spec
        self.n = n
        self.rng = rng
        self.zipf = ZipfSampler(spec.keys_per_partition, spec.zipf, rng)
        self._queue: list = []

    def key_in(self, partition: int) -> int:
        return self.zipf.sample() * self.n + partition

    def partitions(self, count: int) -> list:
        if count <= self.n:
            return self.rng.sample(range(self.n), count)
        # more reads than partitions: draw with replacement
        return [self.rng.randrange(self.n) for _ in range(count)]

    def cycle(self) -> list:
        spec = self.spec
        mode = spec.mode
        if mode == "mixed":
            shapes = [("tx-put", p) for p in spec.tx_choices] + [("get-put", g) for g in spec.get_choices]
            mode, size = shapes[self.rng.randrange(len(shapes))]
        else:
            size = spec.p if mode == "tx-put" else spec.g
        if mode == "tx-put":
            ops = [("rotx", tuple(self.key_in(q) for q in self.partitions(size)))]
        else:
            ops = [("get", (self.key_in(q),)) for q in self.partitions(size)]
        ops.append(("put", (self.key_in(self.rng.randrange(self.n)),)))
        return ops

    def next_op(self) -> tuple:
        if not self._queue:
            self._queue = self.cycle()[::-1]
        return self._queue.pop()
