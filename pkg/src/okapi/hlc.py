"""Hybrid logical/physical timestamps and the server-side clock update rules.

A timestamp is a ``(p, l)`` pair ordered lexicographically. ``p`` is in
simulated microseconds, ``l`` is a logical counter. On the wire every
timestamp is one 64-bit word: ``p`` in the top 48 bits, ``l`` in the low 16.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

PHYSICAL_BITS = 48
LOGICAL_BITS = 16
MAX_PHYSICAL = (1 << PHYSICAL_BITS) - 1
MAX_LOGICAL = (1 << LOGICAL_BITS) - 1

STRICT = "strict"
LITERAL = "literal"
MODES = (STRICT, LITERAL)


class EncodingError(ValueError):
    pass


class HLCOverflow(Exception):
    """The logical part would exceed 16 bits.

    The caller has to stall until its physical clock passes ``max_p``.
    """

    def __init__(self, max_p: int):
        super().__init__(f"logical counter overflow at physical time {max_p}")
        self.max_p = max_p


class HybridTimestamp(NamedTuple):
    p: int
    l: int = 0

    def encode(self) -> int:
        return encode(self)

    def __repr__(self) -> str:
        return f"({self.p},{self.l})"


ZERO = HybridTimestamp(0, 0)


def compare(a: HybridTimestamp, b: HybridTimestamp) -> int:
    """Three-way comparison: -1, 0 or 1."""
    return (a > b) - (a < b)


def encode(t: HybridTimestamp) -> int:
    p, l = t
    if not 0 <= p <= MAX_PHYSICAL:
        raise EncodingError(f"physical component {p} does not fit in {PHYSICAL_BITS} bits")
    if not 0 <= l <= MAX_LOGICAL:
        raise EncodingError(f"logical component {l} does not fit in {LOGICAL_BITS} bits")
    return (p << LOGICAL_BITS) | l


def decode(word: int) -> HybridTimestamp:
    if not 0 <= word < 1 << 64:
        raise EncodingError(f"{word} is not a 64-bit unsigned word")
    return HybridTimestamp(word >> LOGICAL_BITS, word & MAX_LOGICAL)


def update_on_put(
    vv_m: HybridTimestamp,
    clock: int,
    dv_local: HybridTimestamp,
    hd: HybridTimestamp,
    mode: str = STRICT,
) -> HybridTimestamp:
    """New version clock for a PUT carrying dependency vector ``DV_c``.

    ``hd`` is the entrywise maximum of ``DV_c`` and ``dv_local`` its local
    entry. In strict mode the result is strictly greater than both ``vv_m``
    and ``hd``. Literal mode reproduces the published branch structure, whose
    last branch resets the counter to zero even when ``max_p`` comes from a
    remote dependency.
    """
    max_p = max(vv_m.p, clock, hd.p)
    if mode == STRICT:
        l = -1
        if vv_m.p == max_p:
            l = vv_m.l
        if hd.p == max_p and hd.l > l:
            l = hd.l
        l += 1
    elif mode == LITERAL:
        if max_p == vv_m.p == dv_local.p:
            l = max(vv_m.l, dv_local.l) + 1
        elif max_p == vv_m.p:
            l = vv_m.l + 1
        elif max_p == dv_local.p:
            l = dv_local.l + 1
        else:
            l = 0
    else:
        raise ValueError(f"unknown HLC mode {mode!r}")
    if l > MAX_LOGICAL:
        raise HLCOverflow(max_p)
    return HybridTimestamp(max_p, l)


def update_on_tx(vv_m: HybridTimestamp, clock: int, ts: HybridTimestamp) -> HybridTimestamp:
    """Move the version clock up to a transaction snapshot time.

    The clock only moves when ``ts`` is ahead of both the version clock and
    the physical clock. A snapshot time sitting exactly at the current
    physical tick also moves it, so no later local write can reuse a
    timestamp at or below ``ts``.
    """
    if ts > vv_m and ts >= (clock, 0):
        return ts
    return vv_m


def update_on_heartbeat(vv_m: HybridTimestamp, clock: int) -> HybridTimestamp:
    if clock > vv_m.p:
        return HybridTimestamp(clock, 0)
    return vv_m


# -- vectors ---------------------------------------------------------------
# A DC vector is a plain tuple of M timestamps indexed by data-center id.


def zero_vector(m: int) -> tuple:
    return (ZERO,) * m


def vmax(a: Sequence[HybridTimestamp], b: Sequence[HybridTimestamp]) -> tuple:
    return tuple(x if x >= y else y for x, y in zip(a, b))


def vmin(vectors) -> tuple:
    vectors = list(vectors)
    if not vectors:
        raise ValueError("vmin of no vectors")
    return tuple(min(col) for col in zip(*vectors))


def vleq(a: Sequence[HybridTimestamp], b: Sequence[HybridTimestamp]) -> bool:
    for x, y in zip(a, b):
        if x > y:
            return False
    return True


def with_entry(v: Sequence[HybridTimestamp], i: int, t: HybridTimestamp) -> tuple:
    out = list(v)
    out[i] = t
    return tuple(out)


def encode_vector(v: Sequence[HybridTimestamp]) -> list:
    return [encode(t) for t in v]


def decode_vector(words) -> tuple:
    return tuple(decode(w) for w in words)
