"""Message kinds and their byte cost.

Sizes follow a fixed accounting: timestamp 8, dc id 4, key 8, value 8, a
vector of M timestamps M*8. Only the server-to-server kinds feed the
replication and stabilization totals; client-facing sizes are kept for
completeness.
"""

from __future__ import annotations

from .store import KEY_BYTES, VALUE_BYTES

TS_BYTES = 8
DC_ID_BYTES = 4

GET_REQ = "GETReq"
GET_REPLY = "GETReply"
PUT_REQ = "PUTReq"
PUT_REPLY = "PUTReply"
TX_REQ = "RO-TXReq"
TX_RESP = "RO-TXResp"
SLICE_REQ = "SliceREQ"
SLICE_RESP = "SliceRESP"
REPLICATE = "Replicate"
HEARTBEAT = "Heartbeat"
GSV_EXCHANGE = "GSVExchange"
USV_EXCHANGE = "USVExchange"
GC_EXCHANGE = "GCExchange"
FORWARD = "Forward"
FORWARD_REPLY = "ForwardReply"

GSV_RELAY = "GSVRelay"

STABILIZATION_KINDS = (HEARTBEAT, GSV_EXCHANGE, USV_EXCHANGE, GSV_RELAY)


def vector_bytes(m: int) -> int:
    return m * TS_BYTES


def replicate_meta_bytes(protocol: str, m: int) -> int:
    """Consistency meta-data carried by one replicated update."""
    meta = TS_BYTES + DC_ID_BYTES
    if protocol == "cure":
        meta += TS_BYTES * (m - 1)
    return meta


def replicate_bytes(protocol: str, m: int) -> int:
    return KEY_BYTES + VALUE_BYTES + replicate_meta_bytes(protocol, m)


def heartbeat_bytes() -> int:
    return TS_BYTES + DC_ID_BYTES


def exchange_payload_bytes(protocol: str, m: int) -> int:
    """Stable-time payload: a scalar for GentleRain, a DC vector otherwise."""
    return TS_BYTES if protocol == "gentlerain" else vector_bytes(m)


def exchange_bytes(protocol: str, m: int) -> int:
    """One stabilization exchange message: sender id plus its payload."""
    return DC_ID_BYTES + exchange_payload_bytes(protocol, m)


def relay_bytes(m: int) -> int:
    """A forwarded stable vector: sender id, origin id and the vector."""
    return 2 * DC_ID_BYTES + vector_bytes(m)


def tree_messages(n: int) -> int:
    """Messages for one aggregation round over a fanout-2 tree of n nodes:
    every non-root sends up once and receives the result once."""
    return 2 * (n - 1)


def request_bytes(kind: str, m: int, nkeys: int = 1, nversions: int = 0) -> int:
    vec = vector_bytes(m)
    version = KEY_BYTES + VALUE_BYTES + TS_BYTES + DC_ID_BYTES
    if kind == GET_REQ:
        return KEY_BYTES + vec
    if kind == GET_REPLY:
        return VALUE_BYTES + vec + TS_BYTES + DC_ID_BYTES
    if kind == PUT_REQ:
        return KEY_BYTES + VALUE_BYTES + vec
    if kind == PUT_REPLY:
        return TS_BYTES
    if kind == TX_REQ:
        return nkeys * KEY_BYTES + vec + TS_BYTES
    if kind == TX_RESP:
        return nversions * version + vec
    if kind == SLICE_REQ:
        return nkeys * KEY_BYTES + TS_BYTES + vec
    if kind == SLICE_RESP:
        return nversions * version
    raise ValueError(f"no size rule for {kind}")
