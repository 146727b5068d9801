"""Binary frames for the four daemon requests and their responses.

Frame layout, little-endian::

    u32 length        bytes that follow this field
    u8  kind
    u64 correlation_id
    u32 sender
    ...payload

Payloads:

    VerifyEReq   u32 n, n x (u64, u64)
    VerifyEResp  u32 n, n x u8 (0/1)
    FetchVReq    u32 n, n x u64
    FetchVResp   u32 n, n x (u64 id, u32 deg, deg x u64)
    CheckRReq    (empty)
    CheckRResp   u32 count
    ShareRReq    (empty)
    ShareRResp   u32 m, m x u64   (m = 0: nothing to share)
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Any

from .errors import ProtocolError

HEADER = struct.Struct("<IBQI")
U32 = struct.Struct("<I")
MAX_FRAME = 1 << 30


class Kind(enum.IntEnum):
    VERIFY_E_REQ = 1
    VERIFY_E_RESP = 2
    FETCH_V_REQ = 3
    FETCH_V_RESP = 4
    CHECK_R_REQ = 5
    CHECK_R_RESP = 6
    SHARE_R_REQ = 7
    SHARE_R_RESP = 8

    @property
    def response(self) -> "Kind":
        return Kind(self + 1)

    @property
    def is_request(self) -> bool:
        return self % 2 == 1


@dataclass(frozen=True)
class Message:
    kind: Kind
    correlation_id: int
    sender: int
    payload: Any = None


def _u64s(values) -> bytes:
    values = list(values)
    return U32.pack(len(values)) + struct.pack(f"<{len(values)}Q", *values)


def encode_payload(kind: Kind, payload) -> bytes:
    if kind == Kind.VERIFY_E_REQ:
        flat = [x for pair in payload for x in pair]
        return U32.pack(len(payload)) + struct.pack(f"<{len(flat)}Q", *flat)
    if kind == Kind.VERIFY_E_RESP:
        return U32.pack(len(payload)) + bytes(1 if b else 0 for b in payload)
    if kind in (Kind.FETCH_V_REQ, Kind.SHARE_R_RESP):
        return _u64s(payload)
    if kind == Kind.FETCH_V_RESP:
        parts = [U32.pack(len(payload))]
        for v, adj in payload:
            parts.append(struct.pack(f"<QI{len(adj)}Q", v, len(adj), *adj))
        return b"".join(parts)
    if kind == Kind.CHECK_R_RESP:
        return U32.pack(payload)
    if kind in (Kind.CHECK_R_REQ, Kind.SHARE_R_REQ):
        if payload not in (None, ()):
            raise ValueError(f"{kind.name} carries no payload")
        return b""
    raise ValueError(f"unknown kind {kind!r}")


def encode(msg: Message) -> bytes:
    body = encode_payload(msg.kind, msg.payload)
    length = HEADER.size - 4 + len(body)
    return HEADER.pack(length, msg.kind, msg.correlation_id, msg.sender) + body


class _Reader:
    def __init__(self, buf: bytes, offset: int):
        self.buf = buf
        self.off = offset

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.off + size > len(self.buf):
            raise ProtocolError("truncated payload")
        out = struct.unpack_from(fmt, self.buf, self.off)
        self.off += size
        return out

    def u32(self) -> int:
        return self.take("<I")[0]


def decode_payload(kind: Kind, buf: bytes, offset: int = 0):
    r = _Reader(buf, offset)
    if kind == Kind.VERIFY_E_REQ:
        n = r.u32()
        flat = r.take(f"<{2 * n}Q")
        payload = tuple(zip(flat[::2], flat[1::2]))
    elif kind == Kind.VERIFY_E_RESP:
        n = r.u32()
        raw = r.take(f"<{n}B")
        if any(b > 1 for b in raw):
            raise ProtocolError("verdict byte not 0/1")
        payload = tuple(bool(b) for b in raw)
    elif kind in (Kind.FETCH_V_REQ, Kind.SHARE_R_RESP):
        n = r.u32()
        payload = r.take(f"<{n}Q")
    elif kind == Kind.FETCH_V_RESP:
        n = r.u32()
        items = []
        for _ in range(n):
            v, deg = r.take("<QI")
            items.append((v, r.take(f"<{deg}Q")))
        payload = tuple(items)
    elif kind == Kind.CHECK_R_RESP:
        payload = r.u32()
    else:
        payload = None
    if r.off != len(buf):
        raise ProtocolError(f"{len(buf) - r.off} trailing bytes in {kind.name}")
    return payload


def decode(frame: bytes) -> Message:
    if len(frame) < HEADER.size:
        raise ProtocolError("frame shorter than header")
    length, kind, corr, sender = HEADER.unpack_from(frame)
    if length != len(frame) - 4:
        raise ProtocolError(f"length field {length} but {len(frame) - 4} bytes follow")
    try:
        kind = Kind(kind)
    except ValueError:
        raise ProtocolError(f"unknown kind {kind}") from None
    return Message(kind, corr, sender, decode_payload(kind, frame, HEADER.size))


def read_frame(recv_exactly) -> bytes | None:
    """Read one frame using ``recv_exactly(n)``; None on clean end of stream."""
    head = recv_exactly(4)
    if not head:
        return None
    (length,) = U32.unpack(head)
    if length < HEADER.size - 4 or length > MAX_FRAME:
        raise ProtocolError(f"bad frame length {length}")
    rest = recv_exactly(length)
    if rest is None or len(rest) != length:
        raise ProtocolError("connection closed mid-frame")
    return head + rest
