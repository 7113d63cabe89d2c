"""Bit-exact wire formats for queries and responses, plus byte/symbol framing.

Every message starts with a one-byte tag naming its kind and format version.
Integers are big-endian. Symbols are packed w bits each, most significant
bit first, and the symbol area is zero-padded to a whole byte.

    query         0x11 | M:u16 | S:u16 | M*S entries:u16
    server query  0x12 | server:u16 | M:u16 | S:u16 | M*S entries:u16
    response      0x13 | S:u16 | alpha:u32 | w:u8 | bitmap:ceil(S/8) | symbols
"""

from __future__ import annotations

import struct

import numpy as np

from .protocol import ProtocolError, QueryMatrix, Response, ServerQuery

QUERY_TAG = 0x11
SERVER_QUERY_TAG = 0x12
RESPONSE_TAG = 0x13

_RESPONSE_HEADER = struct.Struct(">BHIB")


class WireError(ProtocolError):
    pass


def pack_symbols(values, w: int) -> bytes:
    values = np.asarray(values, dtype=np.int64).ravel()
    if values.size and (values.min() < 0 or values.max() >= 1 << w):
        raise WireError(f"symbol does not fit in {w} bits")
    if w == 8:
        return values.astype(np.uint8).tobytes()
    if w == 16:
        return values.astype(">u2").tobytes()
    if w == 1:
        return np.packbits(values.astype(np.uint8)).tobytes()
    shifts = np.arange(w - 1, -1, -1)
    bits = ((values[:, None] >> shifts) & 1).astype(np.uint8)
    return np.packbits(bits.ravel()).tobytes()


def unpack_symbols(data: bytes, w: int, count: int) -> np.ndarray:
    need = (count * w + 7) // 8
    if len(data) < need:
        raise WireError(f"need {need} bytes for {count} symbols of {w} bits, got {len(data)}")
    if w == 8:
        return np.frombuffer(data, dtype=np.uint8, count=count).astype(np.int64)
    if w == 16:
        return np.frombuffer(data, dtype=">u2", count=count).astype(np.int64)
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8, count=need))[: count * w]
    weights = 1 << np.arange(w - 1, -1, -1, dtype=np.int64)
    return bits.reshape(count, w).astype(np.int64) @ weights


def bytes_to_symbols(data: bytes, w: int, count: int) -> np.ndarray:
    """Read ``data`` as a bit stream, chunk into w-bit symbols, zero-pad to ``count``."""
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if bits.size > count * w:
        raise WireError(f"{len(data)} bytes do not fit in {count} symbols of {w} bits")
    bits = np.concatenate([bits, np.zeros(count * w - bits.size, dtype=np.uint8)])
    weights = 1 << np.arange(w - 1, -1, -1, dtype=np.int64)
    return bits.reshape(count, w).astype(np.int64) @ weights


def symbols_to_bytes(symbols, w: int) -> bytes:
    return pack_symbols(symbols, w)


def _grid_bytes(entries) -> bytes:
    flat = [x for row in entries for x in row]
    return struct.pack(f">{len(flat)}H", *flat)


def _read_grid(data: bytes, offset: int, m: int, s: int):
    need = offset + 2 * m * s
    if len(data) != need:
        raise WireError(f"expected {need} bytes, got {len(data)}")
    flat = struct.unpack_from(f">{m * s}H", data, offset)
    return tuple(tuple(flat[r * s:(r + 1) * s]) for r in range(m))


def encode_query(q: QueryMatrix) -> bytes:
    m, s = q.shape
    return struct.pack(">BHH", QUERY_TAG, m, s) + _grid_bytes(q.entries)


def decode_query(data: bytes) -> QueryMatrix:
    if len(data) < 5 or data[0] != QUERY_TAG:
        raise WireError("not a query message")
    _, m, s = struct.unpack_from(">BHH", data)
    return QueryMatrix(_read_grid(data, 5, m, s))


def encode_server_query(sq: ServerQuery) -> bytes:
    m, s = sq.shape
    return struct.pack(">BHHH", SERVER_QUERY_TAG, sq.server, m, s) + _grid_bytes(sq.entries)


def decode_server_query(data: bytes) -> ServerQuery:
    if len(data) < 7 or data[0] != SERVER_QUERY_TAG:
        raise WireError("not a server query message")
    _, server, m, s = struct.unpack_from(">BHHH", data)
    return ServerQuery(_read_grid(data, 7, m, s), server)


def encode_response(resp: Response, w: int) -> bytes:
    s = len(resp.present)
    alpha = resp.blocks.shape[1]
    header = _RESPONSE_HEADER.pack(RESPONSE_TAG, s, alpha, w)
    bitmap = np.packbits(np.array(resp.present, dtype=np.uint8)).tobytes() if s else b""
    return header + bitmap + pack_symbols(resp.blocks, w)


def decode_response(data: bytes) -> tuple[Response, int]:
    """Parse a response; returns it with the field width it was packed at."""
    if len(data) < _RESPONSE_HEADER.size or data[0] != RESPONSE_TAG:
        raise WireError("not a response message")
    _, s, alpha, w = _RESPONSE_HEADER.unpack_from(data)
    pos = _RESPONSE_HEADER.size
    nbitmap = (s + 7) // 8
    present = np.unpackbits(np.frombuffer(data, dtype=np.uint8, count=nbitmap, offset=pos))[:s]
    pos += nbitmap
    count = int(present.sum()) * alpha
    if len(data) - pos != (count * w + 7) // 8:
        raise WireError(f"response symbol area is {len(data) - pos} bytes, expected {(count * w + 7) // 8}")
    blocks = unpack_symbols(data[pos:], w, count).reshape(-1, alpha)
    return Response(tuple(bool(p) for p in present), blocks), w


def response_overhead_bits(message: bytes, symbols: int, w: int) -> int:
    """Bits on the wire that are not payload symbols (header, bitmap, padding)."""
    return 8 * len(message) - symbols * w
