"""Length-prefixed wire format and the text response grammar.

A frame is a 4-byte big-endian unsigned payload length followed by exactly
that many bytes. Responses are UTF-8 text: a status line (`OK rows=<n>`,
`OK count=<n>`, or `ERR <code> <message>`), and for row results a
tab-separated header line plus one line per row. Cells escape tab, newline,
and backslash, so decoding then re-encoding any response is byte-identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Union

from .errors import ProtocolError
from .storage import DecodeError, escape_text, unescape_text

MAX_PAYLOAD = 2 ** 20 - 1

_HEADER = struct.Struct(">I")


class FrameTooLarge(ProtocolError):
    """A frame declared or carried a payload of 2^20 bytes or more."""


class TruncatedFrame(ProtocolError):
    """The stream ended inside a frame header or payload."""


class ConnectionClosed(ProtocolError):
    """The stream ended cleanly between frames."""


def encode_frame(payload: bytes) -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise FrameTooLarge(
            f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    return _HEADER.pack(len(payload)) + payload


def decode_frame(stream) -> bytes:
    """Read one frame from a blocking binary stream (anything with .read)."""
    header = stream.read(4)
    if header == b"":
        raise ConnectionClosed("stream closed between frames")
    if len(header) < 4:
        raise TruncatedFrame(f"stream ended inside the header ({header!r})")
    (length,) = _HEADER.unpack(header)
    if length > MAX_PAYLOAD:
        raise FrameTooLarge(f"declared payload of {length} bytes "
                            f"exceeds {MAX_PAYLOAD}")
    payload = stream.read(length) if length else b""
    if len(payload) < length:
        raise TruncatedFrame(
            f"declared {length} payload bytes, got {len(payload)}")
    return payload


# ---------------------------------------------------------------------------
# Response grammar.

@dataclass(frozen=True)
class RowsResult:
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class CountResult:
    count: int


@dataclass(frozen=True)
class ErrorResult:
    code: str
    message: str


Response = Union[RowsResult, CountResult, ErrorResult]


def render_response(response: Response) -> str:
    if isinstance(response, RowsResult):
        lines = [f"OK rows={len(response.rows)}",
                 "\t".join(escape_text(name) for name in response.columns)]
        for row in response.rows:
            lines.append("\t".join(escape_text(cell) for cell in row))
        return "\n".join(lines)
    if isinstance(response, CountResult):
        return f"OK count={response.count}"
    if isinstance(response, ErrorResult):
        if response.message:
            return f"ERR {response.code} {escape_text(response.message)}"
        return f"ERR {response.code}"
    raise TypeError(f"not a response: {response!r}")


def _parse_count(text: str, prefix: str) -> int:
    value = text[len(prefix):]
    if not value.isdigit() or (value != "0" and value.startswith("0")):
        raise ProtocolError(f"bad count in status line {text!r}")
    return int(value)


def _unescape_cell(cell: str) -> str:
    try:
        return unescape_text(cell)
    except DecodeError as exc:
        raise ProtocolError(f"bad cell escape: {exc}") from None


def parse_response(text: str) -> Response:
    """Decode a response payload; raises ProtocolError on any deviation."""
    lines = text.split("\n")
    status = lines[0]
    if status.startswith("OK rows="):
        expected = _parse_count(status, "OK rows=")
        if len(lines) != expected + 2:
            raise ProtocolError(
                f"row response declares {expected} rows "
                f"but carries {len(lines) - 2} lines")
        columns = tuple(_unescape_cell(c) for c in lines[1].split("\t"))
        rows = []
        for line in lines[2:]:
            cells = tuple(_unescape_cell(c) for c in line.split("\t"))
            if len(cells) != len(columns):
                raise ProtocolError(
                    f"row has {len(cells)} cells, header has {len(columns)}")
            rows.append(cells)
        return RowsResult(columns, tuple(rows))
    if status.startswith("OK count="):
        if len(lines) != 1:
            raise ProtocolError("count response must be a single line")
        return CountResult(_parse_count(status, "OK count="))
    if status.startswith("ERR"):
        if len(lines) != 1:
            raise ProtocolError("error response must be a single line")
        parts = status.split(" ", 2)
        if len(parts) < 2 or parts[0] != "ERR" or not parts[1]:
            raise ProtocolError(f"bad error line {status!r}")
        message = _unescape_cell(parts[2]) if len(parts) == 3 else ""
        return ErrorResult(parts[1], message)
    raise ProtocolError(f"unrecognized status line {status!r}")
