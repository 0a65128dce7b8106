"""Physical layer: fixed-length plain-text record files.

Each table is two files in the database directory.  ``<name>.meta`` holds the
schema, one line per fact::

    table <name>
    column <name> <INT|STR> <width> <notnull:0|1> <pk:0|1>
    check <column> <op> <literal>
    index <column>

``<name>.dat`` is a sequence of fixed-width slots, one per record::

    flag || field1 || ... || fieldN || LF

The flag byte is '1' for live records and '0' for tombstones, so the byte
offset of record r is exactly r * record_width and the file stays readable in
a text editor.  INT fields are 20-byte right-aligned space-padded decimals;
STR fields are right-padded with spaces to their declared byte width, with
interior newline, tab, and backslash stored as the escapes \\n, \\t, \\\\.
Trailing spaces in a value are therefore not representable: padding removal
strips them on decode.

All reads and writes go through pread/pwrite on a shared descriptor, so
concurrent readers never race on a seek position.  Callers are responsible
for holding the table's lock in the right mode; this module only provides it.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

from . import ast_nodes as ast
from .errors import StorageError, TableExistsError, TypeMismatchError
from .locks import ReadWriteLock

INT_WIDTH = 20
MAX_STR_WIDTH = 4096
INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

Value = Union[int, str]


class CorruptMeta(StorageError):
    pass


class SizeMismatch(StorageError):
    pass


class PageOutOfRange(StorageError):
    pass


class DecodeError(StorageError):
    pass


class NoSuchRecord(StorageError):
    pass


class DeletedRecord(StorageError):
    pass


class StringTooLong(StorageError):
    pass


@dataclass(frozen=True)
class RecordSlot:
    valid: bool
    values: tuple[Value, ...]


@dataclass
class TableSchema:
    name: str
    columns: tuple[ast.ColumnDef, ...]
    checks: tuple[ast.CheckDef, ...] = ()
    indexed_columns: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not _NAME_RE.match(self.name):
            raise StorageError(f"illegal table name {self.name!r}")
        if not self.columns:
            raise StorageError(f"table {self.name}: at least one column required")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise StorageError(f"table {self.name}: duplicate column name")
        if sum(1 for c in self.columns if c.primary_key) > 1:
            raise StorageError(f"table {self.name}: more than one primary key")
        for col in self.columns:
            if not _NAME_RE.match(col.name):
                raise StorageError(f"illegal column name {col.name!r}")
            if col.type.kind == "str" and not 1 <= col.type.width <= MAX_STR_WIDTH:
                raise StorageError(
                    f"column {col.name}: str width must be in 1..{MAX_STR_WIDTH}")
        known = set(names)
        for indexed in self.indexed_columns:
            if indexed not in known:
                raise StorageError(f"indexed column {indexed!r} does not exist")

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column_index(self, name: str) -> int:
        for i, col in enumerate(self.columns):
            if col.name == name:
                return i
        raise KeyError(name)

    def width_of(self, col: ast.ColumnDef) -> int:
        return INT_WIDTH if col.type.kind == "int" else col.type.width

    @property
    def record_width(self) -> int:
        return 1 + sum(self.width_of(c) for c in self.columns) + 1


# ---------------------------------------------------------------------------
# Field encoding.

def escape_text(value: str) -> str:
    return (value.replace("\\", "\\\\")
                 .replace("\n", "\\n")
                 .replace("\t", "\\t"))


def unescape_text(value: str) -> str:
    out: list[str] = []
    i = 0
    n = len(value)
    while i < n:
        ch = value[i]
        if ch == "\\":
            if i + 1 >= n:
                raise DecodeError("dangling escape in stored string")
            nxt = value[i + 1]
            if nxt == "n":
                out.append("\n")
            elif nxt == "t":
                out.append("\t")
            elif nxt == "\\":
                out.append("\\")
            else:
                raise DecodeError(f"unknown escape \\{nxt} in stored string")
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def encode_slot(schema: TableSchema, values: Iterable[Value], valid: bool = True) -> bytes:
    values = tuple(values)
    if len(values) != len(schema.columns):
        raise TypeMismatchError(
            f"table {schema.name} has {len(schema.columns)} columns, "
            f"got {len(values)} values")
    parts = [b"1" if valid else b"0"]
    for col, value in zip(schema.columns, values):
        if col.type.kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeMismatchError(
                    f"column {col.name} is INT, got {type(value).__name__}")
            if not INT64_MIN <= value <= INT64_MAX:
                raise TypeMismatchError(f"column {col.name}: integer out of range")
            parts.append(f"{value:>{INT_WIDTH}d}".encode("ascii"))
        else:
            if not isinstance(value, str):
                raise TypeMismatchError(
                    f"column {col.name} is STR, got {type(value).__name__}")
            data = escape_text(value).encode("utf-8")
            if len(data) > col.type.width:
                raise StringTooLong(
                    f"column {col.name}: {len(data)} bytes exceeds "
                    f"declared width {col.type.width}")
            parts.append(data + b" " * (col.type.width - len(data)))
    parts.append(b"\n")
    return b"".join(parts)


def decode_slot(schema: TableSchema, raw: bytes) -> RecordSlot:
    if len(raw) != schema.record_width:
        raise DecodeError(
            f"slot is {len(raw)} bytes, expected {schema.record_width}")
    flag = raw[0:1]
    if flag not in (b"0", b"1"):
        raise DecodeError(f"bad validity flag {flag!r}")
    if raw[-1:] != b"\n":
        raise DecodeError("slot does not end with a newline")
    values: list[Value] = []
    offset = 1
    for col in schema.columns:
        width = schema.width_of(col)
        chunk = raw[offset:offset + width]
        offset += width
        if col.type.kind == "int":
            text = chunk.decode("ascii", errors="replace").strip()
            try:
                values.append(int(text))
            except ValueError:
                raise DecodeError(
                    f"column {col.name}: {text!r} is not an integer") from None
        else:
            try:
                text = chunk.decode("utf-8")
            except UnicodeDecodeError:
                raise DecodeError(f"column {col.name}: invalid UTF-8") from None
            values.append(unescape_text(text.rstrip(" ")))
    return RecordSlot(flag == b"1", tuple(values))


# ---------------------------------------------------------------------------
# Meta files.

def _render_meta_literal(literal: Value) -> str:
    if isinstance(literal, str):
        return "'" + escape_text(literal).replace("'", "''") + "'"
    return str(literal)


def _parse_meta_literal(text: str) -> Value:
    if text.startswith("'"):
        if len(text) < 2 or not text.endswith("'"):
            raise CorruptMeta(f"bad string literal {text!r}")
        return unescape_text(text[1:-1].replace("''", "'"))
    try:
        return int(text)
    except ValueError:
        raise CorruptMeta(f"bad literal {text!r}") from None


def render_meta(schema: TableSchema) -> str:
    lines = [f"table {schema.name}"]
    for col in schema.columns:
        kind = "INT" if col.type.kind == "int" else "STR"
        lines.append(f"column {col.name} {kind} {schema.width_of(col)} "
                     f"{int(col.not_null)} {int(col.primary_key)}")
    for check in schema.checks:
        lines.append(f"check {check.column} {check.op} "
                     f"{_render_meta_literal(check.literal)}")
    for indexed in schema.indexed_columns:
        lines.append(f"index {indexed}")
    return "\n".join(lines) + "\n"


def parse_meta(text: str) -> TableSchema:
    name: Optional[str] = None
    columns: list[ast.ColumnDef] = []
    checks: list[ast.CheckDef] = []
    indexed: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        kind, _, rest = line.partition(" ")
        try:
            if kind == "table":
                name = rest.strip()
            elif kind == "column":
                col_name, type_name, width, not_null, pk = rest.split(" ")
                if type_name == "INT":
                    col_type = ast.INT
                    if int(width) != INT_WIDTH:
                        raise CorruptMeta(f"INT width must be {INT_WIDTH}")
                elif type_name == "STR":
                    col_type = ast.STR(int(width))
                else:
                    raise CorruptMeta(f"unknown column type {type_name!r}")
                columns.append(ast.ColumnDef(
                    col_name, col_type, not_null == "1", pk == "1"))
            elif kind == "check":
                col_name, op, literal_text = rest.split(" ", 2)
                if op not in ast.COMPARISON_OPS:
                    raise CorruptMeta(f"unknown check operator {op!r}")
                checks.append(ast.CheckDef(col_name, op, _parse_meta_literal(literal_text)))
            elif kind == "index":
                indexed.append(rest.strip())
            else:
                raise CorruptMeta(f"unknown meta line kind {kind!r}")
        except (ValueError, CorruptMeta) as exc:
            raise CorruptMeta(f"meta line {lineno}: {exc}") from None
    if name is None:
        raise CorruptMeta("meta file has no table line")
    try:
        return TableSchema(name, tuple(columns), tuple(checks), tuple(indexed))
    except StorageError as exc:
        raise CorruptMeta(str(exc)) from None


# ---------------------------------------------------------------------------
# Tables and the registry.

class Table:
    """One open table: schema, data-file descriptor, and its lock.

    Mutating calls require the caller to hold ``lock`` exclusively; reads
    require at least shared mode.  Record numbers are stable for the life of
    a record (tombstones keep their slot).
    """

    def __init__(self, schema: TableSchema, dat_path: Path) -> None:
        self.schema = schema
        self.lock = ReadWriteLock()
        self._dat_path = dat_path
        self._fd = os.open(str(dat_path), os.O_RDWR | os.O_CREAT, 0o644)
        size = os.fstat(self._fd).st_size
        width = schema.record_width
        if size % width != 0:
            os.close(self._fd)
            raise SizeMismatch(
                f"table {schema.name}: data file length {size} is not a "
                f"multiple of record width {width}")
        self._count = size // width

    @property
    def name(self) -> str:
        return self.schema.name

    def slot_count(self) -> int:
        return self._count

    def close(self) -> None:
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1

    def _check_recno(self, record_number: int) -> None:
        if not 0 <= record_number < self._count:
            raise NoSuchRecord(
                f"table {self.name}: no record {record_number} "
                f"(have {self._count})")

    def read_slot(self, record_number: int) -> RecordSlot:
        self._check_recno(record_number)
        width = self.schema.record_width
        raw = os.pread(self._fd, width, record_number * width)
        return decode_slot(self.schema, raw)

    def read_page(self, page_no: int, page_size: int) -> list[RecordSlot]:
        if page_size < 1:
            raise ValueError("page_size must be >= 1")
        if page_no < 0:
            raise PageOutOfRange(f"negative page number {page_no}")
        first = page_no * page_size
        if first >= self._count:
            raise PageOutOfRange(
                f"table {self.name}: page {page_no} starts at record {first}, "
                f"but only {self._count} records exist")
        n = min(page_size, self._count - first)
        width = self.schema.record_width
        raw = os.pread(self._fd, n * width, first * width)
        return [decode_slot(self.schema, raw[i * width:(i + 1) * width])
                for i in range(n)]

    def append_record(self, values: Iterable[Value]) -> int:
        raw = encode_slot(self.schema, values)
        record_number = self._count
        os.pwrite(self._fd, raw, record_number * self.schema.record_width)
        self._count += 1
        return record_number

    def overwrite_record(self, record_number: int, values: Iterable[Value]) -> None:
        self._check_recno(record_number)
        if not self._read_flag(record_number):
            raise DeletedRecord(
                f"table {self.name}: record {record_number} is deleted")
        raw = encode_slot(self.schema, values)
        os.pwrite(self._fd, raw, record_number * self.schema.record_width)

    def delete_record(self, record_number: int) -> None:
        self._check_recno(record_number)
        if not self._read_flag(record_number):
            raise DeletedRecord(
                f"table {self.name}: record {record_number} is already deleted")
        os.pwrite(self._fd, b"0", record_number * self.schema.record_width)

    def _read_flag(self, record_number: int) -> bool:
        flag = os.pread(self._fd, 1, record_number * self.schema.record_width)
        if flag not in (b"0", b"1"):
            raise DecodeError(f"bad validity flag {flag!r}")
        return flag == b"1"


class TableRegistry:
    """All open tables of one database directory.

    ``lock`` is the registry-level readers-writer lock: statements take it
    shared while resolving table names, create-table takes it exclusively to
    mutate the map.
    """

    def __init__(self, base_dir: Path) -> None:
        self.base_dir = Path(base_dir)
        self.tables: dict[str, Table] = {}
        self.lock = ReadWriteLock()

    def get(self, name: str) -> Optional[Table]:
        return self.tables.get(name)

    def table_names(self) -> list[str]:
        return sorted(self.tables)

    def create_table(self, schema: TableSchema) -> Table:
        """Caller must hold the registry lock exclusively."""
        meta_path = self.base_dir / f"{schema.name}.meta"
        if schema.name in self.tables or meta_path.exists():
            raise TableExistsError(f"table {schema.name} already exists")
        try:
            meta_path.write_text(render_meta(schema), encoding="utf-8")
            table = Table(schema, self.base_dir / f"{schema.name}.dat")
        except OSError as exc:
            raise StorageError(f"io failure creating {schema.name}: {exc}") from exc
        self.tables[schema.name] = table
        return table

    def set_indexed_columns(self, name: str, indexed: tuple[str, ...]) -> None:
        """Persist a new indexed-column set to the table's meta file."""
        table = self.tables[name]
        schema = table.schema
        schema.indexed_columns = tuple(indexed)
        meta_path = self.base_dir / f"{name}.meta"
        meta_path.write_text(render_meta(schema), encoding="utf-8")

    def close(self) -> None:
        for table in self.tables.values():
            table.close()
        self.tables.clear()


def open_database(base_dir) -> TableRegistry:
    """Open every table in the directory; data files must be slot-aligned."""
    base = Path(base_dir)
    if not base.is_dir():
        raise StorageError(f"database directory {base} does not exist")
    registry = TableRegistry(base)
    for meta_path in sorted(base.glob("*.meta")):
        try:
            schema = parse_meta(meta_path.read_text(encoding="utf-8"))
        except CorruptMeta as exc:
            raise CorruptMeta(f"{meta_path.name}: {exc}") from None
        if schema.name != meta_path.stem:
            raise CorruptMeta(
                f"{meta_path.name}: table line says {schema.name!r}")
        registry.tables[schema.name] = Table(schema, base / f"{schema.name}.dat")
    return registry
