"""Statement executor: planning, views, constraints, index upkeep, logging.

One :class:`Engine` owns a database directory end to end: the table
registry, the page caches, the in-memory indexes, the per-table locks, and
the statement log. Workers call :meth:`Engine.execute_text` concurrently;
every statement acquires shared access for reads or one continuous
exclusive hold for the validate-then-apply sequence of a mutation, which is
what keeps the course-capacity scenario race-free.
"""

from __future__ import annotations

import operator
import os
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Optional, Union

from . import ast_nodes as ast
from .btree import DEFAULT_ORDER, IndexManager, rebuild_tree
from .cache import CacheConfig, CacheManager
from .errors import (
    ConstraintError,
    LogCorrupt,
    MinirelError,
    ReplayDivergence,
    TableExistsError,
    TypeMismatchError,
    UnknownColumnError,
    UnknownTableError,
)
from .locks import ReadWriteLock
from .parser import parse
from .storage import (
    INT64_MAX,
    INT64_MIN,
    RecordSlot,
    StorageError,
    Table,
    TableSchema,
    escape_text,
    open_database,
    unescape_text,
)

LOG_FILENAME = "server.log"

_OPS = {
    "=": operator.eq, "!=": operator.ne, "<": operator.lt,
    "<=": operator.le, ">": operator.gt, ">=": operator.ge,
}

Columns = tuple[tuple[str, ast.ColumnType], ...]


@dataclass(frozen=True)
class View:
    """Immutable materialized query result."""

    columns: Columns
    rows: tuple[tuple[ast.Literal, ...], ...]

    def __post_init__(self) -> None:
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError("row width differs from column count")

    def column_names(self) -> list[str]:
        return [name for name, _ in self.columns]


@dataclass(frozen=True)
class RowCount:
    count: int


ExecResult = Union[View, RowCount]


# ---------------------------------------------------------------------------
# Integrity constraints.

@dataclass(frozen=True)
class Violation:
    strategy: str
    column: str
    detail: str


class TableStateAccessor:
    """Read-only window onto current table state for constraint strategies."""

    def __init__(self, engine: "Engine", table: Table) -> None:
        self._engine = engine
        self._table = table

    def live_rows(self) -> Iterator[tuple[int, tuple]]:
        for recno in range(self._table.slot_count()):
            slot = self._engine.cache.get_record(self._table.name, recno)
            if slot.valid:
                yield recno, slot.values

    def records_with_value(self, column: str, key) -> list[int]:
        """Records currently holding this value, via the index if one exists."""
        tree = self._engine.indexes.get(self._table.name, column)
        if tree is not None:
            return tree.lookup_eq(key)
        idx = self._table.schema.column_index(column)
        return [recno for recno, values in self.live_rows()
                if values[idx] == key]


class NotNullStrategy:
    """NOT NULL and primary-key string columns must not be empty."""

    name = "not_null"

    def violations(self, schema, accessor, proposed):
        out = []
        for _, values in proposed:
            for col, value in zip(schema.columns, values):
                required = col.not_null or col.primary_key
                if required and col.type.kind == "str" and value == "":
                    out.append(Violation(self.name, col.name,
                                         "value must not be empty"))
        return out


class WidthStrategy:
    """Values must be representable in their fixed-width fields."""

    name = "width"

    def violations(self, schema, accessor, proposed):
        out = []
        for _, values in proposed:
            for col, value in zip(schema.columns, values):
                if col.type.kind == "str":
                    needed = len(escape_text(value).encode("utf-8"))
                    if needed > col.type.width:
                        out.append(Violation(
                            self.name, col.name,
                            f"needs {needed} bytes, width is {col.type.width}"))
                elif not INT64_MIN <= value <= INT64_MAX:
                    out.append(Violation(self.name, col.name,
                                         f"{value} outside the 64-bit range"))
        return out


class PrimaryKeyStrategy:
    """The primary-key value must be unique among live rows."""

    name = "primary_key"

    def violations(self, schema, accessor, proposed):
        pk = next((i for i, c in enumerate(schema.columns) if c.primary_key),
                  None)
        if pk is None:
            return []
        column = schema.columns[pk].name
        # rows being replaced do not collide with their own old images
        excluded = {recno for recno, _ in proposed if recno is not None}
        out, seen = [], set()
        for _, values in proposed:
            key = values[pk]
            holders = [r for r in accessor.records_with_value(column, key)
                       if r not in excluded]
            if holders or key in seen:
                out.append(Violation(self.name, column,
                                     f"duplicate value {key!r}"))
            seen.add(key)
        return out


class CheckStrategy:
    """Declared CHECK comparisons must hold for every proposed row."""

    name = "check"

    def violations(self, schema, accessor, proposed):
        out = []
        for _, values in proposed:
            for check in schema.checks:
                value = values[schema.column_index(check.column)]
                if not _OPS[check.op](value, check.literal):
                    out.append(Violation(
                        self.name, check.column,
                        f"{check.column} {check.op} {check.literal!r} "
                        f"fails for {value!r}"))
        return out


class ConstraintChecker:
    """All integrity strategies of one table; evaluation never mutates."""

    def __init__(self, schema: TableSchema) -> None:
        self.schema = schema
        self.strategies = [NotNullStrategy(), WidthStrategy(),
                           PrimaryKeyStrategy(), CheckStrategy()]


def check_constraints(checker: ConstraintChecker, accessor: TableStateAccessor,
                      proposed_rows, operation_kind: str) -> list[Violation]:
    """Evaluate every strategy against every proposed row.

    ``proposed_rows`` is a list of (old record number or None, new values).
    The returned list is exhaustive, not first-failure; empty means pass.
    ``operation_kind`` ("insert" or "update") is informational.
    """
    violations: list[Violation] = []
    for strategy in checker.strategies:
        violations.extend(
            strategy.violations(checker.schema, accessor, proposed_rows))
    return violations


def _format_violations(violations: list[Violation]) -> str:
    parts = [f"{v.strategy}({v.column}): {v.detail}" for v in violations]
    return "; ".join(parts)


# ---------------------------------------------------------------------------
# Statement log.

class StatementLog:
    """Append-only BEGIN/COMMIT/ABORT journal of mutating statements.

    A mutex serializes appends, so entries land in submission order. The
    engine writes BEGIN while already holding the table's exclusive lock and
    COMMIT before releasing it, which makes the per-table entry order equal
    the apply order; replaying committed entries therefore reproduces the
    data files byte for byte.
    """

    def __init__(self, path) -> None:
        self.path = Path(path)
        self._file = open(self.path, "a", encoding="utf-8", newline="")
        self._lock = threading.Lock()

    def _append(self, kind: str, text: str) -> None:
        entry = f"{int(time.time() * 1000)}\t{kind}\t{escape_text(text)}\n"
        with self._lock:
            self._file.write(entry)
            self._file.flush()

    def begin(self, text: str) -> None:
        self._append("BEGIN", text)

    def commit(self, text: str) -> None:
        self._append("COMMIT", text)

    def abort(self, text: str) -> None:
        self._append("ABORT", text)

    def sync(self) -> None:
        with self._lock:
            self._file.flush()
            os.fsync(self._file.fileno())

    def close(self) -> None:
        with self._lock:
            if not self._file.closed:
                self._file.close()


def parse_log(path) -> list[tuple[int, str, str]]:
    """Decode a statement log into (millis, kind, statement text) entries."""
    entries = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split("\t")
        if len(parts) != 3:
            raise LogCorrupt(f"line {lineno}: expected 3 tab-separated fields")
        millis, kind, escaped = parts
        if not millis.isdigit():
            raise LogCorrupt(f"line {lineno}: bad timestamp {millis!r}")
        if kind not in ("BEGIN", "COMMIT", "ABORT"):
            raise LogCorrupt(f"line {lineno}: bad entry kind {kind!r}")
        try:
            statement = unescape_text(escaped)
        except StorageError as exc:
            raise LogCorrupt(f"line {lineno}: {exc}") from None
        entries.append((int(millis), kind, statement))
    return entries


def committed_statements(entries) -> list[str]:
    """Statements whose BEGIN has a matching COMMIT, in BEGIN order.

    Identical texts are matched first-in-first-out; a trailing BEGIN without
    a COMMIT is simply skipped.
    """
    pending: dict[str, deque[int]] = {}
    begins: list[tuple[int, str]] = []
    committed: set[int] = set()
    for position, (_, kind, statement) in enumerate(entries):
        if kind == "BEGIN":
            pending.setdefault(statement, deque()).append(position)
            begins.append((position, statement))
            continue
        queue = pending.get(statement)
        if not queue:
            raise LogCorrupt(f"{kind} without matching BEGIN: {statement!r}")
        begin_position = queue.popleft()
        if kind == "COMMIT":
            committed.add(begin_position)
    return [stmt for position, stmt in begins if position in committed]


# ---------------------------------------------------------------------------
# The engine.

class _Gauge:
    """Counts statements executing concurrently; peak feeds the pool test."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.current = 0
        self.peak = 0

    def __enter__(self) -> "_Gauge":
        with self._lock:
            self.current += 1
            self.peak = max(self.peak, self.current)
        return self

    def __exit__(self, *exc) -> None:
        with self._lock:
            self.current -= 1


class Engine:
    """Executes parsed statements against one database directory.

    Lock discipline: the registry lock is held shared for the duration of
    any table statement and exclusively for DDL and checkpoints; table locks
    are acquired after it, in ascending name order when a statement ever
    needs more than one. Mutations log BEGIN after taking the exclusive
    table lock and COMMIT before releasing it.
    """

    def __init__(self, base_dir, cache_config: Optional[CacheConfig] = None,
                 index_order: int = DEFAULT_ORDER,
                 log_path=None, step_limit: Optional[int] = None) -> None:
        self.base_dir = Path(base_dir)
        self.registry = open_database(self.base_dir)
        self.cache = CacheManager(cache_config)
        self.indexes = IndexManager(index_order)
        self.step_limit = step_limit
        self.gauge = _Gauge()
        self.log = StatementLog(log_path) if log_path is not None else None
        self._registry_lock = ReadWriteLock()
        self._table_locks: dict[str, ReadWriteLock] = {}
        self._checkers: dict[str, ConstraintChecker] = {}
        for name in self.registry.table_names():
            self._admit_table(self.registry.get(name))

    def _admit_table(self, table: Table) -> None:
        self.cache.open_table(table)
        self._table_locks[table.name] = ReadWriteLock()
        self._checkers[table.name] = ConstraintChecker(table.schema)
        for column in table.schema.indexed_columns:
            self.indexes.load_or_rebuild(table, column, self.base_dir)

    def checkpoint(self) -> None:
        """Flush every index to its file and sync the log."""
        with self._registry_lock.write_locked():
            self.indexes.persist_all(self.base_dir)
            if self.log is not None:
                self.log.sync()

    def close(self) -> None:
        with self._registry_lock.write_locked():
            self.indexes.persist_all(self.base_dir)
            if self.log is not None:
                self.log.close()
            self.registry.close()

    # -- dispatch ----------------------------------------------------------

    def execute_text(self, text: str) -> ExecResult:
        """Parse and execute one statement, journaling mutations."""
        statement = parse(text, step_limit=self.step_limit)
        return self.execute(statement, text=text)

    def execute(self, statement: ast.Statement, text: Optional[str] = None,
                force_full_scan: bool = False) -> ExecResult:
        """Execute a parsed statement.

        ``text`` is the original SQL for the statement log; statements
        executed without it are not journaled. ``force_full_scan`` disables
        index-assisted planning, for plan-equivalence comparisons.
        """
        with self.gauge:
            if isinstance(statement, ast.Select):
                return self._select(statement, force_full_scan)
            if isinstance(statement, ast.Insert):
                return self._insert(statement, text)
            if isinstance(statement, ast.Update):
                return self._update(statement, text)
            if isinstance(statement, ast.Delete):
                return self._delete(statement, text)
            if isinstance(statement, ast.CreateTable):
                return self._create_table(statement, text)
            if isinstance(statement, ast.CreateIndex):
                return self._create_index(statement, text)
            raise TypeError(f"not an executable statement: {statement!r}")

    # -- shared helpers ----------------------------------------------------

    def _require_table(self, name: str) -> Table:
        table = self.registry.get(name)
        if table is None:
            raise UnknownTableError(f"unknown table {name!r}")
        return table

    def _begin(self, text: Optional[str]) -> None:
        if self.log is not None and text is not None:
            self.log.begin(text)

    def _commit(self, text: Optional[str]) -> None:
        if self.log is not None and text is not None:
            self.log.commit(text)

    def _abort(self, text: Optional[str]) -> None:
        if self.log is not None and text is not None:
            self.log.abort(text)

    @staticmethod
    def _schema_columns(schema: TableSchema) -> Columns:
        return tuple((c.name, c.type) for c in schema.columns)

    @staticmethod
    def _validate_predicate(columns: Columns, predicate: ast.Predicate) -> None:
        kinds = {name: type_.kind for name, type_ in columns}
        for comp in predicate.conjuncts:
            if comp.column not in kinds:
                raise UnknownColumnError(f"unknown column {comp.column!r}")
            literal_kind = "int" if isinstance(comp.literal, int) else "str"
            if kinds[comp.column] != literal_kind:
                raise TypeMismatchError(
                    f"column {comp.column} is {kinds[comp.column].upper()}, "
                    f"literal {comp.literal!r} is {literal_kind.upper()}")

    @staticmethod
    def _compiled_predicate(columns: Columns,
                            predicate: ast.Predicate) -> Callable[[tuple], bool]:
        index_of = {name: i for i, (name, _) in enumerate(columns)}
        tests = [(index_of[c.column], _OPS[c.op], c.literal)
                 for c in predicate.conjuncts]

        def matches(row: tuple) -> bool:
            return all(fn(row[i], literal) for i, fn, literal in tests)

        return matches

    def _plan_recnos(self, table: Table, predicate: Optional[ast.Predicate],
                     force_full_scan: bool):
        """Choose the access path: index equality, index range, or scan."""
        if force_full_scan or predicate is None:
            return range(table.slot_count())
        indexed = set(table.schema.indexed_columns)
        for comp in predicate.conjuncts:
            if comp.op == "=" and comp.column in indexed:
                tree = self.indexes.get(table.name, comp.column)
                return tree.lookup_eq(comp.literal)
        for comp in predicate.conjuncts:
            if comp.op in ("<", "<=", ">", ">=") and comp.column in indexed:
                return self._range_plan(table, predicate, comp.column)
        return range(table.slot_count())

    def _range_plan(self, table: Table, predicate: ast.Predicate,
                    column: str) -> list[int]:
        # tightest combined bounds over every range conjunct on the column
        lo = hi = None
        lo_inc = hi_inc = True
        for comp in predicate.conjuncts:
            if comp.column != column:
                continue
            if comp.op in (">", ">="):
                inclusive = comp.op == ">="
                if lo is None or (comp.literal, not inclusive) > (lo, not lo_inc):
                    lo, lo_inc = comp.literal, inclusive
            elif comp.op in ("<", "<="):
                inclusive = comp.op == "<="
                if hi is None or (comp.literal, not inclusive) < (hi, not hi_inc):
                    hi, hi_inc = comp.literal, inclusive
        if lo is not None and hi is not None:
            if lo > hi or (lo == hi and not (lo_inc and hi_inc)):
                return []
        tree = self.indexes.get(table.name, column)
        return tree.lookup_range(lo, hi, lo_inc, hi_inc)

    def _matching_rows(self, table: Table, predicate: Optional[ast.Predicate],
                       force_full_scan: bool = False) -> list[tuple[int, tuple]]:
        columns = self._schema_columns(table.schema)
        matches = None
        if predicate is not None:
            self._validate_predicate(columns, predicate)
            matches = self._compiled_predicate(columns, predicate)
        out = []
        for recno in self._plan_recnos(table, predicate, force_full_scan):
            slot = self.cache.get_record(table.name, recno)
            if slot.valid and (matches is None or matches(slot.values)):
                out.append((recno, slot.values))
        return out

    # -- SELECT ------------------------------------------------------------

    @staticmethod
    def _base_table_name(select: ast.Select) -> str:
        source = select.source
        while isinstance(source, ast.Subquery):
            source = source.select.source
        return source.name

    def _select(self, select: ast.Select, force_full_scan: bool) -> View:
        with self._registry_lock.read_locked():
            name = self._base_table_name(select)
            table = self._require_table(name)
            with self._table_locks[table.name].read_locked():
                return self._run_select(select, force_full_scan)

    def _run_select(self, select: ast.Select, force_full_scan: bool) -> View:
        if isinstance(select.source, ast.Subquery):
            inner = self._run_select(select.source.select, force_full_scan)
            rows = list(inner.rows)
            if select.where is not None:
                self._validate_predicate(inner.columns, select.where)
                matches = self._compiled_predicate(inner.columns, select.where)
                rows = [row for row in rows if matches(row)]
            return self._project(inner.columns, rows, select.projection)
        table = self._require_table(select.source.name)
        columns = self._schema_columns(table.schema)
        rows = [values for _, values in
                self._matching_rows(table, select.where, force_full_scan)]
        return self._project(columns, rows, select.projection)

    @staticmethod
    def _project(columns: Columns, rows, projection) -> View:
        if projection == ast.STAR:
            return View(columns, tuple(tuple(row) for row in rows))
        index_of = {name: i for i, (name, _) in enumerate(columns)}
        for name in projection:
            if name not in index_of:
                raise UnknownColumnError(f"unknown column {name!r}")
        picks = [index_of[name] for name in projection]
        out_columns = tuple((name, columns[index_of[name]][1])
                            for name in projection)
        out_rows = tuple(tuple(row[i] for i in picks) for row in rows)
        return View(out_columns, out_rows)

    # -- mutations ---------------------------------------------------------

    @staticmethod
    def _typed_row(schema: TableSchema, values) -> tuple:
        if len(values) != len(schema.columns):
            raise TypeMismatchError(
                f"table {schema.name} has {len(schema.columns)} columns, "
                f"{len(values)} values given")
        for col, value in zip(schema.columns, values):
            kind = "int" if isinstance(value, int) else "str"
            if kind != col.type.kind:
                raise TypeMismatchError(
                    f"column {col.name} is {col.type.kind.upper()}, "
                    f"value {value!r} is {kind.upper()}")
        return tuple(values)

    def _insert(self, stmt: ast.Insert, text: Optional[str]) -> RowCount:
        with self._registry_lock.read_locked():
            table = self._require_table(stmt.table)
            schema = table.schema
            with self._table_locks[table.name].write_locked():
                self._begin(text)
                try:
                    values = self._typed_row(schema, stmt.values)
                    violations = check_constraints(
                        self._checkers[table.name],
                        TableStateAccessor(self, table),
                        [(None, values)], "insert")
                    if violations:
                        raise ConstraintError(_format_violations(violations))
                    recno = table.append_record(values)
                    self.cache.apply_write(table.name, recno,
                                           RecordSlot(True, values))
                    for column, tree in self.indexes.trees_for(table.name):
                        tree.insert(values[schema.column_index(column)], recno)
                except BaseException:
                    self._abort(text)
                    raise
                self._commit(text)
                return RowCount(1)

    def _compiled_assignments(self, schema: TableSchema, assignments):
        """Validate assignments into (column index, old row -> value) pairs."""
        out = []
        for assignment in assignments:
            try:
                idx = schema.column_index(assignment.column)
            except KeyError:
                raise UnknownColumnError(
                    f"unknown column {assignment.column!r}") from None
            col = schema.columns[idx]
            expr = assignment.expr
            if isinstance(expr, ast.ColumnPlusLiteral):
                try:
                    src = schema.column_index(expr.column)
                except KeyError:
                    raise UnknownColumnError(
                        f"unknown column {expr.column!r}") from None
                if schema.columns[src].type.kind != "int" or col.type.kind != "int":
                    raise TypeMismatchError(
                        "arithmetic update requires INT columns on both sides")
                sign = 1 if expr.sign == "+" else -1
                out.append((idx, lambda old, s=src, k=sign, a=expr.amount:
                            old[s] + k * a))
            else:
                kind = "int" if isinstance(expr, int) else "str"
                if kind != col.type.kind:
                    raise TypeMismatchError(
                        f"column {col.name} is {col.type.kind.upper()}, "
                        f"value {expr!r} is {kind.upper()}")
                out.append((idx, lambda old, v=expr: v))
        return out

    def _update(self, stmt: ast.Update, text: Optional[str]) -> RowCount:
        with self._registry_lock.read_locked():
            table = self._require_table(stmt.table)
            schema = table.schema
            with self._table_locks[table.name].write_locked():
                self._begin(text)
                try:
                    compiled = self._compiled_assignments(schema,
                                                          stmt.assignments)
                    matches = self._matching_rows(table, stmt.where)
                    proposed = []
                    for recno, old in matches:
                        new = list(old)
                        for idx, compute in compiled:
                            new[idx] = compute(old)
                        proposed.append((recno, tuple(new)))
                    violations = check_constraints(
                        self._checkers[table.name],
                        TableStateAccessor(self, table), proposed, "update")
                    if violations:
                        raise ConstraintError(_format_violations(violations))
                    for (recno, old), (_, new) in zip(matches, proposed):
                        table.overwrite_record(recno, new)
                        self.cache.apply_write(table.name, recno,
                                               RecordSlot(True, new))
                        for column, tree in self.indexes.trees_for(table.name):
                            i = schema.column_index(column)
                            if old[i] != new[i]:
                                tree.remove(old[i], recno)
                                tree.insert(new[i], recno)
                except BaseException:
                    self._abort(text)
                    raise
                self._commit(text)
                return RowCount(len(matches))

    def _delete(self, stmt: ast.Delete, text: Optional[str]) -> RowCount:
        with self._registry_lock.read_locked():
            table = self._require_table(stmt.table)
            schema = table.schema
            with self._table_locks[table.name].write_locked():
                self._begin(text)
                try:
                    matches = self._matching_rows(table, stmt.where)
                    for recno, old in matches:
                        table.delete_record(recno)
                        self.cache.apply_write(table.name, recno,
                                               RecordSlot(False, old))
                        for column, tree in self.indexes.trees_for(table.name):
                            tree.remove(old[schema.column_index(column)], recno)
                except BaseException:
                    self._abort(text)
                    raise
                self._commit(text)
                return RowCount(len(matches))

    # -- DDL ---------------------------------------------------------------

    @staticmethod
    def _validate_creation(stmt: ast.CreateTable) -> None:
        kinds = {c.name: c.type.kind for c in stmt.columns}
        for check in stmt.checks:
            if check.column not in kinds:
                raise UnknownColumnError(
                    f"check references unknown column {check.column!r}")
            literal_kind = "int" if isinstance(check.literal, int) else "str"
            if kinds[check.column] != literal_kind:
                raise TypeMismatchError(
                    f"check on {check.column} compares "
                    f"{kinds[check.column].upper()} with {literal_kind.upper()}")

    def _create_table(self, stmt: ast.CreateTable,
                      text: Optional[str]) -> RowCount:
        with self._registry_lock.write_locked():
            self._begin(text)
            try:
                self._validate_creation(stmt)
                schema = TableSchema(stmt.name, stmt.columns, stmt.checks)
                table = self.registry.create_table(schema)
                self._admit_table(table)
            except BaseException:
                self._abort(text)
                raise
            self._commit(text)
            return RowCount(0)

    def _create_index(self, stmt: ast.CreateIndex,
                      text: Optional[str]) -> RowCount:
        with self._registry_lock.write_locked():
            table = self._require_table(stmt.table)
            with self._table_locks[table.name].write_locked():
                self._begin(text)
                try:
                    schema = table.schema
                    if stmt.column not in schema.column_names():
                        raise UnknownColumnError(
                            f"unknown column {stmt.column!r}")
                    if stmt.column in schema.indexed_columns:
                        raise TableExistsError(
                            f"index on {stmt.table}.{stmt.column} "
                            f"already exists")
                    tree = rebuild_tree(table, stmt.column, self.indexes.order)
                    self.indexes.register(table.name, stmt.column, tree)
                    self.registry.set_indexed_columns(
                        table.name, schema.indexed_columns + (stmt.column,))
                except BaseException:
                    self._abort(text)
                    raise
                self._commit(text)
                return RowCount(0)


# ---------------------------------------------------------------------------
# Replay.

def replay_log(log_path, base_dir, **engine_kwargs) -> Engine:
    """Re-execute the committed statements of a log onto a fresh directory.

    Returns the engine left open over the rebuilt database. The replay
    engine writes no log of its own unless the caller passes ``log_path``.
    """
    statements = committed_statements(parse_log(log_path))
    engine = Engine(base_dir, **engine_kwargs)
    for statement in statements:
        try:
            engine.execute_text(statement)
        except MinirelError as exc:
            engine.close()
            raise ReplayDivergence(
                f"statement {statement!r} failed on replay: {exc}") from exc
    return engine
