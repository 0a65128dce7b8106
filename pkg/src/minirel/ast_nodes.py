"""Typed AST for the SQL subset.

Six statement kinds: create-table, create-index, insert, select, update,
delete.  Predicates are AND-only conjunctions of column-vs-literal
comparisons; the only arithmetic is ``column = column +/- integer`` inside an
update assignment.  All nodes are frozen dataclasses so parsed statements can
be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

# A literal is a plain Python value; INT columns hold ints, STR columns hold
# strings.
Literal = Union[int, str]

COMPARISON_OPS = ("=", "!=", "<", "<=", ">", ">=")

# Sentinel for a select-all projection.
STAR = "*"


@dataclass(frozen=True)
class ColumnType:
    kind: str  # "int" or "str"
    width: Optional[int] = None  # declared maximum length, str only

    def __post_init__(self) -> None:
        if self.kind not in ("int", "str"):
            raise ValueError(f"unknown column type kind {self.kind!r}")
        if self.kind == "str" and (self.width is None or self.width < 1):
            raise ValueError("str columns need a positive declared width")
        if self.kind == "int" and self.width is not None:
            raise ValueError("int columns take no width")


INT = ColumnType("int")


def STR(width: int) -> ColumnType:
    return ColumnType("str", width)


@dataclass(frozen=True)
class ColumnDef:
    name: str
    type: ColumnType
    not_null: bool = False
    primary_key: bool = False


@dataclass(frozen=True)
class CheckDef:
    column: str
    op: str
    literal: Literal


@dataclass(frozen=True)
class Comparison:
    column: str
    op: str
    literal: Literal


@dataclass(frozen=True)
class Predicate:
    conjuncts: tuple[Comparison, ...]

    def __post_init__(self) -> None:
        if not self.conjuncts:
            raise ValueError("a predicate needs at least one comparison")


@dataclass(frozen=True)
class ColumnPlusLiteral:
    column: str
    sign: str  # "+" or "-"
    amount: int


Expr = Union[int, str, ColumnPlusLiteral]


@dataclass(frozen=True)
class Assignment:
    column: str
    expr: Expr


@dataclass(frozen=True)
class TableRef:
    name: str


@dataclass(frozen=True)
class CreateTable:
    name: str
    columns: tuple[ColumnDef, ...]
    checks: tuple[CheckDef, ...] = ()


@dataclass(frozen=True)
class CreateIndex:
    table: str
    column: str


@dataclass(frozen=True)
class Insert:
    table: str
    values: tuple[Literal, ...]


@dataclass(frozen=True)
class Select:
    # Either the STAR sentinel or a tuple of distinct column names.
    projection: Union[str, tuple[str, ...]]
    source: "SelectSource"
    where: Optional[Predicate] = None


@dataclass(frozen=True)
class Subquery:
    select: Select
    alias: str


SelectSource = Union[TableRef, Subquery]


@dataclass(frozen=True)
class Update:
    table: str
    assignments: tuple[Assignment, ...]
    where: Optional[Predicate] = None


@dataclass(frozen=True)
class Delete:
    table: str
    where: Optional[Predicate] = None


Statement = Union[CreateTable, CreateIndex, Insert, Select, Update, Delete]
