"""Automaton-driven parser for the SQL subset.

One machine per statement family, dispatched on the leading keyword.  Each
machine is an immutable :class:`~minirel.automaton.Automaton` built once at
import; per-parse state lives in the run's context store.

The select machine supports FROM-clause subqueries through a stack of parse
frames in the store: consuming ``(`` after FROM pushes a fresh frame, the
matching ``)`` pops the completed frame, and the following ``as <alias>``
installs it as the outer frame's source.  The other statement machines keep
their working state in a single scratch dict since their grammars do not
nest.
"""

from __future__ import annotations

from typing import Any, Callable, Optional

from . import ast_nodes as ast
from .automaton import (
    Automaton,
    AutomatonEdge,
    AutomatonNode,
    ContextStore,
    build,
)
from .errors import NestingError, ParseError, RejectError
from .lexer import Token, tokenize

FRAMES_KEY = "frames"
PENDING_KEY = "pending_subqueries"
SCRATCH_KEY = "stmt"

_OPS = set(ast.COMPARISON_OPS)


def _kw(word: str) -> Callable[[Token], bool]:
    return lambda t: t.kind == "keyword" and t.text == word


def _sym(text: str) -> Callable[[Token], bool]:
    return lambda t: t.kind == "symbol" and t.text == text


def _is_ident(t: Token) -> bool:
    return t.kind == "identifier"


def _is_int(t: Token) -> bool:
    return t.kind == "integer"


def _is_str(t: Token) -> bool:
    return t.kind == "string"


def _is_op(t: Token) -> bool:
    return t.kind == "symbol" and t.text in _OPS


class _Frame:
    """Mutable working state for one (possibly nested) select."""

    __slots__ = ("projection", "source", "conjuncts", "pending_col",
                 "pending_op", "negate")

    def __init__(self) -> None:
        self.projection: Any = None  # ast.STAR or list of names
        self.source: Optional[ast.SelectSource] = None
        self.conjuncts: list[ast.Comparison] = []
        self.pending_col = ""
        self.pending_op = ""
        self.negate = False


def _top(store: ContextStore) -> _Frame:
    return store.get(FRAMES_KEY)[-1]


def _scratch(store: ContextStore) -> dict:
    return store.get(SCRATCH_KEY)


def _predicate(conjuncts: list[ast.Comparison]) -> Optional[ast.Predicate]:
    return ast.Predicate(tuple(conjuncts)) if conjuncts else None


def _assemble_select_frame(frame: _Frame) -> ast.Select:
    if frame.projection == ast.STAR:
        projection: Any = ast.STAR
    else:
        names = tuple(frame.projection)
        if len(set(names)) != len(names):
            raise ParseError("projection names must be distinct")
        projection = names
    assert frame.source is not None  # the grammar cannot reach here without one
    return ast.Select(projection, frame.source, _predicate(frame.conjuncts))


def _select_machine() -> Automaton:
    def set_star(store: ContextStore, t: Token) -> None:
        _top(store).projection = ast.STAR

    def first_column(store: ContextStore, t: Token) -> None:
        _top(store).projection = [t.text]

    def next_column(store: ContextStore, t: Token) -> None:
        _top(store).projection.append(t.text)

    def set_table(store: ContextStore, t: Token) -> None:
        _top(store).source = ast.TableRef(t.text)

    def push_frame(store: ContextStore, t: Token) -> None:
        store.push(FRAMES_KEY, _Frame())

    def only_when_nested(store: ContextStore, t: Token) -> Any:
        # A ")" at top level is not ours to consume.
        return len(store.get(FRAMES_KEY)) > 1

    def pop_frame(store: ContextStore, t: Token) -> None:
        frame = store.pop(FRAMES_KEY)
        store.push(PENDING_KEY, _assemble_select_frame(frame))

    def install_alias(store: ContextStore, t: Token) -> None:
        sub = store.pop(PENDING_KEY)
        _top(store).source = ast.Subquery(sub, t.text)

    def where_col(store: ContextStore, t: Token) -> None:
        _top(store).pending_col = t.text

    def where_op(store: ContextStore, t: Token) -> None:
        _top(store).pending_op = t.text

    def begin_negate(store: ContextStore, t: Token) -> None:
        _top(store).negate = True

    def finish_comparison(value: Callable[[Token], ast.Literal]):
        def hook(store: ContextStore, t: Token) -> None:
            frame = _top(store)
            literal = value(t)
            if frame.negate:
                literal = -literal
                frame.negate = False
            frame.conjuncts.append(
                ast.Comparison(frame.pending_col, frame.pending_op, literal))
        return hook

    def assemble(store: ContextStore, t: Token) -> ast.Select:
        return _assemble_select_frame(_top(store))

    nodes = [
        AutomatonNode("sel.start"),
        AutomatonNode("sel.proj"),
        AutomatonNode("sel.proj_more"),
        AutomatonNode("sel.proj_item"),
        AutomatonNode("sel.from_kw"),
        AutomatonNode("sel.source"),
        AutomatonNode("sel.sub_select"),
        AutomatonNode("sel.complete", terminal=True, action=assemble),
        AutomatonNode("sel.where_col"),
        AutomatonNode("sel.where_op"),
        AutomatonNode("sel.where_val"),
        AutomatonNode("sel.where_done", terminal=True, action=assemble),
        AutomatonNode("sel.alias_as"),
        AutomatonNode("sel.alias_name"),
    ]
    edges = [
        AutomatonEdge("sel.start", "sel.proj", consumes=True, match=_kw("select"),
                      label="select"),
        AutomatonEdge("sel.proj", "sel.from_kw", consumes=True, match=_sym("*"),
                      after_shift=set_star, label="*"),
        AutomatonEdge("sel.proj", "sel.proj_more", consumes=True, match=_is_ident,
                      after_shift=first_column, label="column name"),
        AutomatonEdge("sel.proj_more", "sel.proj_item", consumes=True, match=_sym(","),
                      label=","),
        AutomatonEdge("sel.proj_more", "sel.source", consumes=True, match=_kw("from"),
                      label="from"),
        AutomatonEdge("sel.proj_item", "sel.proj_more", consumes=True, match=_is_ident,
                      after_shift=next_column, label="column name"),
        AutomatonEdge("sel.from_kw", "sel.source", consumes=True, match=_kw("from"),
                      label="from"),
        AutomatonEdge("sel.source", "sel.complete", consumes=True, match=_is_ident,
                      after_shift=set_table, label="table name"),
        AutomatonEdge("sel.source", "sel.sub_select", consumes=True, match=_sym("("),
                      after_shift=push_frame, label="("),
        AutomatonEdge("sel.sub_select", "sel.proj", consumes=True, match=_kw("select"),
                      label="select"),
        AutomatonEdge("sel.complete", "sel.where_col", consumes=True,
                      match=_kw("where"), label="where"),
        AutomatonEdge("sel.complete", "sel.alias_as", consumes=True, match=_sym(")"),
                      before_shift=only_when_nested, after_shift=pop_frame, label=")"),
        AutomatonEdge("sel.where_col", "sel.where_op", consumes=True, match=_is_ident,
                      after_shift=where_col, label="column name"),
        AutomatonEdge("sel.where_op", "sel.where_val", consumes=True, match=_is_op,
                      after_shift=where_op, label="comparison operator"),
        AutomatonEdge("sel.where_val", "sel.where_done", consumes=True, match=_is_int,
                      after_shift=finish_comparison(lambda t: int(t.text)),
                      label="integer"),
        AutomatonEdge("sel.where_val", "sel.where_done", consumes=True, match=_is_str,
                      after_shift=finish_comparison(lambda t: t.text),
                      label="string literal"),
        AutomatonEdge("sel.where_val", "sel.where_val", consumes=True, match=_sym("-"),
                      before_shift=lambda s, t: not _top(s).negate,
                      after_shift=begin_negate, label="-"),
        AutomatonEdge("sel.where_done", "sel.where_col", consumes=True,
                      match=_kw("and"), label="and"),
        AutomatonEdge("sel.where_done", "sel.alias_as", consumes=True, match=_sym(")"),
                      before_shift=only_when_nested, after_shift=pop_frame, label=")"),
        AutomatonEdge("sel.alias_as", "sel.alias_name", consumes=True, match=_kw("as"),
                      label="as"),
        AutomatonEdge("sel.alias_name", "sel.complete", consumes=True, match=_is_ident,
                      after_shift=install_alias, label="alias"),
    ]
    return build(nodes, edges, "sel.start")


def _scratch_where(prefix: str, assemble: Callable) -> tuple[list, list, str]:
    """Where-clause subgraph over the scratch dict; returns (nodes, edges, entry)."""

    def set_col(store: ContextStore, t: Token) -> None:
        _scratch(store)["where_col"] = t.text

    def set_op(store: ContextStore, t: Token) -> None:
        _scratch(store)["where_op"] = t.text

    def begin_negate(store: ContextStore, t: Token) -> None:
        _scratch(store)["where_negate"] = True

    def finish(value: Callable[[Token], ast.Literal]):
        def hook(store: ContextStore, t: Token) -> None:
            d = _scratch(store)
            literal = value(t)
            if d.pop("where_negate", False):
                literal = -literal
            d["conjuncts"].append(
                ast.Comparison(d["where_col"], d["where_op"], literal))
        return hook

    col = f"{prefix}.where_col"
    op = f"{prefix}.where_op"
    val = f"{prefix}.where_val"
    done = f"{prefix}.where_done"
    nodes = [
        AutomatonNode(col),
        AutomatonNode(op),
        AutomatonNode(val),
        AutomatonNode(done, terminal=True, action=assemble),
    ]
    edges = [
        AutomatonEdge(col, op, consumes=True, match=_is_ident,
                      after_shift=set_col, label="column name"),
        AutomatonEdge(op, val, consumes=True, match=_is_op,
                      after_shift=set_op, label="comparison operator"),
        AutomatonEdge(val, done, consumes=True, match=_is_int,
                      after_shift=finish(lambda t: int(t.text)), label="integer"),
        AutomatonEdge(val, done, consumes=True, match=_is_str,
                      after_shift=finish(lambda t: t.text), label="string literal"),
        AutomatonEdge(val, val, consumes=True, match=_sym("-"),
                      before_shift=lambda s, t: not _scratch(s).get("where_negate"),
                      after_shift=begin_negate, label="-"),
        AutomatonEdge(done, col, consumes=True, match=_kw("and"), label="and"),
    ]
    return nodes, edges, col


def _insert_machine() -> Automaton:
    def set_table(store: ContextStore, t: Token) -> None:
        _scratch(store)["table"] = t.text

    def begin_negate(store: ContextStore, t: Token) -> None:
        _scratch(store)["negate"] = True

    def add_value(value: Callable[[Token], ast.Literal]):
        def hook(store: ContextStore, t: Token) -> None:
            d = _scratch(store)
            literal = value(t)
            if d.pop("negate", False):
                literal = -literal
            d["values"].append(literal)
        return hook

    def assemble(store: ContextStore, t: Token) -> ast.Insert:
        d = _scratch(store)
        return ast.Insert(d["table"], tuple(d["values"]))

    nodes = [
        AutomatonNode("ins.start"),
        AutomatonNode("ins.into"),
        AutomatonNode("ins.table"),
        AutomatonNode("ins.values_kw"),
        AutomatonNode("ins.open"),
        AutomatonNode("ins.value"),
        AutomatonNode("ins.value_done"),
        AutomatonNode("ins.end", terminal=True, action=assemble),
    ]
    edges = [
        AutomatonEdge("ins.start", "ins.into", consumes=True, match=_kw("insert"),
                      label="insert"),
        AutomatonEdge("ins.into", "ins.table", consumes=True, match=_kw("into"),
                      label="into"),
        AutomatonEdge("ins.table", "ins.values_kw", consumes=True, match=_is_ident,
                      after_shift=set_table, label="table name"),
        AutomatonEdge("ins.values_kw", "ins.open", consumes=True, match=_kw("values"),
                      label="values"),
        AutomatonEdge("ins.open", "ins.value", consumes=True, match=_sym("("),
                      label="("),
        AutomatonEdge("ins.value", "ins.value_done", consumes=True, match=_is_int,
                      after_shift=add_value(lambda t: int(t.text)), label="integer"),
        AutomatonEdge("ins.value", "ins.value_done", consumes=True, match=_is_str,
                      after_shift=add_value(lambda t: t.text), label="string literal"),
        AutomatonEdge("ins.value", "ins.value", consumes=True, match=_sym("-"),
                      before_shift=lambda s, t: not _scratch(s).get("negate"),
                      after_shift=begin_negate, label="-"),
        AutomatonEdge("ins.value_done", "ins.value", consumes=True, match=_sym(","),
                      label=","),
        AutomatonEdge("ins.value_done", "ins.end", consumes=True, match=_sym(")"),
                      label=")"),
    ]
    return build(nodes, edges, "ins.start")


def _update_machine() -> Automaton:
    def set_table(store: ContextStore, t: Token) -> None:
        _scratch(store)["table"] = t.text

    def set_column(store: ContextStore, t: Token) -> None:
        _scratch(store)["column"] = t.text

    def begin_negate(store: ContextStore, t: Token) -> None:
        _scratch(store)["negate"] = True

    def finish_literal(value: Callable[[Token], ast.Literal]):
        def hook(store: ContextStore, t: Token) -> None:
            d = _scratch(store)
            literal = value(t)
            if d.pop("negate", False):
                literal = -literal
            d["assignments"].append(ast.Assignment(d["column"], literal))
        return hook

    def expr_column(store: ContextStore, t: Token) -> None:
        _scratch(store)["expr_col"] = t.text

    def expr_sign(store: ContextStore, t: Token) -> None:
        _scratch(store)["expr_sign"] = t.text

    def finish_arith(store: ContextStore, t: Token) -> None:
        d = _scratch(store)
        expr = ast.ColumnPlusLiteral(d["expr_col"], d["expr_sign"], int(t.text))
        d["assignments"].append(ast.Assignment(d["column"], expr))

    def assemble(store: ContextStore, t: Token) -> ast.Update:
        d = _scratch(store)
        return ast.Update(d["table"], tuple(d["assignments"]),
                          _predicate(d["conjuncts"]))

    where_nodes, where_edges, where_entry = _scratch_where("upd", assemble)
    nodes = [
        AutomatonNode("upd.start"),
        AutomatonNode("upd.table"),
        AutomatonNode("upd.set_kw"),
        AutomatonNode("upd.col"),
        AutomatonNode("upd.eq"),
        AutomatonNode("upd.expr"),
        AutomatonNode("upd.expr_sign"),
        AutomatonNode("upd.expr_amount"),
        AutomatonNode("upd.next", terminal=True, action=assemble),
    ] + where_nodes
    edges = [
        AutomatonEdge("upd.start", "upd.table", consumes=True, match=_kw("update"),
                      label="update"),
        AutomatonEdge("upd.table", "upd.set_kw", consumes=True, match=_is_ident,
                      after_shift=set_table, label="table name"),
        AutomatonEdge("upd.set_kw", "upd.col", consumes=True, match=_kw("set"),
                      label="set"),
        AutomatonEdge("upd.col", "upd.eq", consumes=True, match=_is_ident,
                      after_shift=set_column, label="column name"),
        AutomatonEdge("upd.eq", "upd.expr", consumes=True, match=_sym("="),
                      label="="),
        AutomatonEdge("upd.expr", "upd.next", consumes=True, match=_is_int,
                      after_shift=finish_literal(lambda t: int(t.text)),
                      label="integer"),
        AutomatonEdge("upd.expr", "upd.next", consumes=True, match=_is_str,
                      after_shift=finish_literal(lambda t: t.text),
                      label="string literal"),
        AutomatonEdge("upd.expr", "upd.expr", consumes=True, match=_sym("-"),
                      before_shift=lambda s, t: not _scratch(s).get("negate"),
                      after_shift=begin_negate, label="-"),
        AutomatonEdge("upd.expr", "upd.expr_sign", consumes=True, match=_is_ident,
                      before_shift=lambda s, t: not _scratch(s).get("negate"),
                      after_shift=expr_column, label="column name"),
        AutomatonEdge("upd.expr_sign", "upd.expr_amount", consumes=True,
                      match=lambda t: t.kind == "symbol" and t.text in ("+", "-"),
                      after_shift=expr_sign, label="+ or -"),
        AutomatonEdge("upd.expr_amount", "upd.next", consumes=True, match=_is_int,
                      after_shift=finish_arith, label="integer"),
        AutomatonEdge("upd.next", "upd.col", consumes=True, match=_sym(","),
                      label=","),
        AutomatonEdge("upd.next", where_entry, consumes=True, match=_kw("where"),
                      label="where"),
    ] + where_edges
    return build(nodes, edges, "upd.start")


def _delete_machine() -> Automaton:
    def set_table(store: ContextStore, t: Token) -> None:
        _scratch(store)["table"] = t.text

    def assemble(store: ContextStore, t: Token) -> ast.Delete:
        d = _scratch(store)
        return ast.Delete(d["table"], _predicate(d["conjuncts"]))

    where_nodes, where_edges, where_entry = _scratch_where("del", assemble)
    nodes = [
        AutomatonNode("del.start"),
        AutomatonNode("del.from"),
        AutomatonNode("del.table"),
        AutomatonNode("del.done", terminal=True, action=assemble),
    ] + where_nodes
    edges = [
        AutomatonEdge("del.start", "del.from", consumes=True, match=_kw("delete"),
                      label="delete"),
        AutomatonEdge("del.from", "del.table", consumes=True, match=_kw("from"),
                      label="from"),
        AutomatonEdge("del.table", "del.done", consumes=True, match=_is_ident,
                      after_shift=set_table, label="table name"),
        AutomatonEdge("del.done", where_entry, consumes=True, match=_kw("where"),
                      label="where"),
    ] + where_edges
    return build(nodes, edges, "del.start")


def _create_machine() -> Automaton:
    def set_table(store: ContextStore, t: Token) -> None:
        _scratch(store)["table"] = t.text

    def set_col_name(store: ContextStore, t: Token) -> None:
        d = _scratch(store)
        d["col_name"] = t.text
        d["col_type"] = None
        d["col_not_null"] = False
        d["col_pk"] = False

    def set_int_type(store: ContextStore, t: Token) -> None:
        _scratch(store)["col_type"] = ast.INT

    def set_str_width(store: ContextStore, t: Token) -> None:
        width = int(t.text)
        if not 1 <= width <= 4096:
            raise ParseError(f"str width must be in 1..4096, got {width}")
        _scratch(store)["col_type"] = ast.STR(width)

    def set_not_null(store: ContextStore, t: Token) -> None:
        _scratch(store)["col_not_null"] = True

    def set_pk(store: ContextStore, t: Token) -> None:
        _scratch(store)["col_pk"] = True

    def flush_column(store: ContextStore, t: Token) -> None:
        d = _scratch(store)
        d["columns"].append(ast.ColumnDef(
            d["col_name"], d["col_type"], d["col_not_null"], d["col_pk"]))

    def check_col(store: ContextStore, t: Token) -> None:
        _scratch(store)["check_col"] = t.text

    def check_op(store: ContextStore, t: Token) -> None:
        _scratch(store)["check_op"] = t.text

    def begin_negate(store: ContextStore, t: Token) -> None:
        _scratch(store)["negate"] = True

    def check_lit(value: Callable[[Token], ast.Literal]):
        def hook(store: ContextStore, t: Token) -> None:
            d = _scratch(store)
            literal = value(t)
            if d.pop("negate", False):
                literal = -literal
            d["check_lit"] = literal
        return hook

    def flush_check(store: ContextStore, t: Token) -> None:
        d = _scratch(store)
        d["checks"].append(
            ast.CheckDef(d["check_col"], d["check_op"], d["check_lit"]))

    def assemble_table(store: ContextStore, t: Token) -> ast.CreateTable:
        d = _scratch(store)
        columns = tuple(d["columns"])
        if not columns:
            raise ParseError("a table needs at least one column")
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            raise ParseError("duplicate column name in create table")
        if sum(1 for c in columns if c.primary_key) > 1:
            raise ParseError("at most one primary key column per table")
        return ast.CreateTable(d["table"], columns, tuple(d["checks"]))

    def assemble_index(store: ContextStore, t: Token) -> ast.CreateIndex:
        d = _scratch(store)
        return ast.CreateIndex(d["table"], d["column"])

    def set_index_col(store: ContextStore, t: Token) -> None:
        _scratch(store)["column"] = t.text

    nodes = [
        AutomatonNode("cr.start"),
        AutomatonNode("cr.kind"),
        AutomatonNode("ct.name"),
        AutomatonNode("ct.open"),
        AutomatonNode("ct.item"),
        AutomatonNode("ct.type"),
        AutomatonNode("ct.str_open"),
        AutomatonNode("ct.str_width"),
        AutomatonNode("ct.str_close"),
        AutomatonNode("ct.mods"),
        AutomatonNode("ct.null_kw"),
        AutomatonNode("ct.key_kw"),
        AutomatonNode("ct.end", terminal=True, action=assemble_table),
        AutomatonNode("ck.open"),
        AutomatonNode("ck.col"),
        AutomatonNode("ck.op"),
        AutomatonNode("ck.val"),
        AutomatonNode("ck.close"),
        AutomatonNode("ck.next"),
        AutomatonNode("ci.on"),
        AutomatonNode("ci.table"),
        AutomatonNode("ci.open"),
        AutomatonNode("ci.col"),
        AutomatonNode("ci.close"),
        AutomatonNode("ci.end", terminal=True, action=assemble_index),
    ]
    edges = [
        AutomatonEdge("cr.start", "cr.kind", consumes=True, match=_kw("create"),
                      label="create"),
        AutomatonEdge("cr.kind", "ct.name", consumes=True, match=_kw("table"),
                      label="table"),
        AutomatonEdge("cr.kind", "ci.on", consumes=True, match=_kw("index"),
                      label="index"),
        # create table <name> ( <column or check> [, ...] )
        AutomatonEdge("ct.name", "ct.open", consumes=True, match=_is_ident,
                      after_shift=set_table, label="table name"),
        AutomatonEdge("ct.open", "ct.item", consumes=True, match=_sym("("),
                      label="("),
        AutomatonEdge("ct.item", "ct.type", consumes=True, match=_is_ident,
                      after_shift=set_col_name, label="column name"),
        AutomatonEdge("ct.item", "ck.open", consumes=True, match=_kw("check"),
                      label="check"),
        AutomatonEdge("ct.type", "ct.mods", consumes=True, match=_kw("int"),
                      after_shift=set_int_type, label="int"),
        AutomatonEdge("ct.type", "ct.str_open", consumes=True, match=_kw("str"),
                      label="str"),
        AutomatonEdge("ct.str_open", "ct.str_width", consumes=True, match=_sym("("),
                      label="("),
        AutomatonEdge("ct.str_width", "ct.str_close", consumes=True, match=_is_int,
                      after_shift=set_str_width, label="width"),
        AutomatonEdge("ct.str_close", "ct.mods", consumes=True, match=_sym(")"),
                      label=")"),
        AutomatonEdge("ct.mods", "ct.null_kw", consumes=True, match=_kw("not"),
                      label="not"),
        AutomatonEdge("ct.null_kw", "ct.mods", consumes=True, match=_kw("null"),
                      after_shift=set_not_null, label="null"),
        AutomatonEdge("ct.mods", "ct.key_kw", consumes=True, match=_kw("primary"),
                      label="primary"),
        AutomatonEdge("ct.key_kw", "ct.mods", consumes=True, match=_kw("key"),
                      after_shift=set_pk, label="key"),
        AutomatonEdge("ct.mods", "ct.item", consumes=True, match=_sym(","),
                      after_shift=flush_column, label=","),
        AutomatonEdge("ct.mods", "ct.end", consumes=True, match=_sym(")"),
                      after_shift=flush_column, label=")"),
        # check ( <column> <op> <literal> )
        AutomatonEdge("ck.open", "ck.col", consumes=True, match=_sym("("),
                      label="("),
        AutomatonEdge("ck.col", "ck.op", consumes=True, match=_is_ident,
                      after_shift=check_col, label="column name"),
        AutomatonEdge("ck.op", "ck.val", consumes=True, match=_is_op,
                      after_shift=check_op, label="comparison operator"),
        AutomatonEdge("ck.val", "ck.close", consumes=True, match=_is_int,
                      after_shift=check_lit(lambda t: int(t.text)), label="integer"),
        AutomatonEdge("ck.val", "ck.close", consumes=True, match=_is_str,
                      after_shift=check_lit(lambda t: t.text), label="string literal"),
        AutomatonEdge("ck.val", "ck.val", consumes=True, match=_sym("-"),
                      before_shift=lambda s, t: not _scratch(s).get("negate"),
                      after_shift=begin_negate, label="-"),
        AutomatonEdge("ck.close", "ck.next", consumes=True, match=_sym(")"),
                      after_shift=flush_check, label=")"),
        AutomatonEdge("ck.next", "ct.item", consumes=True, match=_sym(","),
                      label=","),
        AutomatonEdge("ck.next", "ct.end", consumes=True, match=_sym(")"),
                      label=")"),
        # create index on <table> ( <column> )
        AutomatonEdge("ci.on", "ci.table", consumes=True, match=_kw("on"),
                      label="on"),
        AutomatonEdge("ci.table", "ci.open", consumes=True, match=_is_ident,
                      after_shift=set_table, label="table name"),
        AutomatonEdge("ci.open", "ci.col", consumes=True, match=_sym("("),
                      label="("),
        AutomatonEdge("ci.col", "ci.close", consumes=True, match=_is_ident,
                      after_shift=set_index_col, label="column name"),
        AutomatonEdge("ci.close", "ci.end", consumes=True, match=_sym(")"),
                      label=")"),
    ]
    return build(nodes, edges, "cr.start")


_MACHINES: dict[str, Automaton] = {
    "select": _select_machine(),
    "insert": _insert_machine(),
    "update": _update_machine(),
    "delete": _delete_machine(),
    "create": _create_machine(),
}


def _fresh_scratch() -> dict:
    return {"values": [], "assignments": [], "conjuncts": [],
            "columns": [], "checks": []}


def parse_tokens(tokens: list[Token], store: Optional[ContextStore] = None,
                 step_limit: Optional[int] = None) -> ast.Statement:
    """Parse a token list into a Statement.

    Error positions are token indexes in [0, len(tokens)].  A single trailing
    semicolon is permitted; any other leftover input is an error.
    """
    if tokens and tokens[-1].kind == "symbol" and tokens[-1].text == ";":
        tokens = tokens[:-1]
    if not tokens:
        raise ParseError("empty statement", position=0)
    head = tokens[0]
    machine = _MACHINES.get(head.text) if head.kind == "keyword" else None
    if machine is None:
        raise ParseError(f"expected a statement keyword, got {head.text!r}",
                         position=0)
    if store is None:
        store = ContextStore()
    if head.text == "select":
        store.put(FRAMES_KEY, [_Frame()])
        store.put(PENDING_KEY, [])
    else:
        store.put(SCRATCH_KEY, _fresh_scratch())
    try:
        result = machine.run(tokens, store, step_limit=step_limit)
    except RejectError as exc:
        got = tokens[exc.position].text if exc.position < len(tokens) else "end of input"
        hint = f"; expected one of: {', '.join(exc.expected)}" if exc.expected else ""
        raise ParseError(f"syntax error at token {exc.position} ({got!r}){hint}",
                         position=exc.position, expected=exc.expected) from None
    if result.tokens_consumed != len(tokens):
        pos = result.tokens_consumed
        raise ParseError(
            f"trailing input at token {pos} ({tokens[pos].text!r})", position=pos)
    if head.text == "select" and store.depth(FRAMES_KEY) != 1:
        raise NestingError("subquery frames left unclosed at accept")
    return result.value


def parse(text: str, step_limit: Optional[int] = None) -> ast.Statement:
    """Tokenize and parse one SQL statement."""
    return parse_tokens(tokenize(text), step_limit=step_limit)
