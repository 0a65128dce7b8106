"""Generic event-driven automaton framework.

A machine is a graph of nodes joined by guarded edges.  Edges may consume an
input token or shift spontaneously, and each edge carries two event hooks:
``before_shift`` runs before the move and may veto it, ``after_shift`` runs
once the move is done.  Every run owns a :class:`ContextStore`, a string-keyed
bag of heterogeneous values the hooks read and mutate.  Putting a stack into
the store turns the machine into a pushdown automaton; putting counters and a
loop-back edge into it gives full while-loop power, which is why every run is
bounded by ``step_limit``.

The SQL frontend builds its parser machines on this module, and two small
demonstration machines live here: a parenthesis matcher driven by a store
stack, and a while-loop interpreter that can run forever on a true condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

from .errors import MachineDefinitionError, RejectError, StepLimitExceeded

DEFAULT_STEP_LIMIT = 1_000_000


class DuplicateNodeId(MachineDefinitionError):
    pass


class DanglingEdge(MachineDefinitionError):
    pass


class MissingStart(MachineDefinitionError):
    pass


class ContextStore:
    """String-keyed heterogeneous store attached to one automaton run.

    Reading an absent key is an error, never a silent default; that surfaces
    grammar-action bugs at the point of the bad read.  ``push``/``pop`` treat
    the value under a key as a stack (``push`` creates the stack on first
    use, ``pop`` of an absent or empty stack is an error).
    """

    def __init__(self) -> None:
        self._entries: dict[str, Any] = {}

    def put(self, key: str, value: Any) -> None:
        self._entries[key] = value

    def get(self, key: str) -> Any:
        try:
            return self._entries[key]
        except KeyError:
            raise KeyError(f"context store has no entry {key!r}") from None

    def contains(self, key: str) -> bool:
        return key in self._entries

    def remove(self, key: str) -> Any:
        try:
            return self._entries.pop(key)
        except KeyError:
            raise KeyError(f"context store has no entry {key!r}") from None

    def push(self, key: str, value: Any) -> None:
        self._entries.setdefault(key, []).append(value)

    def pop(self, key: str) -> Any:
        stack = self.get(key)
        if not stack:
            raise IndexError(f"pop from empty stack {key!r}")
        return stack.pop()

    def depth(self, key: str) -> int:
        return len(self.get(key))

    def as_dict(self) -> dict[str, Any]:
        return dict(self._entries)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"ContextStore({self._entries!r})"


# Hook signatures.  A before_shift returning exactly False vetoes the shift;
# any other result (None included) allows it.
Matcher = Callable[[Any], bool]
BeforeShift = Callable[[ContextStore, Any], Any]
AfterShift = Callable[[ContextStore, Any], None]
NodeAction = Callable[[ContextStore, Any], Any]


@dataclass(frozen=True)
class AutomatonNode:
    id: str
    terminal: bool = False
    action: Optional[NodeAction] = None


@dataclass(frozen=True)
class AutomatonEdge:
    from_id: str
    to_id: str
    consumes: bool = False
    match: Optional[Matcher] = None
    before_shift: Optional[BeforeShift] = None
    after_shift: Optional[AfterShift] = None
    label: Optional[str] = None


@dataclass(frozen=True)
class RunResult:
    value: Any
    final_node: str
    steps_taken: int
    tokens_consumed: int


class Automaton:
    """An immutable machine definition, shareable across concurrent runs.

    All per-run state (cursor, current node, store) lives in :meth:`run`'s
    locals and in the caller's store, so one definition can serve any number
    of threads at once.
    """

    def __init__(self, nodes: Sequence[AutomatonNode], edges: Sequence[AutomatonEdge],
                 start_id: str, step_limit: int = DEFAULT_STEP_LIMIT) -> None:
        if step_limit <= 0:
            raise MachineDefinitionError("step_limit must be positive")
        self._nodes: dict[str, AutomatonNode] = {}
        for node in nodes:
            if node.id in self._nodes:
                raise DuplicateNodeId(f"duplicate node id {node.id!r}")
            self._nodes[node.id] = node
        if start_id not in self._nodes:
            raise MissingStart(f"start node {start_id!r} is not in the node set")
        # Adjacency preserves registration order; the runner scans it as-is.
        self._adjacency: dict[str, list[AutomatonEdge]] = {}
        for edge in edges:
            for endpoint in (edge.from_id, edge.to_id):
                if endpoint not in self._nodes:
                    raise DanglingEdge(f"edge {edge.from_id!r}->{edge.to_id!r} references unknown node {endpoint!r}")
            self._adjacency.setdefault(edge.from_id, []).append(edge)
        self._start_id = start_id
        self._step_limit = step_limit

    @property
    def start_id(self) -> str:
        return self._start_id

    @property
    def step_limit(self) -> int:
        return self._step_limit

    def run(self, tokens: Sequence[Any], store: Optional[ContextStore] = None,
            step_limit: Optional[int] = None) -> RunResult:
        """Drive the machine over ``tokens`` until it halts.

        Stepping rule: at the current node, scan outgoing edges in
        registration order.  An edge is eligible when it consumes nothing, or
        when a next token exists and the edge's match accepts it.  The first
        eligible edge whose before_shift allows it fires: the machine moves,
        consumes the token iff the edge consumes, runs after_shift, then the
        destination node's action.  A vetoed edge falls through to later ones.

        Halting: success when the current node is terminal and either the
        input is exhausted or no edge is eligible.  Anything else that cannot
        fire is a reject.  Each shift is one step; the run raises
        StepLimitExceeded rather than fire shift number step_limit + 1 (the
        vetoing-or-allowing hooks of that shift have already run by then).
        """
        if store is None:
            store = ContextStore()
        limit = self._step_limit if step_limit is None else step_limit
        node = self._nodes[self._start_id]
        cursor = 0
        steps = 0
        value: Any = None
        total = len(tokens)
        while True:
            if node.terminal and cursor >= total:
                return RunResult(value, node.id, steps, cursor)
            fired: Optional[AutomatonEdge] = None
            fired_token: Any = None
            saw_eligible = False
            for edge in self._adjacency.get(node.id, ()):
                if edge.consumes:
                    if cursor >= total:
                        continue
                    token = tokens[cursor]
                    if edge.match is not None and not edge.match(token):
                        continue
                else:
                    token = None
                saw_eligible = True
                if edge.before_shift is not None and edge.before_shift(store, token) is False:
                    continue
                fired, fired_token = edge, token
                break
            if fired is None:
                if node.terminal and not saw_eligible:
                    return RunResult(value, node.id, steps, cursor)
                raise RejectError(
                    f"no eligible shift from node {node.id!r} at token {cursor} of {total}",
                    node_id=node.id,
                    position=cursor,
                    expected=self.expected_at(node.id),
                )
            if steps >= limit:
                raise StepLimitExceeded(
                    f"machine did not halt within {limit} steps", steps_taken=steps)
            steps += 1
            if fired.consumes:
                cursor += 1
            node = self._nodes[fired.to_id]
            if fired.after_shift is not None:
                fired.after_shift(store, fired_token)
            if node.action is not None:
                result = node.action(store, fired_token)
                if node.terminal:
                    value = result
        # unreachable

    def expected_at(self, node_id: str) -> tuple[str, ...]:
        """Labels of the consuming edges out of a node, for error messages."""
        labels = []
        for edge in self._adjacency.get(node_id, ()):
            if edge.consumes and edge.label and edge.label not in labels:
                labels.append(edge.label)
        return tuple(labels)


def build(nodes: Sequence[AutomatonNode], edges: Sequence[AutomatonEdge],
          start_id: str, step_limit: int = DEFAULT_STEP_LIMIT) -> Automaton:
    """Validate and assemble a machine; edge registration order is preserved."""
    return Automaton(nodes, edges, start_id, step_limit)


# ---------------------------------------------------------------------------
# Demonstration machine 1: balanced parentheses via a stack in the store.

PAREN_STACK_KEY = "parens"


def balanced_parentheses_machine(step_limit: int = DEFAULT_STEP_LIMIT) -> Automaton:
    """One terminal node with two consuming self-loops over "(" and ")".

    The open edge pushes onto a store stack; the close edge's before_shift
    vetoes the shift when the stack is empty, otherwise pops.  The terminal
    action reports whether the stack is empty.  Acceptance therefore needs
    both a successful halt and an empty stack (see parentheses_balanced).
    """

    def push_open(store: ContextStore, token: Any) -> None:
        store.push(PAREN_STACK_KEY, token)

    def pop_close(store: ContextStore, token: Any) -> Any:
        if not store.contains(PAREN_STACK_KEY) or store.depth(PAREN_STACK_KEY) == 0:
            return False
        store.pop(PAREN_STACK_KEY)
        return True

    def stack_empty(store: ContextStore, token: Any) -> bool:
        return not store.contains(PAREN_STACK_KEY) or store.depth(PAREN_STACK_KEY) == 0

    nodes = [AutomatonNode("S", terminal=True, action=stack_empty)]
    edges = [
        AutomatonEdge("S", "S", consumes=True, match=lambda t: t == "(",
                      before_shift=push_open, label='"("'),
        AutomatonEdge("S", "S", consumes=True, match=lambda t: t == ")",
                      before_shift=pop_close, label='")"'),
    ]
    return build(nodes, edges, "S", step_limit)


def parentheses_balanced(text: str, step_limit: int = DEFAULT_STEP_LIMIT) -> bool:
    """Run the parenthesis machine over ``text``; True iff it is balanced.

    Accepts exactly when the run halts successfully having consumed every
    character and the store stack ends empty (the usual PDA criterion).
    """
    machine = balanced_parentheses_machine(step_limit)
    store = ContextStore()
    store.put(PAREN_STACK_KEY, [])
    try:
        result = machine.run(list(text), store)
    except RejectError:
        return False
    return result.tokens_consumed == len(text) and store.depth(PAREN_STACK_KEY) == 0


# ---------------------------------------------------------------------------
# Demonstration machine 2: a while-loop interpreter.
#
# Token language:  while ( <var-or-int> < <int> ) { <var> = <var> + <int> }
# The condition is parsed into a Condition object held in the store; once the
# program text is consumed, a loop-back edge guarded on that condition runs
# the body action until the condition fails (or forever, bounded only by the
# step limit).

WHILE_VARS_KEY = "vars"
_WHILE_COND_KEY = "condition"
_WHILE_LHS_KEY = "cond.lhs"
_WHILE_TARGET_KEY = "body.target"
_WHILE_SOURCE_KEY = "body.source"
_WHILE_INC_KEY = "body.increment"


@dataclass(frozen=True)
class Condition:
    """Comparison ``lhs < bound`` where lhs is a variable name or a literal."""

    lhs: str
    bound: int

    def holds(self, variables: dict[str, int]) -> bool:
        if _is_int(self.lhs):
            left = int(self.lhs)
        else:
            left = variables[self.lhs]
        return left < self.bound


def _is_int(text: str) -> bool:
    body = text[1:] if text[:1] == "-" else text
    return body.isdigit()


def _is_name(text: str) -> bool:
    return text.isidentifier()


def while_interpreter_machine(step_limit: int = DEFAULT_STEP_LIMIT) -> Automaton:
    def note(key: str) -> AfterShift:
        def hook(store: ContextStore, token: Any) -> None:
            store.put(key, token)
        return hook

    def install_condition(store: ContextStore, token: Any) -> None:
        store.put(_WHILE_COND_KEY, Condition(store.get(_WHILE_LHS_KEY), int(token)))

    def condition_true(store: ContextStore, token: Any) -> Any:
        return store.get(_WHILE_COND_KEY).holds(store.get(WHILE_VARS_KEY))

    def condition_false(store: ContextStore, token: Any) -> Any:
        return not store.get(_WHILE_COND_KEY).holds(store.get(WHILE_VARS_KEY))

    def run_body(store: ContextStore, token: Any) -> None:
        variables = store.get(WHILE_VARS_KEY)
        source = variables[store.get(_WHILE_SOURCE_KEY)]
        variables[store.get(_WHILE_TARGET_KEY)] = source + int(store.get(_WHILE_INC_KEY))

    def final_value(store: ContextStore, token: Any) -> int:
        return store.get(WHILE_VARS_KEY)[store.get(_WHILE_TARGET_KEY)]

    nodes = [AutomatonNode(f"n{i}") for i in range(14)]
    nodes.append(AutomatonNode("body", action=run_body))
    nodes.append(AutomatonNode("done", terminal=True, action=final_value))

    def lit(text: str) -> Matcher:
        return lambda t: t == text

    edges = [
        AutomatonEdge("n0", "n1", consumes=True, match=lit("while"), label='"while"'),
        AutomatonEdge("n1", "n2", consumes=True, match=lit("("), label='"("'),
        AutomatonEdge("n2", "n3", consumes=True, match=lambda t: _is_name(t) or _is_int(t),
                      after_shift=note(_WHILE_LHS_KEY), label="variable or integer"),
        AutomatonEdge("n3", "n4", consumes=True, match=lit("<"), label='"<"'),
        AutomatonEdge("n4", "n5", consumes=True, match=_is_int,
                      after_shift=install_condition, label="integer"),
        AutomatonEdge("n5", "n6", consumes=True, match=lit(")"), label='")"'),
        AutomatonEdge("n6", "n7", consumes=True, match=lit("{"), label='"{"'),
        AutomatonEdge("n7", "n8", consumes=True, match=_is_name,
                      after_shift=note(_WHILE_TARGET_KEY), label="variable"),
        AutomatonEdge("n8", "n9", consumes=True, match=lit("="), label='"="'),
        AutomatonEdge("n9", "n10", consumes=True, match=_is_name,
                      after_shift=note(_WHILE_SOURCE_KEY), label="variable"),
        AutomatonEdge("n10", "n11", consumes=True, match=lit("+"), label='"+"'),
        AutomatonEdge("n11", "n12", consumes=True, match=_is_int,
                      after_shift=note(_WHILE_INC_KEY), label="integer"),
        AutomatonEdge("n12", "n13", consumes=True, match=lit("}"), label='"}"'),
        # n13 is the loop head: the whole program text is consumed by the
        # closing brace, so everything from here on shifts spontaneously.
        AutomatonEdge("n13", "body", before_shift=condition_true),
        AutomatonEdge("body", "n13"),
        AutomatonEdge("n13", "done", before_shift=condition_false),
    ]
    return build(nodes, edges, "n0", step_limit)


def run_while_program(text: str, variables: Optional[dict[str, int]] = None,
                      step_limit: int = DEFAULT_STEP_LIMIT) -> RunResult:
    """Tokenize ``text`` on whitespace and run the while machine over it.

    ``variables`` seeds the store's variable table; the table is mutated in
    place by loop iterations, so pass a dict you are happy to inspect after.
    """
    machine = while_interpreter_machine(step_limit)
    store = ContextStore()
    store.put(WHILE_VARS_KEY, variables if variables is not None else {})
    return machine.run(text.split(), store)
