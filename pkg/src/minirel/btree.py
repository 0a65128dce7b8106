"""In-memory B+ tree index, one per indexed column.

``order`` is the maximum number of children of an internal node; every node
holds at most order-1 keys and every node but the root at least
ceil(order/2)-1.  Record numbers live only in leaves, as a sorted list per
key (duplicate keys are expected: many rows may share a column value), and
the leaves form a forward-linked sorted chain for range scans.

Trees are fully memory-resident.  They persist to a line-oriented index file
(``key<TAB>recno[,recno...]``, keys ascending, string keys escaped like the
data files) and can always be rebuilt from a table scan instead, so a missing
or corrupt index file costs a rebuild, never correctness.

No internal latching: callers serialize mutations with the owning table's
lock, reads run under its shared mode.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right, insort
from pathlib import Path
from typing import Iterator, Optional, Union

from .errors import MinirelError
from .storage import Table, escape_text, unescape_text

DEFAULT_ORDER = 32

Key = Union[int, str]


class DuplicateEntry(MinirelError):
    pass


class NoSuchEntry(MinirelError):
    pass


class BoundsInverted(MinirelError):
    pass


class CorruptIndexFile(MinirelError):
    pass


class _Leaf:
    __slots__ = ("keys", "records", "next")

    def __init__(self) -> None:
        self.keys: list[Key] = []
        self.records: list[list[int]] = []
        self.next: Optional[_Leaf] = None


class _Internal:
    __slots__ = ("keys", "children")

    def __init__(self) -> None:
        self.keys: list[Key] = []
        self.children: list = []


class BPlusTree:
    def __init__(self, order: int = DEFAULT_ORDER, key_kind: str = "int") -> None:
        if order < 3:
            raise ValueError("order must be at least 3")
        if key_kind not in ("int", "str"):
            raise ValueError(f"unknown key kind {key_kind!r}")
        self.order = order
        self.key_kind = key_kind
        self.root: Union[_Leaf, _Internal] = _Leaf()

    @property
    def min_keys(self) -> int:
        # ceil(order/2) - 1, the occupancy floor for every non-root node
        return (self.order + 1) // 2 - 1

    def _check_key(self, key: Key) -> None:
        if self.key_kind == "int":
            if isinstance(key, bool) or not isinstance(key, int):
                raise TypeError(f"index key must be int, got {type(key).__name__}")
        elif not isinstance(key, str):
            raise TypeError(f"index key must be str, got {type(key).__name__}")

    # -- queries ----------------------------------------------------------

    def _find_leaf(self, key: Key) -> _Leaf:
        node = self.root
        while isinstance(node, _Internal):
            node = node.children[bisect_right(node.keys, key)]
        return node

    def lookup_eq(self, key: Key) -> list[int]:
        self._check_key(key)
        leaf = self._find_leaf(key)
        i = bisect_left(leaf.keys, key)
        if i < len(leaf.keys) and leaf.keys[i] == key:
            return list(leaf.records[i])
        return []

    def lookup_range(self, lo: Optional[Key], hi: Optional[Key],
                     lo_inclusive: bool = True,
                     hi_inclusive: bool = True) -> list[int]:
        """Record numbers for keys within the bounds, in key order.

        A bound of None leaves that side open.
        """
        if lo is not None:
            self._check_key(lo)
        if hi is not None:
            self._check_key(hi)
        if lo is not None and hi is not None and lo > hi:
            raise BoundsInverted(f"range bounds inverted: {lo!r} > {hi!r}")
        out: list[int] = []
        leaf = self._leftmost_leaf() if lo is None else self._find_leaf(lo)
        while leaf is not None:
            for i, key in enumerate(leaf.keys):
                if lo is not None and (key < lo or (key == lo and not lo_inclusive)):
                    continue
                if hi is not None and (key > hi or (key == hi and not hi_inclusive)):
                    return out
                out.extend(leaf.records[i])
            leaf = leaf.next
        return out

    def _leftmost_leaf(self) -> _Leaf:
        node = self.root
        while isinstance(node, _Internal):
            node = node.children[0]
        return node

    def items(self) -> Iterator[tuple[Key, list[int]]]:
        """All (key, record list) pairs in ascending key order."""
        leaf: Optional[_Leaf] = self._leftmost_leaf()
        while leaf is not None:
            yield from zip(leaf.keys, leaf.records)
            leaf = leaf.next

    def mapping(self) -> dict[Key, list[int]]:
        return {key: list(records) for key, records in self.items()}

    def height(self) -> int:
        height = 1
        node = self.root
        while isinstance(node, _Internal):
            height += 1
            node = node.children[0]
        return height

    def is_empty(self) -> bool:
        return isinstance(self.root, _Leaf) and not self.root.keys

    # -- insertion --------------------------------------------------------

    def insert(self, key: Key, record_number: int) -> None:
        self._check_key(key)
        split = self._insert(self.root, key, record_number)
        if split is not None:
            separator, right = split
            new_root = _Internal()
            new_root.keys = [separator]
            new_root.children = [self.root, right]
            self.root = new_root

    def _insert(self, node, key: Key, record_number: int):
        if isinstance(node, _Leaf):
            i = bisect_left(node.keys, key)
            if i < len(node.keys) and node.keys[i] == key:
                records = node.records[i]
                j = bisect_left(records, record_number)
                if j < len(records) and records[j] == record_number:
                    raise DuplicateEntry(
                        f"entry ({key!r}, {record_number}) already present")
                records.insert(j, record_number)
                return None
            node.keys.insert(i, key)
            node.records.insert(i, [record_number])
            if len(node.keys) <= self.order - 1:
                return None
            return self._split_leaf(node)
        i = bisect_right(node.keys, key)
        split = self._insert(node.children[i], key, record_number)
        if split is None:
            return None
        separator, right_child = split
        node.keys.insert(i, separator)
        node.children.insert(i + 1, right_child)
        if len(node.children) <= self.order:
            return None
        return self._split_internal(node)

    def _split_leaf(self, node: _Leaf):
        mid = len(node.keys) // 2
        right = _Leaf()
        right.keys = node.keys[mid:]
        right.records = node.records[mid:]
        del node.keys[mid:]
        del node.records[mid:]
        right.next = node.next
        node.next = right
        # the separator is copied up; the key stays in the right leaf
        return right.keys[0], right

    def _split_internal(self, node: _Internal):
        mid = len(node.keys) // 2
        separator = node.keys[mid]
        right = _Internal()
        right.keys = node.keys[mid + 1:]
        right.children = node.children[mid + 1:]
        del node.keys[mid:]
        del node.children[mid + 1:]
        # the separator moves up; internal keys are routing-only
        return separator, right

    # -- removal ----------------------------------------------------------

    def remove(self, key: Key, record_number: int) -> None:
        self._check_key(key)
        self._remove(self.root, key, record_number)
        if isinstance(self.root, _Internal) and len(self.root.children) == 1:
            self.root = self.root.children[0]

    def _remove(self, node, key: Key, record_number: int) -> None:
        if isinstance(node, _Leaf):
            i = bisect_left(node.keys, key)
            if i >= len(node.keys) or node.keys[i] != key:
                raise NoSuchEntry(f"no entry for key {key!r}")
            records = node.records[i]
            j = bisect_left(records, record_number)
            if j >= len(records) or records[j] != record_number:
                raise NoSuchEntry(
                    f"no entry ({key!r}, {record_number}) in the index")
            records.pop(j)
            if not records:
                node.keys.pop(i)
                node.records.pop(i)
            return
        i = bisect_right(node.keys, key)
        child = node.children[i]
        self._remove(child, key, record_number)
        if len(child.keys) < self.min_keys:
            self._rebalance(node, i)

    def _rebalance(self, parent: _Internal, i: int) -> None:
        child = parent.children[i]
        left = parent.children[i - 1] if i > 0 else None
        right = parent.children[i + 1] if i + 1 < len(parent.children) else None
        if left is not None and len(left.keys) > self.min_keys:
            self._borrow_from_left(parent, i, left, child)
        elif right is not None and len(right.keys) > self.min_keys:
            self._borrow_from_right(parent, i, child, right)
        elif left is not None:
            self._merge(parent, i - 1, left, child)
        else:
            self._merge(parent, i, child, right)

    def _borrow_from_left(self, parent, i, left, child) -> None:
        if isinstance(child, _Leaf):
            child.keys.insert(0, left.keys.pop())
            child.records.insert(0, left.records.pop())
            parent.keys[i - 1] = child.keys[0]
        else:
            child.keys.insert(0, parent.keys[i - 1])
            parent.keys[i - 1] = left.keys.pop()
            child.children.insert(0, left.children.pop())

    def _borrow_from_right(self, parent, i, child, right) -> None:
        if isinstance(child, _Leaf):
            child.keys.append(right.keys.pop(0))
            child.records.append(right.records.pop(0))
            parent.keys[i] = right.keys[0]
        else:
            child.keys.append(parent.keys[i])
            parent.keys[i] = right.keys.pop(0)
            child.children.append(right.children.pop(0))

    def _merge(self, parent: _Internal, left_index: int, left, right) -> None:
        # merge right into left; the parent loses separator left_index
        if isinstance(left, _Leaf):
            left.keys.extend(right.keys)
            left.records.extend(right.records)
            left.next = right.next
        else:
            left.keys.append(parent.keys[left_index])
            left.keys.extend(right.keys)
            left.children.extend(right.children)
        parent.keys.pop(left_index)
        parent.children.pop(left_index + 1)


# ---------------------------------------------------------------------------
# Persistence.

def _render_key(key: Key) -> str:
    if isinstance(key, str):
        return escape_text(key)
    return str(key)


def persist_tree(tree: BPlusTree, path) -> None:
    lines = []
    for key, records in tree.items():
        lines.append(f"{_render_key(key)}\t{','.join(map(str, records))}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def load_tree(path, order: int, key_kind: str) -> BPlusTree:
    tree = BPlusTree(order, key_kind)
    previous: Optional[Key] = None
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        key_text, sep, records_text = line.partition("\t")
        if not sep:
            raise CorruptIndexFile(f"{path}: line {lineno} has no separator")
        try:
            key: Key = (int(key_text) if key_kind == "int"
                        else unescape_text(key_text))
        except (ValueError, MinirelError):
            raise CorruptIndexFile(
                f"{path}: line {lineno} has a bad key {key_text!r}") from None
        if previous is not None and key <= previous:
            raise CorruptIndexFile(f"{path}: keys out of order at line {lineno}")
        previous = key
        seen: list[int] = []
        for part in records_text.split(","):
            try:
                record_number = int(part)
            except ValueError:
                raise CorruptIndexFile(
                    f"{path}: line {lineno} has a bad record reference "
                    f"{part!r}") from None
            if record_number < 0 or (seen and record_number <= seen[-1]):
                raise CorruptIndexFile(
                    f"{path}: line {lineno} has a bad record reference "
                    f"{record_number}")
            seen.append(record_number)
            tree.insert(key, record_number)
        if not seen:
            raise CorruptIndexFile(f"{path}: line {lineno} has no records")
    return tree


def rebuild_tree(table: Table, column: str, order: int) -> BPlusTree:
    """Full scan of the table's valid slots into a fresh tree."""
    schema = table.schema
    col_index = schema.column_index(column)
    key_kind = schema.columns[col_index].type.kind
    tree = BPlusTree(order, key_kind)
    for record_number in range(table.slot_count()):
        slot = table.read_slot(record_number)
        if slot.valid:
            tree.insert(slot.values[col_index], record_number)
    return tree


class IndexManager:
    """All trees of one database: map (table, column) -> tree.

    Startup either loads each ``<table>.<column>.idx`` file or rebuilds the
    tree from the table; both paths end with every indexed column resident.
    """

    def __init__(self, order: int = DEFAULT_ORDER) -> None:
        self.order = order
        self.indexes: dict[tuple[str, str], BPlusTree] = {}

    def get(self, table: str, column: str) -> Optional[BPlusTree]:
        return self.indexes.get((table, column))

    def register(self, table: str, column: str, tree: BPlusTree) -> None:
        self.indexes[(table, column)] = tree

    def trees_for(self, table: str) -> list[tuple[str, BPlusTree]]:
        return [(column, tree) for (name, column), tree in self.indexes.items()
                if name == table]

    @staticmethod
    def index_path(base_dir, table: str, column: str) -> Path:
        return Path(base_dir) / f"{table}.{column}.idx"

    def load_or_rebuild(self, table: Table, column: str, base_dir) -> BPlusTree:
        path = self.index_path(base_dir, table.name, column)
        key_kind = table.schema.columns[table.schema.column_index(column)].type.kind
        tree: Optional[BPlusTree] = None
        if path.exists():
            try:
                tree = load_tree(path, self.order, key_kind)
            except CorruptIndexFile:
                tree = None
        if tree is None:
            tree = rebuild_tree(table, column, self.order)
        self.register(table.name, column, tree)
        return tree

    def persist_all(self, base_dir) -> None:
        for (table, column), tree in self.indexes.items():
            persist_tree(tree, self.index_path(base_dir, table, column))
