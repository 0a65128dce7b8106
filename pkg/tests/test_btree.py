import random
from bisect import insort

import pytest

from minirel import ast_nodes as ast
from minirel.btree import (
    BoundsInverted,
    BPlusTree,
    CorruptIndexFile,
    DuplicateEntry,
    IndexManager,
    NoSuchEntry,
    _Internal,
    _Leaf,
    load_tree,
    persist_tree,
    rebuild_tree,
)
from minirel.storage import TableRegistry, TableSchema


class SortedMapModel:
    """Independent oracle: a dict of key -> sorted record list."""

    def __init__(self):
        self.data = {}

    def insert(self, key, recno):
        records = self.data.setdefault(key, [])
        if recno in records:
            raise DuplicateEntry("model duplicate")
        insort(records, recno)

    def remove(self, key, recno):
        records = self.data.get(key)
        if records is None or recno not in records:
            raise NoSuchEntry("model missing")
        records.remove(recno)
        if not records:
            del self.data[key]

    def lookup_eq(self, key):
        return list(self.data.get(key, []))

    def lookup_range(self, lo, hi, lo_inc, hi_inc):
        out = []
        for key in sorted(self.data):
            if key < lo or (key == lo and not lo_inc):
                continue
            if key > hi or (key == hi and not hi_inc):
                break
            out.extend(self.data[key])
        return out

    def mapping(self):
        return {k: list(v) for k, v in self.data.items()}


def audit(tree):
    """Assert every structural invariant of the tree."""
    order = tree.order
    leaf_depths = []
    leaves_by_walk = []

    def walk(node, depth, is_root):
        assert all(a < b for a, b in zip(node.keys, node.keys[1:])), \
            "keys within a node must be strictly ascending"
        assert len(node.keys) <= order - 1, "node over capacity"
        if not is_root:
            assert len(node.keys) >= tree.min_keys, "node under occupancy floor"
        if isinstance(node, _Leaf):
            leaf_depths.append(depth)
            leaves_by_walk.append(node)
            assert len(node.records) == len(node.keys)
            for records in node.records:
                assert records, "empty record list must drop its key"
                assert records == sorted(set(records)), "record list sorted unique"
        else:
            assert len(node.children) == len(node.keys) + 1
            if is_root:
                assert len(node.children) >= 2, "internal root needs two children"
            for child in node.children:
                walk(child, depth + 1, False)

    walk(tree.root, 1, True)
    assert len(set(leaf_depths)) == 1, "leaves must share one depth"

    # The forward chain must visit exactly the walked leaves, in order, with
    # keys globally ascending.
    node = tree.root
    while isinstance(node, _Internal):
        node = node.children[0]
    chain = []
    all_keys = []
    while node is not None:
        chain.append(node)
        all_keys.extend(node.keys)
        node = node.next
    assert chain == leaves_by_walk
    assert all(a < b for a, b in zip(all_keys, all_keys[1:]))


class TestBasics:
    def test_empty_tree(self):
        tree = BPlusTree(order=3)
        assert tree.is_empty()
        assert tree.lookup_eq(5) == []
        assert tree.lookup_range(0, 100) == []
        assert tree.height() == 1
        audit(tree)

    def test_single_insert_keeps_leaf_root(self):
        tree = BPlusTree(order=3)
        tree.insert(1, 10)
        assert isinstance(tree.root, _Leaf)
        assert tree.lookup_eq(1) == [10]
        audit(tree)

    def test_sequential_1_to_7_order_3(self):
        tree = BPlusTree(order=3)
        for key in range(1, 8):
            tree.insert(key, key * 100)
            audit(tree)
        assert tree.height() == 3
        assert [key for key, _ in tree.items()] == list(range(1, 8))

    def test_duplicate_keys_share_a_sorted_record_list(self):
        tree = BPlusTree(order=3)
        for recno in (30, 10, 20):
            tree.insert(5, recno)
        assert tree.lookup_eq(5) == [10, 20, 30]
        audit(tree)

    def test_duplicate_entry_rejected(self):
        tree = BPlusTree(order=3)
        tree.insert(5, 1)
        with pytest.raises(DuplicateEntry):
            tree.insert(5, 1)

    def test_remove_only_entry_empties_the_tree(self):
        tree = BPlusTree(order=3)
        tree.insert(5, 1)
        tree.remove(5, 1)
        assert tree.is_empty()
        audit(tree)

    def test_remove_absent(self):
        tree = BPlusTree(order=3)
        tree.insert(5, 1)
        with pytest.raises(NoSuchEntry):
            tree.remove(6, 1)
        with pytest.raises(NoSuchEntry):
            tree.remove(5, 2)

    def test_lookup_after_partial_remove(self):
        tree = BPlusTree(order=4, key_kind="str")
        for recno in (7, 3, 9):
            tree.insert("x", recno)
        tree.remove("x", 7)
        assert tree.lookup_eq("x") == [3, 9]

    def test_key_type_enforced(self):
        tree = BPlusTree(order=3, key_kind="int")
        with pytest.raises(TypeError):
            tree.insert("a", 1)
        with pytest.raises(TypeError):
            tree.insert(True, 1)
        tree_s = BPlusTree(order=3, key_kind="str")
        with pytest.raises(TypeError):
            tree_s.insert(1, 1)

    def test_order_must_be_at_least_3(self):
        with pytest.raises(ValueError):
            BPlusTree(order=2)


class TestRanges:
    def make_tree(self):
        tree = BPlusTree(order=3)
        for key in range(1, 11):
            tree.insert(key, key)
        return tree

    def test_full_range(self):
        assert self.make_tree().lookup_range(1, 10) == list(range(1, 11))

    def test_half_open(self):
        # (3, 7]: keys 4..7
        tree = self.make_tree()
        assert tree.lookup_range(3, 7, lo_inclusive=False) == [4, 5, 6, 7]
        assert tree.lookup_range(3, 7, hi_inclusive=False) == [3, 4, 5, 6]
        assert tree.lookup_range(3, 7, False, False) == [4, 5, 6]

    def test_bounds_beyond_keys(self):
        assert self.make_tree().lookup_range(-100, 100) == list(range(1, 11))

    def test_inverted_bounds(self):
        with pytest.raises(BoundsInverted):
            self.make_tree().lookup_range(7, 3)

    def test_open_bounds(self):
        tree = self.make_tree()
        assert tree.lookup_range(None, 4) == [1, 2, 3, 4]
        assert tree.lookup_range(None, 4, hi_inclusive=False) == [1, 2, 3]
        assert tree.lookup_range(7, None) == [7, 8, 9, 10]
        assert tree.lookup_range(7, None, lo_inclusive=False) == [8, 9, 10]
        assert tree.lookup_range(None, None) == list(range(1, 11))
        assert BPlusTree(order=3).lookup_range(None, None) == []

    def test_range_collects_all_duplicates(self):
        tree = BPlusTree(order=3)
        for key in (1, 2, 3):
            for recno in (key * 10, key * 10 + 1):
                tree.insert(key, recno)
        assert tree.lookup_range(1, 2) == [10, 11, 20, 21]


class TestRemovalRebalancing:
    @pytest.mark.parametrize("order", [3, 4])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_remove_all_of_1_to_100_random_order(self, order, seed):
        tree = BPlusTree(order=order)
        keys = list(range(1, 101))
        for key in keys:
            tree.insert(key, key)
        rng = random.Random(seed)
        rng.shuffle(keys)
        for key in keys:
            tree.remove(key, key)
            audit(tree)
        assert tree.is_empty()

    @pytest.mark.parametrize("order", [3, 4, 32])
    @pytest.mark.parametrize("seed", [11, 12])
    def test_model_equivalence_random_ops(self, order, seed):
        rng = random.Random(seed)
        tree = BPlusTree(order=order)
        model = SortedMapModel()
        keyspace = range(0, 60)
        for step in range(1200):
            op = rng.random()
            key = rng.choice(keyspace)
            if op < 0.45:
                recno = rng.randrange(0, 8)
                try:
                    model.insert(key, recno)
                except DuplicateEntry:
                    with pytest.raises(DuplicateEntry):
                        tree.insert(key, recno)
                else:
                    tree.insert(key, recno)
            elif op < 0.75:
                recno = rng.randrange(0, 8)
                try:
                    model.remove(key, recno)
                except NoSuchEntry:
                    with pytest.raises(NoSuchEntry):
                        tree.remove(key, recno)
                else:
                    tree.remove(key, recno)
            elif op < 0.9:
                assert tree.lookup_eq(key) == model.lookup_eq(key)
            else:
                lo = rng.choice(keyspace)
                hi = rng.choice(keyspace)
                lo, hi = min(lo, hi), max(lo, hi)
                lo_inc, hi_inc = rng.random() < 0.5, rng.random() < 0.5
                assert (tree.lookup_range(lo, hi, lo_inc, hi_inc)
                        == model.lookup_range(lo, hi, lo_inc, hi_inc))
            if step % 20 == 0:
                audit(tree)
        audit(tree)
        assert tree.mapping() == model.mapping()

    def test_height_bound(self):
        import math
        for order in (3, 4, 32):
            tree = BPlusTree(order=order)
            rng = random.Random(99)
            keys = rng.sample(range(100000), 2000)
            for key in keys:
                tree.insert(key, key)
            half = (order + 1) // 2
            bound = math.ceil(math.log(len(keys), half)) + 1
            assert tree.height() <= bound
            audit(tree)


class TestStringKeys:
    def test_string_tree_with_awkward_keys(self):
        tree = BPlusTree(order=3, key_kind="str")
        keys = ["plain", "has\ttab", "has\nnewline", "back\\slash", "", "z"]
        for i, key in enumerate(keys):
            tree.insert(key, i)
        audit(tree)
        for i, key in enumerate(keys):
            assert tree.lookup_eq(key) == [i]
        assert [k for k, _ in tree.items()] == sorted(keys)


class TestPersistence:
    def test_empty_round_trip(self, tmp_path):
        path = tmp_path / "t.a.idx"
        persist_tree(BPlusTree(order=3), path)
        assert path.read_text() == ""
        assert load_tree(path, 3, "int").is_empty()

    @pytest.mark.parametrize("key_kind", ["int", "str"])
    def test_random_round_trip(self, tmp_path, key_kind):
        rng = random.Random(7)
        tree = BPlusTree(order=4, key_kind=key_kind)
        for _ in range(800):
            if key_kind == "int":
                key = rng.randrange(0, 200)
            else:
                key = "k" + str(rng.randrange(0, 200)) + rng.choice(["", "\t", "\n"])
            try:
                tree.insert(key, rng.randrange(0, 50))
            except DuplicateEntry:
                pass
        path = tmp_path / "t.c.idx"
        persist_tree(tree, path)
        loaded = load_tree(path, 4, key_kind)
        audit(loaded)
        assert loaded.mapping() == tree.mapping()

    def test_corrupt_files(self, tmp_path):
        cases = [
            "2\t1\n1\t2\n",      # out of order
            "1\t1\n1\t2\n",      # duplicate key line
            "1\n",               # no separator
            "1\tx\n",            # bad record reference
            "1\t3,2\n",          # records out of order
            "1\t2,2\n",          # duplicate record
            "1\t-1\n",           # negative record
            "x\t1\n",            # bad int key
        ]
        for text in cases:
            path = tmp_path / "bad.idx"
            path.write_text(text)
            with pytest.raises(CorruptIndexFile):
                load_tree(path, 4, "int")


def student_schema():
    return TableSchema("student", (
        ast.ColumnDef("id", ast.INT, False, True),
        ast.ColumnDef("dept", ast.STR(8)),
    ))


class TestRebuild:
    def test_rebuild_matches_incremental(self, tmp_path):
        registry = TableRegistry(tmp_path)
        table = registry.create_table(student_schema())
        incremental = BPlusTree(order=4, key_kind="str")
        rng = random.Random(3)
        live = []
        for i in range(100):
            dept = rng.choice(["cs", "ee", "me"])
            recno = table.append_record((i, dept))
            incremental.insert(dept, recno)
            live.append((recno, dept))
            if live and rng.random() < 0.3:
                victim, vdept = live.pop(rng.randrange(len(live)))
                table.delete_record(victim)
                incremental.remove(vdept, victim)
        rebuilt = rebuild_tree(table, "dept", order=4)
        audit(rebuilt)
        assert rebuilt.mapping() == incremental.mapping()
        registry.close()

    def test_rebuild_empty_table(self, tmp_path):
        registry = TableRegistry(tmp_path)
        table = registry.create_table(student_schema())
        assert rebuild_tree(table, "id", order=4).is_empty()
        registry.close()

    def test_rebuild_skips_tombstones(self, tmp_path):
        registry = TableRegistry(tmp_path)
        table = registry.create_table(student_schema())
        table.append_record((1, "cs"))
        table.append_record((2, "ee"))
        table.delete_record(0)
        tree = rebuild_tree(table, "id", order=4)
        assert tree.mapping() == {2: [1]}
        registry.close()


class TestIndexManager:
    def test_load_or_rebuild_prefers_the_file(self, tmp_path):
        registry = TableRegistry(tmp_path)
        table = registry.create_table(student_schema())
        table.append_record((1, "cs"))
        manager = IndexManager(order=4)
        # stale but well-formed file: load wins, proving the file was used
        IndexManager.index_path(tmp_path, "student", "id").write_text("9\t0\n")
        tree = manager.load_or_rebuild(table, "id", tmp_path)
        assert tree.mapping() == {9: [0]}
        registry.close()

    def test_load_or_rebuild_falls_back_on_corruption(self, tmp_path):
        registry = TableRegistry(tmp_path)
        table = registry.create_table(student_schema())
        table.append_record((1, "cs"))
        table.append_record((2, "ee"))
        manager = IndexManager(order=4)
        IndexManager.index_path(tmp_path, "student", "id").write_text("2\t1\n1\t0\n")
        tree = manager.load_or_rebuild(table, "id", tmp_path)
        assert tree.mapping() == {1: [0], 2: [1]}
        registry.close()

    def test_load_or_rebuild_without_file(self, tmp_path):
        registry = TableRegistry(tmp_path)
        table = registry.create_table(student_schema())
        table.append_record((5, "cs"))
        manager = IndexManager(order=4)
        tree = manager.load_or_rebuild(table, "id", tmp_path)
        assert tree.mapping() == {5: [0]}
        registry.close()

    def test_persist_all(self, tmp_path):
        manager = IndexManager(order=4)
        tree = BPlusTree(order=4)
        tree.insert(1, 0)
        manager.register("t", "a", tree)
        manager.persist_all(tmp_path)
        assert (tmp_path / "t.a.idx").read_text() == "1\t0\n"
