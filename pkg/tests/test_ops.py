from __future__ import annotations

import random

import pytest
from hypothesis import given, settings

from opbench.backend import MemoryBackend
from opbench.errors import (
    BlowupCapExceeded,
    ElementTooLarge,
    EmptySet,
    MissingField,
    NonRecordValue,
    SetNotFound,
    TypeMismatch,
)
from opbench.model import FALSE, TRUE, And, Compare, DataSet, Element, Multiset, Record, Scalar, Text, compare_scalar
from opbench.ops import (
    AGG_KEY,
    CROSS_PRODUCT_SEPARATOR,
    AggregateSpec,
    Category,
    OperationKind,
    aggregate,
    cross_product,
    delete,
    difference,
    filter_set,
    get,
    order_by,
    project,
    put,
    union,
)

from strategies import datasets, predicates


def r(key: str, **fields) -> Element:
    return Element(key, Record.of(fields))


def nums(*values, field="x") -> DataSet:
    return DataSet("s", [r(f"k{i}", **{field: v}) for i, v in enumerate(values)])


def test_operation_vocabulary_and_categories():
    assert [k.value for k in OperationKind] == [
        "put", "get", "delete", "transform", "filter", "project", "order_by", "aggregate",
        "union", "difference", "cross_product",
    ]
    cats = {k.value: k.category for k in OperationKind}
    assert {k for k, c in cats.items() if c is Category.ELEMENT} == {"put", "get", "delete", "transform", "filter"}
    assert {k for k, c in cats.items() if c is Category.SINGLE_SET} == {"project", "order_by", "aggregate"}
    assert {k for k, c in cats.items() if c is Category.DOUBLE_SET} == {"union", "difference", "cross_product"}


class TestElementOps:
    def setup_method(self):
        self.b = MemoryBackend()
        self.b.create_set("s")

    def test_read_your_write(self):
        e = r("a", x=1)
        put(self.b, "s", e)
        assert get(self.b, "s", "a") == e

    def test_overwrite_keeps_cardinality(self):
        put(self.b, "s", r("a", x=1))
        put(self.b, "s", r("a", x=2))
        assert self.b.cardinality("s") == 1
        assert get(self.b, "s", "a").value["x"].value == 2

    def test_size_accounting(self):
        total = 0
        for i in range(1000):
            e = r(f"k{i:04d}", x=i, pad="p" * (i % 7))
            put(self.b, "s", e)
            total += e.size_bytes
        assert self.b.cardinality("s") == 1000
        assert self.b.size_bytes("s") == total

    def test_get_missing_and_delete(self):
        assert get(self.b, "s", "nope") is None
        e = r("a", x=1)
        before = self.b.size_bytes("s")
        put(self.b, "s", e)
        delete(self.b, "s", "a")
        assert get(self.b, "s", "a") is None
        assert self.b.size_bytes("s") == before
        delete(self.b, "s", "a")  # idempotent
        assert self.b.cardinality("s") == 0

    def test_missing_set(self):
        with pytest.raises(SetNotFound):
            put(self.b, "zz", r("a"))
        with pytest.raises(SetNotFound):
            get(self.b, "zz", "a")
        with pytest.raises(SetNotFound):
            delete(self.b, "zz", "a")

    def test_element_too_large(self):
        b = MemoryBackend(element_size_cap=64)
        b.create_set("s")
        with pytest.raises(ElementTooLarge):
            b.put("s", Element("k", Text("x" * 100)))

    def test_random_interleaving_matches_map(self):
        rng = random.Random(5)
        oracle: dict[str, Element] = {}
        for i in range(3000):
            k = f"k{rng.randrange(50)}"
            if rng.random() < 0.6:
                e = r(k, i=i)
                put(self.b, "s", e)
                oracle[k] = e
            else:
                delete(self.b, "s", k)
                oracle.pop(k, None)
            probe = f"k{rng.randrange(50)}"
            assert get(self.b, "s", probe) == oracle.get(probe)
        assert [e.key for e in self.b.scan_snapshot("s")] == sorted(oracle)
        assert self.b.size_bytes("s") == sum(e.size_bytes for e in oracle.values())


class TestFilter:
    def test_constants(self):
        ds = nums(1, 2, 3)
        assert filter_set(ds, TRUE) == ds
        assert len(filter_set(ds, FALSE)) == 0

    def test_error_names_key(self):
        ds = DataSet("s", [r("good", x=1), r("bad", x="s")])
        with pytest.raises(TypeMismatch, match="bad"):
            filter_set(ds, Compare("x", ">", Scalar.of(0)))

    @given(datasets(), predicates(), predicates())
    @settings(max_examples=300)
    def test_filter_composition(self, ds, p, q):
        assert filter_set(filter_set(ds, p), q) == filter_set(ds, And((p, q)))

    def test_multiset_input(self):
        m = Multiset((r("a", x=1), r("a", x=5)))
        assert list(filter_set(m, Compare("x", ">", Scalar.of(2)))) == [r("a", x=5)]


class TestProject:
    def test_identity_and_subset(self):
        ds = DataSet("s", [r("a", x=1, y=2, z=3)])
        assert project(ds, ["x", "y", "z"]) == ds
        assert project(ds, ["y"]).get("a") == r("a", y=2)
        assert list(project(ds, ["z", "x"]).get("a").value.names()) == ["z", "x"]

    def test_errors(self):
        with pytest.raises(MissingField):
            project(DataSet("s", [r("a", x=1)]), ["q"])
        with pytest.raises(NonRecordValue):
            project(DataSet("s", [Element("a", Text(""))]), ["q"])


class TestOrderBy:
    def test_ties_break_by_key_in_both_directions(self):
        ds = DataSet("s", [r("b", x=1), r("a", x=1), r("c", x=0)])
        assert [e.key for e in order_by(ds, "x", "asc")] == ["c", "a", "b"]
        assert [e.key for e in order_by(ds, "x", "desc")] == ["a", "b", "c"]

    def test_heterogeneous_tags(self):
        with pytest.raises(TypeMismatch):
            order_by(DataSet("s", [r("a", x=1), r("b", x=1.0)]), "x")

    @given(datasets())
    @settings(max_examples=300)
    def test_sorted_permutation(self, ds):
        for direction in ("asc", "desc"):
            out = order_by(ds, "c", direction)
            assert sorted(e.key for e in out) == ds.keys()
            for a, b in zip(out, out[1:]):
                c = compare_scalar(a.value["c"], b.value["c"])
                if direction == "desc":
                    c = -c
                assert c < 0 or (c == 0 and a.key < b.key)


class TestAggregate:
    def test_examples(self):
        assert aggregate(nums(1, 2, 3), AggregateSpec("sum", "x")).value["result"].value == 6.0
        assert aggregate(nums(1, 3, 5, 7), AggregateSpec("median", "x")).value["result"].value == 4.0
        assert aggregate(nums(1, 3, 5), AggregateSpec("median", "x")).value["result"].value == 3.0
        assert aggregate(nums(2, 4), AggregateSpec("average", "x")).value["result"].value == 3.0
        out = aggregate(nums(4, -1, 9), AggregateSpec("min", "x"))
        assert out.key == AGG_KEY and out.value["result"] == Scalar.of(-1.0)
        assert aggregate(nums(4, -1, 9), AggregateSpec("max", "x")).value["result"].value == 9.0

    def test_sum_is_correctly_rounded(self):
        got = aggregate(nums(1e16, 1.0, -1e16), AggregateSpec("sum", "x")).value["result"].value
        assert got == 1.0

    def test_by_key_over_multiset(self):
        m = Multiset((r("b", share=0.2), r("c", share=0.2), r("b", share=0.3)))
        out = aggregate(m, AggregateSpec("sum", "share", "by_key"))
        assert {e.key: e.value["share"].value for e in out} == {"b": 0.5, "c": 0.2}

    def test_errors(self):
        with pytest.raises(EmptySet):
            aggregate(nums(), AggregateSpec("sum", "x"))
        with pytest.raises(TypeMismatch):
            aggregate(DataSet("s", [r("a", x="1")]), AggregateSpec("sum", "x"))
        with pytest.raises(MissingField):
            aggregate(nums(1), AggregateSpec("sum", "y"))


class TestSetOps:
    def test_union_left_wins(self):
        a = DataSet("a", [r("k", side="a")])
        b = DataSet("b", [r("k", side="b"), r("m", side="b")])
        out = union(a, b)
        assert out.get("k").value["side"].value == "a" and out.keys() == ["k", "m"]

    @given(datasets("a"), datasets("b"), datasets("c"))
    @settings(max_examples=1000)
    def test_union_laws(self, a, b, c):
        empty = DataSet("e", [])
        assert union(a, empty) == a
        assert union(a, a) == a
        assert union(union(a, b), c) == union(a, union(b, c))
        assert difference(a, empty) == a
        assert len(difference(a, a)) == 0

    @given(datasets("a", max_size=8), datasets("b", max_size=8))
    def test_cross_product_shape(self, a, b):
        out = cross_product(a, b)
        assert len(out) == len(a) * len(b)
        for e in out:
            lk, rk = e.key.split(CROSS_PRODUCT_SEPARATOR)
            assert e.value.names() == [f"l_{n}" for n in a.get(lk).value.names()] + [
                f"r_{n}" for n in b.get(rk).value.names()]

    def test_cross_product_examples(self):
        a = DataSet("a", [r(k, x=1) for k in "abc"])
        b = DataSet("b", [r(k, y=1) for k in "wxyz"])
        assert len(cross_product(a, DataSet("e", []))) == 0
        assert len(cross_product(a, b)) == 12
        with pytest.raises(BlowupCapExceeded):
            cross_product(a, b, cap=11)
        with pytest.raises(NonRecordValue):
            cross_product(a, DataSet("t", [Element("q", Text(""))]))
