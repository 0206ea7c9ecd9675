from __future__ import annotations

import copy
import json

import pytest
from hypothesis import given, settings

from opbench.errors import (
    PrescriptionError,
    PrescriptionSyntaxError,
    SchemaError,
    UndeclaredOperation,
    UndeclaredPattern,
    UnknownTransform,
)
from opbench.prescription import (
    BUILTINS,
    apply_overrides,
    builtin,
    builtin_text,
    load_document,
    parse_document,
    parse_prescription,
    serialize,
    validate_prescription,
)
from strategies import prescription_docs


def builtin_doc(name: str) -> dict:
    return json.loads(builtin_text(name))


def codes(doc) -> list[str]:
    return [d.code for d in validate_prescription(doc)]


def leaves(node, path=()):
    if isinstance(node, dict):
        for k, v in node.items():
            yield from leaves(v, path + (k,))
    elif isinstance(node, list):
        for i, v in enumerate(node):
            yield from leaves(v, path + (i,))
    else:
        yield path, node


def flip(value):
    """A value of a different JSON type than ``value``."""
    if isinstance(value, str):
        return 12345
    return "corrupt"


def set_path(doc, path, value):
    node = doc
    for part in path[:-1]:
        node = node[part]
    node[path[-1]] = value


@pytest.mark.parametrize("name", BUILTINS)
class TestBuiltins:
    def test_valid(self, name):
        assert validate_prescription(builtin_doc(name)) == []

    def test_canonical_round_trip(self, name):
        text = builtin_text(name)
        p = parse_prescription(text)
        assert serialize(p) == text
        assert parse_prescription(serialize(p)) == p

    def test_every_type_flip_is_rejected(self, name):
        doc = builtin_doc(name)
        count = 0
        for path, value in leaves(doc):
            mutated = copy.deepcopy(doc)
            set_path(mutated, path, flip(value))
            assert validate_prescription(mutated), f"flip at {path} accepted"
            count += 1
        assert count > 10


def test_undeclared_operation_is_named():
    doc = builtin_doc("pagerank")
    doc["operations"].remove("order_by")
    with pytest.raises(UndeclaredOperation, match="order_by") as exc:
        parse_document(doc)
    assert exc.value.path == "/streams/0/pipeline"


def test_undeclared_pattern():
    doc = builtin_doc("pagerank")
    doc["patterns"] = ["single_operation"]
    with pytest.raises(UndeclaredPattern, match="iterative"):
        parse_document(doc)


def test_syntax_error_has_line_and_column():
    text = builtin_text("fast_storage").replace('"seed": ', '"seed" ', 1)
    with pytest.raises(PrescriptionSyntaxError, match=r"line 3 column \d+"):
        parse_prescription(text)


@pytest.mark.parametrize("text", ['{"a": 1, "a": 2}', '{"seed": NaN}', "[1, 2", b"\xff"])
def test_syntax_rejections(text):
    with pytest.raises(PrescriptionSyntaxError):
        load_document(text)


def test_unknown_transform():
    doc = builtin_doc("pagerank")
    doc["streams"][0]["pipeline"][1]["body"][1]["name"] = "pagerank-contrib"
    assert codes(doc) == ["unknown-transform"]
    with pytest.raises(UnknownTransform):
        parse_document(doc)


@pytest.mark.parametrize("mutate, code", [
    (lambda d: d["streams"].append(copy.deepcopy(d["streams"][0])), "duplicate-stream"),
    (lambda d: d["streams"][0].update(termination=None), "no-termination"),
    (lambda d: d["streams"][0]["pipeline"][0].update(set="nowhere"), "unknown-set"),
    (lambda d: d["streams"][0]["pipeline"][1]["body"][3]["params"].update(damping=2.0), "transform-params"),
    (lambda d: d["dataset"]["params"].update(m=10**9), "dataset-params"),
    (lambda d: d["streams"][0]["pipeline"].insert(0, {"op": "aggregate", "function": "sum", "field": "rank",
                                                       "mode": "whole_set"}), "pipeline-type"),
    (lambda d: d.update(extra=1), "schema"),
])
def test_diagnostic_codes(mutate, code):
    doc = builtin_doc("pagerank")
    mutate(doc)
    assert code in codes(doc)


@pytest.mark.parametrize("mutate, code", [
    (lambda d: d["streams"][1]["pipeline"][2].update(field="latency"), "unknown-field"),
    (lambda d: d["streams"][1]["pipeline"][1]["predicate"]["and"][0]["cmp"].__setitem__(0, "lvl"), "unknown-field"),
    (lambda d: d["streams"][0]["pipeline"][0].update(element={"$slot": "random_key", "set": "logs"}), "slot-position"),
    (lambda d: d["streams"][0]["termination"]["data_size"].update(set="other"), "unknown-set"),
])
def test_diagnostic_codes_on_queries(mutate, code):
    doc = builtin_doc("log_monitoring")
    mutate(doc)
    assert codes(doc) == [code]


def test_field_type_is_checked_statically():
    doc = builtin_doc("log_monitoring")
    query = doc["streams"][1]["pipeline"]
    query[1]["predicate"]["and"][0]["cmp"][2] = 7  # level is a string
    assert codes(doc) == ["field-type"]
    query[1]["predicate"]["and"][0]["cmp"][2] = "ERROR"
    query[2]["field"] = "msg"
    assert codes(doc) == ["field-type"]


def test_overrides():
    doc = apply_overrides(builtin_doc("fast_storage"), ["seed=9", "streams.0.termination.op_count=5",
                                                       "streams.1.rate=null", "name=renamed"])
    p = parse_document(doc)
    assert (p.seed, p.stream("kv").termination.n, p.stream("merge").rate, p.name) == (9, 5, None, "renamed")
    original = builtin_doc("fast_storage")
    assert original["seed"] != 9  # input untouched


def test_override_can_invalidate():
    doc = apply_overrides(builtin_doc("fast_storage"), ["streams.0.client_threads=0"])
    with pytest.raises(SchemaError):
        parse_document(doc)


@pytest.mark.parametrize("bad", ["noequals", "streams.9.rate=1", "seed.x=1", "streams.x=1", "dataset.nope.deeper=1"])
def test_bad_override_paths(bad):
    with pytest.raises(PrescriptionError):
        apply_overrides(builtin_doc("fast_storage"), [bad])


def test_builtin_lookup():
    assert builtin("pagerank").name == "pagerank"
    with pytest.raises(KeyError):
        builtin_text("nope")


@settings(max_examples=200)
@given(prescription_docs())
def test_generated_round_trip(doc):
    p = parse_document(doc)
    text = serialize(p)
    again = parse_prescription(text)
    assert again == p
    assert serialize(again) == text
