from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from opbench import transforms
from opbench.errors import InputKindMismatch, ParamSchemaViolation, UnknownTransform
from opbench.model import DataSet, Element, IdList, Multiset, Record, Scalar, Tag, Text, TransformSpec
from opbench.ops import ExecContext, transform

from strategies import datasets


def node(key: str, links: tuple[str, ...], rank: float) -> Element:
    return Element(key, Record((("out_links", IdList(links)), ("rank", Scalar.of(rank)))))


@given(datasets())
def test_identity_is_bit_identical(ds):
    out = transform(ds, TransformSpec("identity"))
    assert out == ds and out.canonical_bytes() == ds.canonical_bytes()


def test_tokenize_words_example():
    out = transform(Element("doc", Text("a b a")), TransformSpec("tokenize-words"))
    assert isinstance(out, Multiset)
    one = Record((("count", Scalar.of(1)),))
    assert list(out) == [Element("a", one), Element("b", one), Element("a", one)]


@given(st.text(alphabet="ab \tC\n", max_size=40))
def test_tokenize_words_matches_split(text):
    out = transform(Element("doc", Text(text)), TransformSpec("tokenize-words", (("lowercase", Scalar.of(True)),)))
    assert [e.key for e in out] == text.lower().split()


def test_pagerank_contribute_example():
    out = transform(node("a", ("b", "c"), 0.4), TransformSpec("pagerank-contribute"))
    assert [(e.key, e.value["share"].value) for e in out] == [("b", 0.2), ("c", 0.2)]


def test_pagerank_apply_formula():
    graph = DataSet("graph", [node("a", ("b",), 0.5), node("b", ("a",), 0.5)])
    shares = DataSet("x", [Element("a", Record((("share", Scalar.of(0.3)),)))])
    ctx = ExecContext(bindings={"graph": graph})
    out = transform(shares, TransformSpec("pagerank-apply", (("damping", Scalar.of(0.5)),)), ctx)
    assert out.get("a").value["rank"].value == pytest.approx(0.25 + 0.15)
    assert out.get("b").value["rank"].value == pytest.approx(0.25)
    assert out.get("a").value["out_links"] == IdList(("b",))


def test_unknown_transform():
    with pytest.raises(UnknownTransform):
        transform(Element("k", Text("")), TransformSpec("no-such-thing"))


def test_param_schema():
    bad = [
        (("damping", Scalar.of("high")),),
        (("damping", Scalar.of(1.0)),),
        (("damping", Scalar.of(0.0)),),
        (("nope", Scalar.of(1)),),
    ]
    for params in bad:
        with pytest.raises(ParamSchemaViolation):
            transforms.resolve_params(TransformSpec("pagerank-apply", params))
    assert transforms.resolve_params(TransformSpec("tokenize-words"))["lowercase"] is False


def test_int_widens_to_float_param():
    spec = TransformSpec("pagerank-apply", (("damping", Scalar(Tag.INT64, 0)),))
    with pytest.raises(ParamSchemaViolation):  # widened to 0.0, then out of range
        transforms.resolve_params(spec)


def test_input_kind_mismatch():
    with pytest.raises(InputKindMismatch):
        transform(Element("k", Record(())), TransformSpec("tokenize-words"))


def test_registration_extension_point():
    def shout(e, params, ctx):
        return Element(e.key, Text(e.value.text.upper()))

    transforms.register_transform(
        transforms.TransformDef("test-shout", shout, accepts=frozenset({"text"})), replace=True
    )
    assert "test-shout" in transforms.registered_names()
    assert transform(Element("k", Text("hi")), TransformSpec("test-shout")).value == Text("HI")
