"""Named, parameterized transforms.

A prescription can only reference transforms by name, so user code gets in
through ``register_transform``. Element-level transforms map one element to
one element (``fanout=False``) or to any number of elements (``fanout=True``,
producing a Multiset). Set-level transforms see a whole DataSet at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

from opbench.errors import (
    InputKindMismatch,
    ParamSchemaViolation,
    TypeMismatch,
    UnknownTransform,
)
from opbench.model import (
    DataSet,
    Element,
    IdList,
    Record,
    Scalar,
    Tag,
    TransformSpec,
    record_field,
    value_kind,
)


@dataclass(frozen=True)
class ParamDecl:
    tag: Tag
    default: Any = None  # None means required
    check: Callable[[Any], bool] | None = None
    doc: str = ""


@dataclass(frozen=True)
class TransformDef:
    name: str
    fn: Callable[..., Any]
    level: str = "element"  # "element" | "set"
    accepts: frozenset[str] = frozenset({"record", "text", "idlist"})
    fanout: bool = False
    params: Mapping[str, ParamDecl] = field(default_factory=dict)
    doc: str = ""


_REGISTRY: dict[str, TransformDef] = {}


def register_transform(tdef: TransformDef, *, replace: bool = False) -> TransformDef:
    if tdef.level not in ("element", "set"):
        raise ValueError(f"bad transform level {tdef.level!r}")
    if tdef.name in _REGISTRY and not replace:
        raise ValueError(f"transform {tdef.name!r} already registered")
    _REGISTRY[tdef.name] = tdef
    return tdef


def lookup(name: str) -> TransformDef:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownTransform(f"unknown transform {name!r}") from None


def registered_names() -> list[str]:
    return sorted(_REGISTRY)


def resolve_params(spec: TransformSpec) -> dict[str, Any]:
    """Validate ``spec.params`` against the declared schema, returning Python values.

    An int64 literal is accepted where a float64 is declared.
    """
    tdef = lookup(spec.name)
    given = {}
    for name, raw in spec.params:
        if name in given:
            raise ParamSchemaViolation(f"{spec.name}: parameter {name!r} given twice")
        given[name] = raw
    out: dict[str, Any] = {}
    for name in given:
        if name not in tdef.params:
            raise ParamSchemaViolation(f"{spec.name}: unknown parameter {name!r}")
    for name, decl in tdef.params.items():
        if name not in given:
            if decl.default is None:
                raise ParamSchemaViolation(f"{spec.name}: missing required parameter {name!r}")
            out[name] = decl.default
            continue
        raw = given[name]
        if not isinstance(raw, Scalar):
            raise ParamSchemaViolation(f"{spec.name}: parameter {name!r} is not a scalar")
        if raw.tag is Tag.INT64 and decl.tag is Tag.FLOAT64:
            raw = Scalar(Tag.FLOAT64, float(raw.value))
        if raw.tag is not decl.tag:
            raise ParamSchemaViolation(
                f"{spec.name}: parameter {name!r} must be {decl.tag.name}, got {raw.tag.name}"
            )
        if decl.check is not None and not decl.check(raw.value):
            raise ParamSchemaViolation(f"{spec.name}: parameter {name!r}={raw.value!r} out of range ({decl.doc})")
        out[name] = raw.value
    return out


def check_input(tdef: TransformDef, e: Element) -> None:
    kind = value_kind(e.value)
    if kind not in tdef.accepts:
        raise InputKindMismatch(
            f"transform {tdef.name!r} takes {sorted(tdef.accepts)} values, element {e.key!r} is {kind}"
        )


# -- built-ins -------------------------------------------------------------------

def _identity(e: Element, params: Mapping[str, Any], ctx: Any) -> Element:
    return e


def _tokenize_words(e: Element, params: Mapping[str, Any], ctx: Any) -> Iterable[Element]:
    text = e.value.text
    if params["lowercase"]:
        text = text.lower()
    one = Record((("count", Scalar(Tag.INT64, 1)),))
    return [Element(word, one) for word in text.split()]


def _pagerank_contribute(e: Element, params: Mapping[str, Any], ctx: Any) -> Iterable[Element]:
    links = record_field(e, "out_links")
    if not isinstance(links, IdList):
        raise TypeMismatch(f"node {e.key!r}: out_links must be an idlist")
    rank = record_field(e, "rank")
    if isinstance(rank, IdList) or rank.tag is not Tag.FLOAT64:
        raise TypeMismatch(f"node {e.key!r}: rank must be float64")
    if not links.keys:
        return []
    share = rank.value / len(links.keys)
    return [Element(dst, Record((("share", Scalar(Tag.FLOAT64, share)),))) for dst in links.keys]


def _pagerank_apply(shares: DataSet, params: Mapping[str, Any], ctx: Any) -> DataSet:
    graph = ctx.resolve_set(params["graph"])
    n = len(graph)
    d = params["damping"]
    base = (1.0 - d) / n if n else 0.0
    out = []
    for node in graph:
        links = record_field(node, "out_links")
        got = shares.get(node.key)
        total = 0.0
        if got is not None:
            fv = record_field(got, "share")
            if isinstance(fv, IdList) or not fv.is_numeric:
                raise TypeMismatch(f"share for {node.key!r} is not numeric")
            total = float(fv.value)
        rank = base + d * total
        out.append(Element(node.key, Record((("out_links", links), ("rank", Scalar(Tag.FLOAT64, rank))))))
    return DataSet(graph.name, out)


def _damping_ok(v: float) -> bool:
    return math.isfinite(v) and 0.0 < v < 1.0


register_transform(TransformDef(
    name="identity", fn=_identity, doc="Returns each element unchanged.",
))
register_transform(TransformDef(
    name="tokenize-words", fn=_tokenize_words, accepts=frozenset({"text"}), fanout=True,
    params={"lowercase": ParamDecl(Tag.BOOL, default=False)},
    doc="Splits text on whitespace, emitting (word, {count: 1}) per token.",
))
register_transform(TransformDef(
    name="pagerank-contribute", fn=_pagerank_contribute, accepts=frozenset({"record"}), fanout=True,
    doc="Emits (target, {share: rank/outdeg}) for each out-link of a node.",
))
register_transform(TransformDef(
    name="pagerank-apply", fn=_pagerank_apply, level="set",
    params={
        "damping": ParamDecl(Tag.FLOAT64, default=0.85, check=_damping_ok, doc="0 < d < 1"),
        "graph": ParamDecl(Tag.STRING, default="graph", check=bool, doc="nonempty set name"),
    },
    doc="rank' = (1-d)/N + d * summed shares, for every node of the named graph set.",
))

