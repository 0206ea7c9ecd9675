"""The abstracted operations: element, single-set and double-set."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence, Union

from opbench.errors import (
    BlowupCapExceeded,
    EmptySet,
    InputKindMismatch,
    InvalidValue,
    MissingField,
    SetNotFound,
    TypeMismatch,
)
from opbench.model import (
    DEFAULT_ELEMENT_SIZE_CAP,
    DataSet,
    Element,
    IdList,
    Multiset,
    Predicate,
    Record,
    Scalar,
    Tag,
    TransformSpec,
    as_record,
    numeric_field,
    record_field,
)
from opbench import transforms as _transforms

CROSS_PRODUCT_SEPARATOR = "␟"
DEFAULT_CROSS_PRODUCT_CAP = 10**7


class Category(enum.Enum):
    ELEMENT = "element"
    SINGLE_SET = "single-set"
    DOUBLE_SET = "double-set"


class OperationKind(enum.Enum):
    PUT = "put"
    GET = "get"
    DELETE = "delete"
    TRANSFORM = "transform"
    FILTER = "filter"
    PROJECT = "project"
    ORDER_BY = "order_by"
    AGGREGATE = "aggregate"
    UNION = "union"
    DIFFERENCE = "difference"
    CROSS_PRODUCT = "cross_product"

    @property
    def category(self) -> Category:
        return _CATEGORY[self]


_CATEGORY = {
    OperationKind.PUT: Category.ELEMENT,
    OperationKind.GET: Category.ELEMENT,
    OperationKind.DELETE: Category.ELEMENT,
    OperationKind.TRANSFORM: Category.ELEMENT,
    OperationKind.FILTER: Category.ELEMENT,
    OperationKind.PROJECT: Category.SINGLE_SET,
    OperationKind.ORDER_BY: Category.SINGLE_SET,
    OperationKind.AGGREGATE: Category.SINGLE_SET,
    OperationKind.UNION: Category.DOUBLE_SET,
    OperationKind.DIFFERENCE: Category.DOUBLE_SET,
    OperationKind.CROSS_PRODUCT: Category.DOUBLE_SET,
}


class ExecContext:
    """What an operation may touch besides its inputs.

    ``bindings`` shadow backend sets of the same name; set-valued reads of a
    backend set go through ``scan_snapshot``.
    """

    def __init__(
        self,
        backend: Any = None,
        bindings: Mapping[str, DataSet] | None = None,
        seed: int = 0,
        cross_product_cap: int = DEFAULT_CROSS_PRODUCT_CAP,
        element_size_cap: int = DEFAULT_ELEMENT_SIZE_CAP,
    ):
        self.backend = backend
        self.bindings = dict(bindings or {})
        self.seed = seed
        self.cross_product_cap = cross_product_cap
        self.element_size_cap = element_size_cap

    def resolve_set(self, name: str) -> DataSet:
        bound = self.bindings.get(name)
        if bound is not None:
            return bound
        if self.backend is None:
            raise SetNotFound(f"no binding or backend for set {name!r}")
        return DataSet(name, self.backend.scan_snapshot(name))

    def require_backend(self) -> Any:
        if self.backend is None:
            raise SetNotFound("operation needs a backend but none was given")
        return self.backend


# -- element operations ----------------------------------------------------------

def put(backend: Any, set_name: str, e: Element) -> Any:
    return backend.put(set_name, e)


def get(backend: Any, set_name: str, key: str) -> Element | None:
    return backend.get(set_name, key)


def delete(backend: Any, set_name: str, key: str) -> Any:
    return backend.delete(set_name, key)


def transform(
    data: Union[Element, DataSet, Multiset],
    spec: TransformSpec,
    ctx: ExecContext | None = None,
) -> Union[Element, DataSet, Multiset]:
    tdef = _transforms.lookup(spec.name)
    params = _transforms.resolve_params(spec)
    ctx = ctx or ExecContext()
    if tdef.level == "set":
        if not isinstance(data, DataSet):
            raise InputKindMismatch(f"set-level transform {spec.name!r} needs a DataSet")
        out = tdef.fn(data, params, ctx)
        if not isinstance(out, DataSet):
            raise InputKindMismatch(f"set-level transform {spec.name!r} returned {type(out).__name__}")
        return out

    def apply(e: Element):
        _transforms.check_input(tdef, e)
        return tdef.fn(e, params, ctx)

    if isinstance(data, Element):
        return Multiset(tuple(apply(data))) if tdef.fanout else apply(data)
    if isinstance(data, Multiset) or (isinstance(data, DataSet) and tdef.fanout):
        if tdef.fanout:
            return Multiset(tuple(x for e in data for x in apply(e)))
        return Multiset(tuple(apply(e) for e in data))
    if isinstance(data, DataSet):
        return DataSet(data.name, [apply(e) for e in data])
    raise InputKindMismatch(f"transform input must be an element or a set, got {type(data).__name__}")


def filter_set(data: Union[DataSet, Multiset], p: Predicate) -> Union[DataSet, Multiset]:
    """Keep the elements on which ``p`` holds; errors name the offending key."""
    kept = []
    for e in data:
        try:
            if p.evaluate(e):
                kept.append(e)
        except (TypeMismatch, MissingField) as exc:
            raise type(exc)(f"filter failed on key {e.key!r}: {exc}") from None
    if isinstance(data, Multiset):
        return Multiset(tuple(kept))
    return DataSet._from_sorted(data.name, {e.key: e for e in kept})


# -- single-set operations ---------------------------------------------------------

def project(data: DataSet, fields: Sequence[str]) -> DataSet:
    fields = list(fields)
    if len(set(fields)) != len(fields):
        raise InvalidValue(f"project field list has duplicates: {fields}")
    out = {}
    for e in data:
        rec = as_record(e)
        pairs = []
        for name in fields:
            fv = rec.get(name)
            if fv is None:
                raise MissingField(f"element {e.key!r} has no field {name!r}")
            pairs.append((name, fv))
        out[e.key] = Element(e.key, Record(tuple(pairs)))
    return DataSet._from_sorted(data.name, out)


def order_by(data: DataSet, field: str, direction: str = "asc") -> tuple[Element, ...]:
    """Sort by ``field``; equal values stay in key-ascending order either way."""
    if direction not in ("asc", "desc"):
        raise InvalidValue(f"direction must be asc or desc, got {direction!r}")
    items = list(data)  # DataSet iterates in key order
    if not items:
        return ()
    tag = None
    sort_keys = []
    for e in items:
        fv = record_field(e, field)
        if isinstance(fv, IdList):
            raise TypeMismatch(f"element {e.key!r} field {field!r} is an idlist")
        if tag is None:
            tag = fv.tag
        elif fv.tag is not tag:
            raise TypeMismatch(f"field {field!r} mixes {tag.name} and {fv.tag.name} (key {e.key!r})")
        sort_keys.append(fv.value)
    order = sorted(range(len(items)), key=sort_keys.__getitem__, reverse=(direction == "desc"))
    return tuple(items[i] for i in order)


AGGREGATE_FUNCTIONS = ("min", "max", "sum", "median", "average")
AGGREGATE_MODES = ("whole_set", "by_key")
AGG_KEY = "_agg"


@dataclass(frozen=True)
class AggregateSpec:
    function: str
    field: str
    mode: str = "whole_set"

    def __post_init__(self) -> None:
        if self.function not in AGGREGATE_FUNCTIONS:
            raise InvalidValue(f"unknown aggregate function {self.function!r}")
        if self.mode not in AGGREGATE_MODES:
            raise InvalidValue(f"unknown aggregate mode {self.mode!r}")
        if not self.field:
            raise InvalidValue("aggregate field must be nonempty")


def _reduce(function: str, values: list[float]) -> float:
    if function == "sum":
        return math.fsum(values)
    if function == "average":
        return math.fsum(values) / len(values)
    if function == "min":
        return min(values)
    if function == "max":
        return max(values)
    ordered = sorted(values)
    mid = len(ordered) // 2
    if len(ordered) % 2:
        return ordered[mid]
    return (ordered[mid - 1] + ordered[mid]) / 2.0


def aggregate(data: Union[DataSet, Multiset], spec: AggregateSpec) -> Union[Element, DataSet]:
    """Sums and averages use correctly rounded float64 summation."""
    if spec.mode == "whole_set":
        values = [numeric_field(e, spec.field) for e in data]
        if not values:
            raise EmptySet(f"{spec.function}({spec.field}) over an empty input")
        result = _reduce(spec.function, values)
        return Element(AGG_KEY, Record((("result", Scalar(Tag.FLOAT64, result)),)))
    groups: dict[str, list[float]] = {}
    for e in data:
        groups.setdefault(e.key, []).append(numeric_field(e, spec.field))
    name = data.name if isinstance(data, DataSet) else "aggregate"
    return DataSet(name, [
        Element(k, Record(((spec.field, Scalar(Tag.FLOAT64, _reduce(spec.function, vs))),)))
        for k, vs in groups.items()
    ])


# -- double-set operations ---------------------------------------------------------

def union(a: DataSet, b: DataSet) -> DataSet:
    """Key union; the left operand's element wins on collision."""
    return DataSet(a.name, [*a, *(e for e in b if e.key not in a)])


def difference(a: DataSet, b: DataSet) -> DataSet:
    return DataSet._from_sorted(a.name, {e.key: e for e in a if e.key not in b})


def cross_product(a: DataSet, b: DataSet, cap: int = DEFAULT_CROSS_PRODUCT_CAP) -> DataSet:
    pairs = len(a) * len(b)
    if pairs > cap:
        raise BlowupCapExceeded(f"cross product of {len(a)} x {len(b)} = {pairs} pairs exceeds cap {cap}")
    left = [(e.key, [("l_" + n, v) for n, v in as_record(e).fields]) for e in a]
    right = [(e.key, [("r_" + n, v) for n, v in as_record(e).fields]) for e in b]
    out = [
        Element(lk + CROSS_PRODUCT_SEPARATOR + rk, Record(tuple(lf + rf)))
        for lk, lf in left
        for rk, rf in right
    ]
    return DataSet(f"{a.name}*{b.name}", out)
