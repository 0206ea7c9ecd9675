"""Elements, values, sets and predicates.

Every type here is an immutable value once constructed. Sizes are defined by
the canonical binary encoding (see ``encode_element``), which is also the
persistence format used by backend snapshots.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from operator import attrgetter
from typing import Any, Iterable, Iterator, Mapping, Union

from opbench.errors import (
    DuplicateKey,
    ElementTooLarge,
    InvalidValue,
    MissingField,
    NonRecordValue,
    TypeMismatch,
)

MAX_KEY_BYTES = 1024
DEFAULT_ELEMENT_SIZE_CAP = 64 * 1024 * 1024
INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


def _utf8_len(s: str) -> int:
    if s.isascii():
        return len(s)
    return len(s.encode("utf-8"))


def _check_utf8(s: str, what: str) -> None:
    if not isinstance(s, str):
        raise InvalidValue(f"{what} must be a str, got {type(s).__name__}")
    if not s.isascii():
        try:
            s.encode("utf-8")
        except UnicodeEncodeError as exc:
            raise InvalidValue(f"{what} is not valid UTF-8: {exc}") from None


class Tag(enum.IntEnum):
    INT64 = 0
    FLOAT64 = 1
    STRING = 2
    BOOL = 3


_PY_TYPE = {Tag.INT64: int, Tag.FLOAT64: float, Tag.STRING: str, Tag.BOOL: bool}


@dataclass(frozen=True)
class Scalar:
    tag: Tag
    value: Union[int, float, str, bool]

    def __post_init__(self) -> None:
        tag, v = self.tag, self.value
        if tag is Tag.INT64:
            if type(v) is not int:
                raise InvalidValue(f"int64 scalar needs an int, got {v!r}")
            if not INT64_MIN <= v <= INT64_MAX:
                raise InvalidValue(f"int64 out of range: {v}")
        elif tag is Tag.FLOAT64:
            if type(v) is not float:
                raise InvalidValue(f"float64 scalar needs a float, got {v!r}")
            if not math.isfinite(v):
                raise InvalidValue(f"float64 must be finite, got {v!r}")
        elif tag is Tag.STRING:
            _check_utf8(v, "string scalar")
        elif tag is Tag.BOOL:
            if type(v) is not bool:
                raise InvalidValue(f"bool scalar needs a bool, got {v!r}")
        else:
            raise InvalidValue(f"unknown scalar tag {tag!r}")

    @classmethod
    def of(cls, v: Any) -> "Scalar":
        """Infer the tag from a Python value (bool before int)."""
        if isinstance(v, Scalar):
            return v
        if isinstance(v, bool):
            return cls(Tag.BOOL, v)
        if isinstance(v, int):
            return cls(Tag.INT64, v)
        if isinstance(v, float):
            return cls(Tag.FLOAT64, v)
        if isinstance(v, str):
            return cls(Tag.STRING, v)
        raise InvalidValue(f"cannot make a scalar from {type(v).__name__}")

    @property
    def is_numeric(self) -> bool:
        return self.tag is Tag.INT64 or self.tag is Tag.FLOAT64


def compare_scalar(a: Scalar, b: Scalar) -> int:
    """Return -1, 0 or 1. Tags must match.

    Strings compare by code point, which is the same order as their UTF-8 bytes.
    """
    if a.tag is not b.tag:
        raise TypeMismatch(f"cannot compare {a.tag.name} with {b.tag.name}")
    x, y = a.value, b.value
    return (x > y) - (x < y)


@dataclass(frozen=True)
class IdList:
    """Ordered list of element keys (graph adjacency)."""

    keys: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.keys, tuple):
            object.__setattr__(self, "keys", tuple(self.keys))
        for k in self.keys:
            _check_utf8(k, "idlist entry")
            if not k:
                raise InvalidValue("idlist entries must be nonempty")

    def __len__(self) -> int:
        return len(self.keys)

    def __iter__(self) -> Iterator[str]:
        return iter(self.keys)


FieldValue = Union[Scalar, IdList]


@dataclass(frozen=True)
class Record:
    fields: tuple[tuple[str, FieldValue], ...] = ()
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        if not isinstance(self.fields, tuple):
            object.__setattr__(self, "fields", tuple(self.fields))
        index = {}
        for pair in self.fields:
            name, fv = pair
            _check_utf8(name, "field name")
            if not name:
                raise InvalidValue("record field names must be nonempty")
            if name in index:
                raise InvalidValue(f"duplicate record field {name!r}")
            if not isinstance(fv, (Scalar, IdList)):
                raise InvalidValue(f"field {name!r} holds {type(fv).__name__}, not a scalar or idlist")
            index[name] = fv
        object.__setattr__(self, "_index", index)

    @classmethod
    def of(cls, mapping: Mapping[str, Any] | None = None, /, **kwargs: Any) -> "Record":
        """Build a record from Python values; lists/tuples become idlists."""
        items = dict(mapping or {}, **kwargs)
        pairs = []
        for name, v in items.items():
            if isinstance(v, (list, tuple)):
                v = IdList(tuple(v))
            elif not isinstance(v, (Scalar, IdList)):
                v = Scalar.of(v)
            pairs.append((name, v))
        return cls(tuple(pairs))

    def get(self, name: str) -> FieldValue | None:
        return self._index.get(name)

    def __getitem__(self, name: str) -> FieldValue:
        try:
            return self._index[name]
        except KeyError:
            raise MissingField(f"record has no field {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def names(self) -> list[str]:
        return [n for n, _ in self.fields]

    def to_python(self) -> dict[str, Any]:
        return {n: (list(v.keys) if isinstance(v, IdList) else v.value) for n, v in self.fields}


@dataclass(frozen=True)
class Text:
    text: str = ""

    def __post_init__(self) -> None:
        _check_utf8(self.text, "text value")


Value = Union[Record, Text, IdList]

KIND_RECORD, KIND_TEXT, KIND_IDLIST = 0, 1, 2
_IDLIST_FIELD_TAG = 4


def value_kind(v: Value) -> str:
    if isinstance(v, Record):
        return "record"
    if isinstance(v, Text):
        return "text"
    if isinstance(v, IdList):
        return "idlist"
    raise InvalidValue(f"not a value: {type(v).__name__}")


def _idlist_body_size(ids: IdList) -> int:
    return 4 + sum(4 + _utf8_len(k) for k in ids.keys)


def _field_value_size(fv: FieldValue) -> int:
    if isinstance(fv, IdList):
        return 1 + _idlist_body_size(fv)
    tag = fv.tag
    if tag is Tag.STRING:
        return 1 + 4 + _utf8_len(fv.value)
    if tag is Tag.BOOL:
        return 2
    return 9


def _value_size(v: Value) -> int:
    if isinstance(v, Record):
        return 1 + 4 + sum(4 + _utf8_len(n) + _field_value_size(fv) for n, fv in v.fields)
    if isinstance(v, Text):
        return 1 + 4 + _utf8_len(v.text)
    if isinstance(v, IdList):
        return 1 + _idlist_body_size(v)
    raise InvalidValue(f"not a value: {type(v).__name__}")


@dataclass(frozen=True)
class Element:
    key: str
    value: Value
    size_bytes: int = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        _check_utf8(self.key, "element key")
        klen = _utf8_len(self.key)
        if klen == 0:
            raise InvalidValue("element key must be nonempty")
        if klen > MAX_KEY_BYTES:
            raise InvalidValue(f"element key is {klen} bytes, limit {MAX_KEY_BYTES}")
        object.__setattr__(self, "size_bytes", 4 + klen + _value_size(self.value))


def element_size_bytes(e: Element) -> int:
    """Length of ``encode_element(e)``, computed without encoding."""
    return e.size_bytes


def check_element_size(e: Element, cap: int = DEFAULT_ELEMENT_SIZE_CAP) -> None:
    if e.size_bytes > cap:
        raise ElementTooLarge(f"element {e.key!r} is {e.size_bytes} bytes, cap {cap}")


# -- canonical encoding ----------------------------------------------------

_U32 = struct.Struct("<I")
_I64 = struct.Struct("<q")
_F64 = struct.Struct("<d")


def _put_str(out: bytearray, s: str) -> None:
    b = s.encode("utf-8")
    out += _U32.pack(len(b))
    out += b


def _put_idlist(out: bytearray, ids: IdList) -> None:
    out += _U32.pack(len(ids.keys))
    for k in ids.keys:
        _put_str(out, k)


def _put_field_value(out: bytearray, fv: FieldValue) -> None:
    if isinstance(fv, IdList):
        out.append(_IDLIST_FIELD_TAG)
        _put_idlist(out, fv)
        return
    out.append(int(fv.tag))
    if fv.tag is Tag.INT64:
        out += _I64.pack(fv.value)
    elif fv.tag is Tag.FLOAT64:
        out += _F64.pack(fv.value)
    elif fv.tag is Tag.STRING:
        _put_str(out, fv.value)
    else:
        out.append(1 if fv.value else 0)


def encode_element(e: Element, out: bytearray | None = None) -> bytes | bytearray:
    """Canonical length-prefixed little-endian encoding.

    Appends to ``out`` and returns it when given, else returns fresh bytes.
    """
    buf = bytearray() if out is None else out
    _put_str(buf, e.key)
    v = e.value
    if isinstance(v, Record):
        buf.append(KIND_RECORD)
        buf += _U32.pack(len(v.fields))
        for name, fv in v.fields:
            _put_str(buf, name)
            _put_field_value(buf, fv)
    elif isinstance(v, Text):
        buf.append(KIND_TEXT)
        _put_str(buf, v.text)
    else:
        buf.append(KIND_IDLIST)
        _put_idlist(buf, v)
    return bytes(buf) if out is None else buf


class _Reader:
    __slots__ = ("buf", "pos")

    def __init__(self, buf: bytes, pos: int = 0):
        self.buf = buf
        self.pos = pos

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.buf):
            raise ValueError("truncated element encoding")
        chunk = self.buf[self.pos:end]
        self.pos = end
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def str(self) -> str:
        return self.take(self.u32()).decode("utf-8")

    def idlist(self) -> IdList:
        return IdList(tuple(self.str() for _ in range(self.u32())))


def decode_element(buf: bytes, pos: int = 0) -> tuple[Element, int]:
    """Inverse of ``encode_element``; raises ValueError on malformed input."""
    r = _Reader(buf, pos)
    key = r.str()
    kind = r.u8()
    if kind == KIND_RECORD:
        pairs = []
        for _ in range(r.u32()):
            name = r.str()
            tag = r.u8()
            if tag == Tag.INT64:
                fv = Scalar(Tag.INT64, _I64.unpack(r.take(8))[0])
            elif tag == Tag.FLOAT64:
                fv = Scalar(Tag.FLOAT64, _F64.unpack(r.take(8))[0])
            elif tag == Tag.STRING:
                fv = Scalar(Tag.STRING, r.str())
            elif tag == Tag.BOOL:
                fv = Scalar(Tag.BOOL, r.u8() != 0)
            elif tag == _IDLIST_FIELD_TAG:
                fv = r.idlist()
            else:
                raise ValueError(f"bad scalar tag {tag}")
            pairs.append((name, fv))
        value: Value = Record(tuple(pairs))
    elif kind == KIND_TEXT:
        value = Text(r.str())
    elif kind == KIND_IDLIST:
        value = r.idlist()
    else:
        raise ValueError(f"bad value kind {kind}")
    try:
        return Element(key, value), r.pos
    except InvalidValue as exc:
        raise ValueError(str(exc)) from None


# -- sets --------------------------------------------------------------------

_by_key = attrgetter("key")


class DataSet:
    """Named collection of elements with unique keys, held in key order."""

    __slots__ = ("name", "_elements", "size_bytes")

    def __init__(self, name: str, elements: Iterable[Element] = ()):
        items = sorted(elements, key=_by_key)
        table: dict[str, Element] = {}
        size = 0
        for e in items:
            if e.key in table:
                raise DuplicateKey(f"duplicate key {e.key!r} in set {name!r}")
            table[e.key] = e
            size += e.size_bytes
        self.name = name
        self._elements = table
        self.size_bytes = size

    @classmethod
    def _from_sorted(cls, name: str, table: dict[str, Element]) -> "DataSet":
        ds = cls.__new__(cls)
        ds.name = name
        ds._elements = table
        ds.size_bytes = sum(e.size_bytes for e in table.values())
        return ds

    def __len__(self) -> int:
        return len(self._elements)

    def __iter__(self) -> Iterator[Element]:
        return iter(self._elements.values())

    def __contains__(self, key: str) -> bool:
        return key in self._elements

    def get(self, key: str) -> Element | None:
        return self._elements.get(key)

    def keys(self) -> list[str]:
        return list(self._elements)

    def renamed(self, name: str) -> "DataSet":
        return DataSet._from_sorted(name, self._elements)

    def canonical_bytes(self) -> bytes:
        out = bytearray()
        for e in self._elements.values():
            encode_element(e, out)
        return bytes(out)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DataSet):
            return NotImplemented
        return self.name == other.name and self._elements == other._elements

    def __repr__(self) -> str:
        return f"DataSet({self.name!r}, {len(self)} elements, {self.size_bytes} bytes)"


@dataclass(frozen=True)
class Multiset:
    """Pipeline intermediate that may repeat keys; never stored in a backend."""

    elements: tuple[Element, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.elements, tuple):
            object.__setattr__(self, "elements", tuple(self.elements))

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[Element]:
        return iter(self.elements)


# -- predicates --------------------------------------------------------------

@dataclass(frozen=True)
class Slot:
    """Placeholder filled by the workload driver before each operation."""

    kind: str
    params: tuple[tuple[str, Any], ...] = ()

    def param(self, name: str, default: Any = None) -> Any:
        return dict(self.params).get(name, default)


COMPARISON_OPS = ("=", "!=", "<", "<=", ">", ">=")
_CMP_TRUTH = {
    "=": lambda c: c == 0,
    "!=": lambda c: c != 0,
    "<": lambda c: c < 0,
    "<=": lambda c: c <= 0,
    ">": lambda c: c > 0,
    ">=": lambda c: c >= 0,
}


class Predicate:
    def evaluate(self, e: Element) -> bool:
        raise NotImplementedError


@dataclass(frozen=True)
class Const(Predicate):
    value: bool

    def evaluate(self, e: Element) -> bool:
        return self.value


TRUE = Const(True)
FALSE = Const(False)


def record_field(e: Element, name: str) -> FieldValue:
    if not isinstance(e.value, Record):
        raise MissingField(f"element {e.key!r} is {value_kind(e.value)}, field {name!r} needs a record")
    fv = e.value.get(name)
    if fv is None:
        raise MissingField(f"element {e.key!r} has no field {name!r}")
    return fv


def numeric_field(e: Element, name: str) -> float:
    fv = record_field(e, name)
    if isinstance(fv, IdList) or not fv.is_numeric:
        kind = "idlist" if isinstance(fv, IdList) else fv.tag.name
        raise TypeMismatch(f"element {e.key!r} field {name!r} is {kind}, not numeric")
    return float(fv.value)


@dataclass(frozen=True)
class Compare(Predicate):
    field: str
    op: str
    literal: Any  # Scalar, or Slot in a workload template

    def __post_init__(self) -> None:
        if self.op not in _CMP_TRUTH:
            raise InvalidValue(f"unknown comparison operator {self.op!r}")

    def evaluate(self, e: Element) -> bool:
        lit = self.literal
        if not isinstance(lit, Scalar):
            raise InvalidValue(f"comparison on {self.field!r} has an unfilled slot")
        fv = record_field(e, self.field)
        if isinstance(fv, IdList):
            raise TypeMismatch(f"element {e.key!r} field {self.field!r} is an idlist")
        if fv.tag is not lit.tag:
            raise TypeMismatch(
                f"element {e.key!r} field {self.field!r} is {fv.tag.name}, literal is {lit.tag.name}"
            )
        x, y = fv.value, lit.value
        return _CMP_TRUTH[self.op]((x > y) - (x < y))


@dataclass(frozen=True)
class And(Predicate):
    terms: tuple[Predicate, ...]

    def evaluate(self, e: Element) -> bool:
        return all(t.evaluate(e) for t in self.terms)


@dataclass(frozen=True)
class Or(Predicate):
    terms: tuple[Predicate, ...]

    def evaluate(self, e: Element) -> bool:
        return any(t.evaluate(e) for t in self.terms)


@dataclass(frozen=True)
class Not(Predicate):
    term: Predicate

    def evaluate(self, e: Element) -> bool:
        return not self.term.evaluate(e)


def eval_predicate(p: Predicate, e: Element) -> bool:
    """Evaluate ``p`` on ``e``; conjunction and disjunction short-circuit left to right."""
    return p.evaluate(e)


# -- transform references ------------------------------------------------------

@dataclass(frozen=True)
class TransformSpec:
    name: str
    params: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.params, tuple):
            object.__setattr__(self, "params", tuple(self.params))

    def param_dict(self) -> dict[str, Any]:
        return dict(self.params)


def as_record(e: Element) -> Record:
    if not isinstance(e.value, Record):
        raise NonRecordValue(f"element {e.key!r} is {value_kind(e.value)}, not a record")
    return e.value
