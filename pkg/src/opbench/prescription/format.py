"""Prescription documents: JSON codec, validation and overrides.

A prescription file is canonical JSON (two-space indent, trailing newline)
with top-level keys ``name, seed, operations, patterns, dataset, streams,
metrics``. ``schema.json`` next to this module documents and checks the
structure; ``validate_prescription`` adds the semantic rules on top.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any, Mapping

import jsonschema

from opbench import transforms as _transforms
from opbench.datagen import KINDS, GeneratorSpec
from opbench.driver.workload import (
    SLOT_POSITIONS,
    DataSize,
    Duration,
    MixEntry,
    OpCount,
    StreamSpec,
    Termination,
    iter_slots,
    referenced_sets,
)
from opbench.errors import (
    InvalidSpec,
    OpBenchError,
    PrescriptionError,
    PrescriptionSyntaxError,
    SchemaError,
    UndeclaredOperation,
    UndeclaredPattern,
    UnknownTransform,
)
from opbench.model import (
    And,
    Compare,
    Const,
    Element,
    IdList,
    Not,
    Or,
    Predicate,
    Record,
    Scalar,
    Slot,
    Tag,
    Text,
    TransformSpec,
)
from opbench.ops import AggregateSpec, OperationKind
from opbench.pipeline import (
    AggregateStep,
    DeleteStep,
    FilterStep,
    FixedIterations,
    GetStep,
    IterativePlan,
    L1Delta,
    OrderByStep,
    Pipeline,
    ProjectStep,
    PutStep,
    SetOpStep,
    TransformStep,
    check_pipeline,
)

OPERATIONS = tuple(k.value for k in OperationKind)
PATTERNS = ("single_operation", "multi_operation", "iterative")
METRICS = ("throughput", "latency", "duration")
TOP_LEVEL_KEYS = ("name", "seed", "operations", "patterns", "dataset", "streams", "metrics")
SET_OPS = ("union", "difference", "cross_product")


@dataclass(frozen=True)
class DatasetSpec:
    set: str
    target_size_bytes: int
    kind: str | None = None
    params: Mapping[str, int] = field(default_factory=dict)
    import_path: str | None = None

    def generator(self, seed: int) -> GeneratorSpec:
        return GeneratorSpec(self.kind or "logs", seed, dict(self.params))


@dataclass(frozen=True)
class Prescription:
    name: str
    seed: int
    operations: tuple[str, ...]
    patterns: tuple[str, ...]
    dataset: DatasetSpec
    streams: tuple[StreamSpec, ...]
    metrics: tuple[str, ...]

    def stream(self, name: str) -> StreamSpec:
        for s in self.streams:
            if s.name == name:
                return s
        raise KeyError(name)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at {self.path or '/'}: {self.message}"


# Diagnostic codes, stable across releases.
SYNTAX = "syntax"
SCHEMA = "schema"
INVALID_VALUE = "invalid-value"
DATASET_PARAMS = "dataset-params"
PIPELINE_TYPE = "pipeline-type"
UNKNOWN_TRANSFORM = "unknown-transform"
TRANSFORM_PARAMS = "transform-params"
UNDECLARED_OPERATION = "undeclared-operation"
UNDECLARED_PATTERN = "undeclared-pattern"
UNKNOWN_SET = "unknown-set"
SLOT_POSITION = "slot-position"
FIELD_TYPE = "field-type"
UNKNOWN_FIELD = "unknown-field"
DUPLICATE_STREAM = "duplicate-stream"
NO_TERMINATION = "no-termination"
DUPLICATE_KEY = "duplicate-key"

_ERROR_FOR_CODE = {
    SYNTAX: PrescriptionSyntaxError,
    UNDECLARED_OPERATION: UndeclaredOperation,
    UNDECLARED_PATTERN: UndeclaredPattern,
}


# -- schema ---------------------------------------------------------------------------

@lru_cache(maxsize=1)
def load_schema() -> dict[str, Any]:
    text = resources.files("opbench.prescription").joinpath("schema.json").read_text("utf-8")
    return json.loads(text)


@lru_cache(maxsize=1)
def _validator() -> jsonschema.protocols.Validator:
    schema = load_schema()
    cls = jsonschema.validators.validator_for(schema)
    return cls(schema)


def _json_path(parts: Any) -> str:
    return "/" + "/".join(str(p) for p in parts)


def schema_diagnostics(doc: Any) -> list[Diagnostic]:
    errors = sorted(_validator().iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    out = []
    for err in errors:
        # oneOf/anyOf failures are reported at the branch point; name the deepest cause
        best = jsonschema.exceptions.best_match([err])
        out.append(Diagnostic(SCHEMA, _json_path(best.absolute_path), best.message))
    return out


# -- decoding -------------------------------------------------------------------------

class _DecodeError(Exception):
    def __init__(self, code: str, path: str, message: str):
        super().__init__(message)
        self.diagnostic = Diagnostic(code, path, message)


def _scalar(v: Any, path: str) -> Scalar:
    try:
        return Scalar.of(v)
    except OpBenchError as exc:
        raise _DecodeError(INVALID_VALUE, path, str(exc)) from None


def decode_slot(d: Mapping[str, Any]) -> Slot:
    params = tuple((k, v) for k, v in d.items() if k != "$slot")
    if d["$slot"] == "random_float":
        params = tuple((k, float(v)) for k, v in params)
    return Slot(d["$slot"], params)


def encode_slot(s: Slot) -> dict[str, Any]:
    return {"$slot": s.kind, **dict(s.params)}


def _is_slot(v: Any) -> bool:
    return isinstance(v, dict) and "$slot" in v


def decode_element(d: Mapping[str, Any], path: str = "") -> Element:
    try:
        if "record" in d:
            fields = []
            for name, v in d["record"].items():
                if isinstance(v, list):
                    fields.append((name, IdList(tuple(v))))
                else:
                    fields.append((name, _scalar(v, f"{path}/record/{name}")))
            return Element(d["key"], Record(tuple(fields)))
        if "text" in d:
            return Element(d["key"], Text(d["text"]))
        return Element(d["key"], IdList(tuple(d["idlist"])))
    except _DecodeError:
        raise
    except OpBenchError as exc:
        raise _DecodeError(INVALID_VALUE, path, str(exc)) from None


def encode_element(e: Element) -> dict[str, Any]:
    v = e.value
    if isinstance(v, Record):
        rec: dict[str, Any] = {}
        for name, fv in v.fields:
            rec[name] = list(fv.keys) if isinstance(fv, IdList) else fv.value
        return {"key": e.key, "record": rec}
    if isinstance(v, Text):
        return {"key": e.key, "text": v.text}
    return {"key": e.key, "idlist": list(v.keys)}


def decode_predicate(d: Mapping[str, Any], path: str = "") -> Predicate:
    if "const" in d:
        return Const(d["const"])
    if "cmp" in d:
        fld, op, lit = d["cmp"]
        literal = decode_slot(lit) if _is_slot(lit) else _scalar(lit, f"{path}/cmp/2")
        return Compare(fld, op, literal)
    if "and" in d:
        return And(tuple(decode_predicate(t, f"{path}/and/{i}") for i, t in enumerate(d["and"])))
    if "or" in d:
        return Or(tuple(decode_predicate(t, f"{path}/or/{i}") for i, t in enumerate(d["or"])))
    return Not(decode_predicate(d["not"], f"{path}/not"))


def encode_predicate(p: Predicate) -> dict[str, Any]:
    if isinstance(p, Const):
        return {"const": p.value}
    if isinstance(p, Compare):
        lit = encode_slot(p.literal) if isinstance(p.literal, Slot) else p.literal.value
        return {"cmp": [p.field, p.op, lit]}
    if isinstance(p, And):
        return {"and": [encode_predicate(t) for t in p.terms]}
    if isinstance(p, Or):
        return {"or": [encode_predicate(t) for t in p.terms]}
    if isinstance(p, Not):
        return {"not": encode_predicate(p.term)}
    raise TypeError(f"not a predicate: {p!r}")


def _key_or_slot(v: Any) -> Any:
    if v is None:
        return None
    return decode_slot(v) if _is_slot(v) else v


def decode_step(d: Mapping[str, Any], path: str = "") -> Any:
    op = d["op"]
    try:
        if op == "put":
            el = d.get("element")
            if el is not None:
                el = decode_slot(el) if _is_slot(el) else decode_element(el, f"{path}/element")
            return PutStep(d["set"], el)
        if op == "get":
            return GetStep(d["set"], _key_or_slot(d.get("key")))
        if op == "delete":
            return DeleteStep(d["set"], _key_or_slot(d.get("key")))
        if op == "transform":
            params = tuple((k, _scalar(v, f"{path}/params/{k}")) for k, v in d["params"].items())
            return TransformStep(TransformSpec(d["name"], params))
        if op == "filter":
            return FilterStep(decode_predicate(d["predicate"], f"{path}/predicate"))
        if op == "project":
            return ProjectStep(tuple(d["fields"]))
        if op == "order_by":
            return OrderByStep(d["field"], d["direction"])
        if op == "aggregate":
            return AggregateStep(AggregateSpec(d["function"], d["field"], d["mode"]))
        if op in SET_OPS:
            return SetOpStep(OperationKind(op), d["right"], d.get("left"))
        stop = d["stop"]
        if "fixed_iterations" in stop:
            cond = FixedIterations(stop["fixed_iterations"])
        else:
            cond = L1Delta(stop["l1_delta"]["field"], float(stop["l1_delta"]["epsilon"]))
        return IterativePlan(decode_pipeline(d["body"], f"{path}/body"), cond, d["max_iterations"])
    except _DecodeError:
        raise
    except OpBenchError as exc:
        raise _DecodeError(INVALID_VALUE, path, str(exc)) from None


def encode_step(step: Any) -> dict[str, Any]:
    if isinstance(step, PutStep):
        d: dict[str, Any] = {"op": "put", "set": step.set}
        if isinstance(step.element, Slot):
            d["element"] = encode_slot(step.element)
        elif step.element is not None:
            d["element"] = encode_element(step.element)
        return d
    if isinstance(step, (GetStep, DeleteStep)):
        d = {"op": step.op.value, "set": step.set}
        if step.key is not None:
            d["key"] = encode_slot(step.key) if isinstance(step.key, Slot) else step.key
        return d
    if isinstance(step, TransformStep):
        return {"op": "transform", "name": step.spec.name, "params": {k: v.value for k, v in step.spec.params}}
    if isinstance(step, FilterStep):
        return {"op": "filter", "predicate": encode_predicate(step.predicate)}
    if isinstance(step, ProjectStep):
        return {"op": "project", "fields": list(step.fields)}
    if isinstance(step, OrderByStep):
        return {"op": "order_by", "field": step.field, "direction": step.direction}
    if isinstance(step, AggregateStep):
        s = step.spec
        return {"op": "aggregate", "function": s.function, "field": s.field, "mode": s.mode}
    if isinstance(step, SetOpStep):
        d = {"op": step.op.value, "right": step.right}
        if step.left is not None:
            d["left"] = step.left
        return d
    if isinstance(step, IterativePlan):
        if isinstance(step.stop, FixedIterations):
            stop: dict[str, Any] = {"fixed_iterations": step.stop.k}
        else:
            stop = {"l1_delta": {"field": step.stop.field, "epsilon": step.stop.epsilon}}
        return {"op": "iterate", "body": encode_pipeline(step.body), "stop": stop,
                "max_iterations": step.max_iterations_guard}
    raise TypeError(f"not a step: {step!r}")


def decode_pipeline(steps: list[Any], path: str = "") -> Pipeline:
    return Pipeline(tuple(decode_step(s, f"{path}/{i}") for i, s in enumerate(steps)))


def encode_pipeline(p: Pipeline) -> list[dict[str, Any]]:
    return [encode_step(s) for s in p.steps]


def _decode_termination(t: Any) -> Termination:
    if t is None:
        return None
    if "duration" in t:
        return Duration(float(t["duration"]))
    if "op_count" in t:
        return OpCount(t["op_count"])
    ds = t["data_size"]
    return DataSize(ds["set"], ds.get("threshold_bytes"))


def _encode_termination(t: Termination) -> Any:
    if t is None:
        return None
    if isinstance(t, Duration):
        return {"duration": t.seconds}
    if isinstance(t, OpCount):
        return {"op_count": t.n}
    d: dict[str, Any] = {"set": t.set}
    if t.threshold_bytes is not None:
        d["threshold_bytes"] = t.threshold_bytes
    return {"data_size": d}


def _decode_stream(d: Mapping[str, Any], path: str) -> StreamSpec:
    if "pipeline" in d:
        mix = (MixEntry(1.0, decode_pipeline(d["pipeline"], f"{path}/pipeline")),)
    else:
        mix = tuple(
            MixEntry(float(m["weight"]), decode_pipeline(m["pipeline"], f"{path}/mix/{i}/pipeline"))
            for i, m in enumerate(d["mix"])
        )
    rate = None if d["rate"] is None else float(d["rate"])
    return StreamSpec(d["name"], mix, rate, d["client_threads"], _decode_termination(d["termination"]))


def _encode_stream(s: StreamSpec) -> dict[str, Any]:
    d: dict[str, Any] = {"name": s.name}
    if len(s.mix) == 1 and s.mix[0].weight == 1.0:
        d["pipeline"] = encode_pipeline(s.mix[0].pipeline)
    else:
        d["mix"] = [{"weight": m.weight, "pipeline": encode_pipeline(m.pipeline)} for m in s.mix]
    d["rate"] = s.rate
    d["client_threads"] = s.client_threads
    d["termination"] = _encode_termination(s.termination)
    return d


def _decode(doc: Mapping[str, Any]) -> Prescription:
    ds = doc["dataset"]
    if "import_path" in ds:
        dataset = DatasetSpec(ds["set"], ds["target_size_bytes"], import_path=ds["import_path"])
    else:
        dataset = DatasetSpec(ds["set"], ds["target_size_bytes"], kind=ds["kind"], params=dict(ds["params"]))
    streams = tuple(_decode_stream(s, f"/streams/{i}") for i, s in enumerate(doc["streams"]))
    return Prescription(
        name=doc["name"], seed=doc["seed"], operations=tuple(doc["operations"]),
        patterns=tuple(doc["patterns"]), dataset=dataset, streams=streams, metrics=tuple(doc["metrics"]),
    )


def to_document(p: Prescription) -> dict[str, Any]:
    ds = p.dataset
    if ds.import_path is not None:
        dataset: dict[str, Any] = {"set": ds.set, "import_path": ds.import_path, "target_size_bytes": ds.target_size_bytes}
    else:
        dataset = {"set": ds.set, "kind": ds.kind, "params": dict(ds.params), "target_size_bytes": ds.target_size_bytes}
    return {
        "name": p.name,
        "seed": p.seed,
        "operations": list(p.operations),
        "patterns": list(p.patterns),
        "dataset": dataset,
        "streams": [_encode_stream(s) for s in p.streams],
        "metrics": list(p.metrics),
    }


def serialize(p: Prescription) -> str:
    """Canonical text: two-space indent, UTF-8 as-is, trailing newline."""
    return json.dumps(to_document(p), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


# -- semantic checks -------------------------------------------------------------------

def generated_fields(ds: DatasetSpec) -> dict[str, Any]:
    """Field name -> Tag (or IdList) of the records a dataset spec produces."""
    if ds.import_path is not None or ds.kind == "logs":
        return {"ts": Tag.INT64, "server_id": Tag.INT64, "level": Tag.STRING,
                "latency_ms": Tag.FLOAT64, "msg": Tag.STRING}
    if ds.kind == "records":
        k = ds.params.get("field_count", 3)
        out: dict[str, Any] = {"f0": Tag.INT64}
        if k > 1:
            out["f1"] = Tag.FLOAT64
        out.update((f"f{j}", Tag.STRING) for j in range(2, k))
        return out
    out = {"out_links": IdList, "rank": Tag.FLOAT64}
    if ds.params.get("content_bytes", 0):
        out["content"] = Tag.STRING
    return out


_SLOT_TAG = {"random_float": Tag.FLOAT64, "random_int": Tag.INT64}


class _Checker:
    def __init__(self, p: Prescription):
        self.p = p
        self.diags: list[Diagnostic] = []
        self.fields = generated_fields(p.dataset)
        writes = set()
        for s in p.streams:
            for m in s.mix:
                writes |= referenced_sets(m.pipeline)[1]
        self.known_sets = {p.dataset.set} | writes

    def add(self, code: str, path: str, message: str) -> None:
        self.diags.append(Diagnostic(code, path, message))

    def run(self) -> list[Diagnostic]:
        p = self.p
        if p.dataset.kind is not None:
            try:
                GeneratorSpec(p.dataset.kind, p.seed, dict(p.dataset.params)).validate()
            except InvalidSpec as exc:
                self.add(DATASET_PARAMS, "/dataset/params", str(exc))
        names = set()
        for i, s in enumerate(p.streams):
            if s.name in names:
                self.add(DUPLICATE_STREAM, f"/streams/{i}/name", f"stream name {s.name!r} is used twice")
            names.add(s.name)
            if isinstance(s.termination, DataSize) and s.termination.set not in self.known_sets:
                self.add(UNKNOWN_SET, f"/streams/{i}/termination/data_size/set",
                         f"data_size names set {s.termination.set!r}, which the prescription never creates")
            for j, m in enumerate(s.mix):
                base = f"/streams/{i}/pipeline" if len(s.mix) == 1 and m.weight == 1.0 else f"/streams/{i}/mix/{j}/pipeline"
                self.pipeline(m.pipeline, base)
        if p.streams and all(s.termination is None for s in p.streams):
            self.add(NO_TERMINATION, "/streams", "every stream is continuous; one needs a termination clause")
        return self.diags

    def pipeline(self, pl: Pipeline, base: str) -> None:
        before = len(self.diags)
        self.transforms(pl, base)
        if len(self.diags) > before:
            return
        try:
            info = check_pipeline(pl)
        except OpBenchError as exc:
            idx = getattr(exc, "step_index", None)
            self.add(PIPELINE_TYPE, base if idx is None else f"{base}/{idx}", str(exc))
            return
        for op in sorted(o.value for o in info.operations):
            if op not in self.p.operations:
                self.add(UNDECLARED_OPERATION, base, f"pipeline uses {op!r}, which is not declared in operations")
        if info.pattern.value not in self.p.patterns:
            self.add(UNDECLARED_PATTERN, base, f"pipeline is {info.pattern.value!r}, which is not declared in patterns")
        for position, slot in iter_slots(pl):
            if SLOT_POSITIONS.get(slot.kind) != position:
                self.add(SLOT_POSITION, base, f"a {slot.kind} slot cannot stand in a {position} position")
            if slot.kind == "random_key" and slot.param("set") not in self.known_sets:
                self.add(UNKNOWN_SET, base, f"random_key draws from unknown set {slot.param('set')!r}")
            if slot.kind in _SLOT_TAG and not slot.param("low") <= slot.param("high"):
                self.add(INVALID_VALUE, base, f"{slot.kind} slot has low > high")
        reads, _ = referenced_sets(pl)
        for name in sorted(reads - self.known_sets):
            self.add(UNKNOWN_SET, base, f"pipeline reads set {name!r}, which the prescription never creates")
        self.field_flow(pl, base, None)

    def transforms(self, pl: Pipeline, base: str) -> None:
        for i, step in enumerate(pl.steps):
            if isinstance(step, IterativePlan):
                self.transforms(step.body, f"{base}/{i}/body")
            elif isinstance(step, TransformStep):
                try:
                    _transforms.lookup(step.spec.name)
                except UnknownTransform as exc:
                    self.add(UNKNOWN_TRANSFORM, f"{base}/{i}/name", str(exc))
                    continue
                try:
                    params = _transforms.resolve_params(step.spec)
                except OpBenchError as exc:
                    self.add(TRANSFORM_PARAMS, f"{base}/{i}/params", str(exc))
                    continue
                graph = params.get("graph")
                if graph is not None and graph not in self.known_sets:
                    self.add(UNKNOWN_SET, f"{base}/{i}/params/graph", f"transform reads unknown set {graph!r}")

    def field_flow(self, pl: Pipeline, base: str, fields: dict[str, Any] | None) -> dict[str, Any] | None:
        """Track statically known record fields and check steps that name them."""
        for i, step in enumerate(pl.steps):
            path = f"{base}/{i}"
            if isinstance(step, GetStep):
                fields = self.fields if step.set == self.p.dataset.set else None
            elif isinstance(step, FilterStep):
                if fields is not None:
                    self.predicate_fields(step.predicate, fields, f"{path}/predicate")
            elif isinstance(step, ProjectStep):
                if fields is not None:
                    for f in step.fields:
                        if f not in fields:
                            self.add(UNKNOWN_FIELD, f"{path}/fields", f"project names missing field {f!r}")
                    fields = {f: fields[f] for f in step.fields if f in fields}
            elif isinstance(step, OrderByStep):
                if fields is not None:
                    self.need_field(fields, step.field, f"{path}/field", ordered=True)
                fields = None
            elif isinstance(step, AggregateStep):
                if fields is not None:
                    self.need_field(fields, step.spec.field, f"{path}/field", numeric=True)
                out = "result" if step.spec.mode == "whole_set" else step.spec.field
                fields = {out: Tag.FLOAT64}
            elif isinstance(step, IterativePlan):
                self.field_flow(step.body, f"{path}/body", fields)
                fields = None
            elif isinstance(step, SetOpStep) and step.op is OperationKind.DIFFERENCE:
                if step.left is not None:
                    fields = self.fields if step.left == self.p.dataset.set else None
            else:
                fields = None
        return fields

    def need_field(self, fields: dict[str, Any], name: str, path: str, *, numeric: bool = False,
                   ordered: bool = False) -> Any:
        tag = fields.get(name)
        if tag is None:
            self.add(UNKNOWN_FIELD, path, f"field {name!r} is not produced here (known: {sorted(fields)})")
        elif tag is IdList and (numeric or ordered):
            self.add(FIELD_TYPE, path, f"field {name!r} is an idlist")
        elif numeric and tag not in (Tag.INT64, Tag.FLOAT64):
            self.add(FIELD_TYPE, path, f"field {name!r} is {tag.name}, not numeric")
        return tag

    def predicate_fields(self, pred: Predicate, fields: dict[str, Any], path: str) -> None:
        if isinstance(pred, Compare):
            tag = self.need_field(fields, pred.field, f"{path}/cmp/0")
            if tag is None:
                return
            lit = pred.literal
            lit_tag = _SLOT_TAG.get(lit.kind) if isinstance(lit, Slot) else lit.tag
            if tag is IdList or (lit_tag is not None and lit_tag is not tag):
                shown = "IDLIST" if tag is IdList else tag.name
                self.add(FIELD_TYPE, f"{path}/cmp/2",
                         f"field {pred.field!r} is {shown}, literal is {lit_tag.name if lit_tag else '?'}")
        elif isinstance(pred, (And, Or)):
            key = "and" if isinstance(pred, And) else "or"
            for j, t in enumerate(pred.terms):
                self.predicate_fields(t, fields, f"{path}/{key}/{j}")
        elif isinstance(pred, Not):
            self.predicate_fields(pred.term, fields, f"{path}/not")


def _object_pairs(pairs: list[tuple[str, Any]]) -> dict[str, Any]:
    d: dict[str, Any] = {}
    for k, v in pairs:
        if k in d:
            raise _DecodeError(DUPLICATE_KEY, "", f"duplicate object key {k!r}")
        d[k] = v
    return d


def _parse_json(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise PrescriptionSyntaxError(f"not UTF-8 at byte {exc.start}", path="/") from None
    try:
        return json.loads(data, object_pairs_hook=_object_pairs, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise PrescriptionSyntaxError(f"line {exc.lineno} column {exc.colno}: {exc.msg}", path="/") from None
    except _DecodeError as exc:
        raise PrescriptionSyntaxError(exc.diagnostic.message, path="/") from None


def _reject_constant(name: str) -> Any:
    raise _DecodeError(SYNTAX, "", f"{name} is not valid JSON")


def validate_prescription(doc: Any) -> list[Diagnostic]:
    """Every problem with ``doc`` (a parsed JSON document or a Prescription).

    Structure is checked first; semantic rules only run on a well-formed
    document, so the list is deterministic and free of knock-on noise.
    """
    if isinstance(doc, Prescription):
        return _Checker(doc).run()
    diags = schema_diagnostics(doc)
    if diags:
        return diags
    try:
        p = _decode(doc)
    except _DecodeError as exc:
        return [exc.diagnostic]
    return _Checker(p).run()


def raise_for(diags: list[Diagnostic]) -> None:
    if not diags:
        return
    first = diags[0]
    if first.code == UNKNOWN_TRANSFORM:
        err = UnknownTransform(f"{first.path}: {first.message}")
        err.path = first.path
        raise err
    cls = _ERROR_FOR_CODE.get(first.code, SchemaError)
    raise cls(first.message, path=first.path)


def parse_document(doc: Any) -> Prescription:
    raise_for(validate_prescription(doc))
    return _decode(doc)


def parse_prescription(data: bytes | str) -> Prescription:
    """Parse and fully validate prescription text; errors name the first violation's path."""
    return parse_document(_parse_json(data))


def load_document(data: bytes | str) -> Any:
    """The raw JSON document, syntax-checked only."""
    return _parse_json(data)


# -- overrides -----------------------------------------------------------------------

def parse_override(text: str) -> tuple[list[str], Any]:
    """``a.b.0.c=value``; the value is JSON if it parses, else a plain string."""
    path, sep, raw = text.partition("=")
    if not sep or not path:
        raise PrescriptionError(f"override {text!r} is not key=value", path="")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    if isinstance(value, float) and not math.isfinite(value):
        value = raw
    return path.split("."), value


def apply_overrides(doc: Any, overrides: list[str]) -> Any:
    """Return a copy of ``doc`` with each dotted-path override applied in order."""
    doc = copy.deepcopy(doc)
    for text in overrides:
        parts, value = parse_override(text)
        node = doc
        for depth, part in enumerate(parts):
            last = depth == len(parts) - 1
            where = ".".join(parts[: depth + 1])
            if isinstance(node, list):
                try:
                    idx = int(part)
                    node[idx]
                except (ValueError, IndexError):
                    raise PrescriptionError(f"override path {where!r}: no list index {part!r}", path=where) from None
                if last:
                    node[idx] = value
                else:
                    node = node[idx]
            elif isinstance(node, dict):
                if last:
                    node[part] = value
                elif part not in node:
                    raise PrescriptionError(f"override path {where!r} does not exist", path=where)
                else:
                    node = node[part]
            else:
                raise PrescriptionError(f"override path {where!r} descends into a scalar", path=where)
    return doc

