"""Workload patterns: single-operation, multi-operation and iterative.

A Pipeline is an ordered list of steps, each consuming the previous step's
output. A step that names its own input (a keyed get, a put of a literal
element, a set operation with a ``left`` set) is a source and may only come
first. An ``IterativePlan`` is itself a step, so a pipeline like
``[get graph, iterate{...}, order_by rank]`` expresses a whole iterative task.

Execution is strictly sequential; there is no optimizer.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, NamedTuple, Union

from opbench import ops
from opbench import transforms as _transforms
from opbench.errors import (
    ElementNotFound,
    GuardTripped,
    InputKindMismatch,
    InvalidValue,
    OpBenchError,
    PipelineTypeError,
)
from opbench.model import (
    DataSet,
    Element,
    Multiset,
    Predicate,
    Slot,
    TransformSpec,
    check_element_size,
    numeric_field,
)
from opbench.ops import AggregateSpec, ExecContext, OperationKind

DEFAULT_ITERATION_GUARD = 10_000


class Kind(enum.Enum):
    """Static kind of the value flowing between steps."""

    NONE = "none"
    ELEMENT = "element"
    DATASET = "dataset"
    MULTISET = "multiset"
    SEQUENCE = "sequence"
    ACK = "ack"


class Pattern(enum.Enum):
    SINGLE_OPERATION = "single_operation"
    MULTI_OPERATION = "multi_operation"
    ITERATIVE = "iterative"


@dataclass(frozen=True)
class Ack:
    """Acknowledgment of a write; ``seq`` is the backend's linearization stamp of the last write."""

    count: int
    seq: int | None = None


# -- steps ------------------------------------------------------------------------

@dataclass(frozen=True)
class PutStep:
    set: str
    element: Union[Element, Slot, None] = None
    op = OperationKind.PUT


@dataclass(frozen=True)
class GetStep:
    set: str
    key: Union[str, Slot, None] = None  # None reads the whole set
    op = OperationKind.GET


@dataclass(frozen=True)
class DeleteStep:
    set: str
    key: Union[str, Slot, None] = None
    op = OperationKind.DELETE


@dataclass(frozen=True)
class TransformStep:
    spec: TransformSpec
    op = OperationKind.TRANSFORM


@dataclass(frozen=True)
class FilterStep:
    predicate: Predicate
    op = OperationKind.FILTER


@dataclass(frozen=True)
class ProjectStep:
    fields: tuple[str, ...]
    op = OperationKind.PROJECT

    def __post_init__(self) -> None:
        if not isinstance(self.fields, tuple):
            object.__setattr__(self, "fields", tuple(self.fields))


@dataclass(frozen=True)
class OrderByStep:
    field: str
    direction: str = "asc"
    op = OperationKind.ORDER_BY


@dataclass(frozen=True)
class AggregateStep:
    spec: AggregateSpec
    op = OperationKind.AGGREGATE


@dataclass(frozen=True)
class SetOpStep:
    """union / difference / cross_product against the set named ``right``."""

    op: OperationKind
    right: str
    left: str | None = None

    def __post_init__(self) -> None:
        if self.op not in (OperationKind.UNION, OperationKind.DIFFERENCE, OperationKind.CROSS_PRODUCT):
            raise InvalidValue(f"{self.op} is not a double-set operation")


class StoppingCondition:
    def check(self, iteration: int, prev: DataSet, cur: DataSet) -> tuple[bool, float | None]:
        """Return (stop?, delta) after ``iteration`` iterations have run."""
        raise NotImplementedError


@dataclass(frozen=True)
class FixedIterations(StoppingCondition):
    k: int

    def __post_init__(self) -> None:
        if type(self.k) is not int or self.k < 1:
            raise InvalidValue(f"fixed_iterations needs a positive int, got {self.k!r}")

    def check(self, iteration, prev, cur):
        return iteration >= self.k, None


@dataclass(frozen=True)
class L1Delta(StoppingCondition):
    field: str
    epsilon: float

    def __post_init__(self) -> None:
        if not (isinstance(self.epsilon, (int, float)) and math.isfinite(self.epsilon) and self.epsilon > 0):
            raise InvalidValue(f"l1_delta epsilon must be a positive float, got {self.epsilon!r}")

    def check(self, iteration, prev, cur):
        delta = l1_delta(prev, cur, self.field)
        return delta < self.epsilon, delta


def l1_delta(prev: DataSet, cur: DataSet, field: str) -> float:
    """Sum of |cur.field - prev.field| over keys present in both sets.

    Every element of both sets must carry the field with a numeric tag.
    """
    before = {e.key: numeric_field(e, field) for e in prev}
    total = []
    for e in cur:
        v = numeric_field(e, field)
        if e.key in before:
            total.append(abs(v - before[e.key]))
    return math.fsum(total)


STOPPING_CONDITIONS: dict[str, type] = {"fixed_iterations": FixedIterations, "l1_delta": L1Delta}


@dataclass(frozen=True)
class IterativePlan:
    body: "Pipeline"
    stop: StoppingCondition
    max_iterations_guard: int = DEFAULT_ITERATION_GUARD
    op = None

    def __post_init__(self) -> None:
        if type(self.max_iterations_guard) is not int or self.max_iterations_guard < 1:
            raise InvalidValue("max_iterations_guard must be a positive int")


Step = Union[PutStep, GetStep, DeleteStep, TransformStep, FilterStep, ProjectStep,
             OrderByStep, AggregateStep, SetOpStep, IterativePlan]


@dataclass(frozen=True)
class Pipeline:
    steps: tuple[Step, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not isinstance(self.steps, tuple):
            object.__setattr__(self, "steps", tuple(self.steps))

    @property
    def pattern(self) -> Pattern:
        if any(isinstance(s, IterativePlan) for s in self.steps):
            return Pattern.ITERATIVE
        if len(self.steps) == 1:
            return Pattern.SINGLE_OPERATION
        return Pattern.MULTI_OPERATION


def is_source(step: Step) -> bool:
    if isinstance(step, GetStep):
        return True
    if isinstance(step, PutStep):
        return step.element is not None
    if isinstance(step, DeleteStep):
        return step.key is not None
    if isinstance(step, SetOpStep):
        return step.left is not None
    return False


# -- static checking --------------------------------------------------------------

@dataclass
class PipelineInfo:
    output: Kind
    operations: set[OperationKind]
    pattern: Pattern


def _fail(index: int, msg: str) -> PipelineTypeError:
    err = PipelineTypeError(f"step {index}: {msg}")
    err.step_index = index
    return err


def _step_kind(step: Step, kind: Kind, i: int, ops_used: set[OperationKind]) -> Kind:
    source = is_source(step)
    if source and kind is not Kind.NONE:
        raise _fail(i, f"{step.op.value} names its own input and must be the first step")
    if not source and kind is Kind.NONE and not isinstance(step, IterativePlan):
        raise _fail(i, f"{_label(step)} needs an input")
    if step.op is not None and not isinstance(step, AggregateStep):
        ops_used.add(step.op)

    if isinstance(step, GetStep):
        return Kind.DATASET if step.key is None else Kind.ELEMENT
    if isinstance(step, (PutStep, DeleteStep)):
        if source:
            return Kind.ACK
        if kind not in (Kind.ELEMENT, Kind.DATASET):
            raise _fail(i, f"{step.op.value} takes an element or a DataSet, not {kind.value}")
        return Kind.ACK
    if isinstance(step, TransformStep):
        try:
            tdef = _transforms.lookup(step.spec.name)
            _transforms.resolve_params(step.spec)
        except OpBenchError as exc:
            raise _fail(i, str(exc)) from None
        if tdef.level == "set":
            if kind is not Kind.DATASET:
                raise _fail(i, f"set-level transform {tdef.name!r} takes a DataSet, not {kind.value}")
            return Kind.DATASET
        if kind is Kind.ELEMENT:
            return Kind.MULTISET if tdef.fanout else Kind.ELEMENT
        if kind is Kind.DATASET:
            return Kind.MULTISET if tdef.fanout else Kind.DATASET
        if kind is Kind.MULTISET:
            return Kind.MULTISET
        raise _fail(i, f"transform cannot take {kind.value}")
    if isinstance(step, FilterStep):
        if kind not in (Kind.DATASET, Kind.MULTISET):
            raise _fail(i, f"filter takes a DataSet or Multiset, not {kind.value}")
        return kind
    if isinstance(step, (ProjectStep, OrderByStep)):
        if kind is not Kind.DATASET:
            raise _fail(i, f"{step.op.value} takes a DataSet, not {kind.value}")
        if isinstance(step, OrderByStep) and step.direction not in ("asc", "desc"):
            raise _fail(i, f"bad order_by direction {step.direction!r}")
        return Kind.DATASET if isinstance(step, ProjectStep) else Kind.SEQUENCE
    if isinstance(step, AggregateStep):
        if step.spec.mode == "by_key":
            if kind is Kind.MULTISET:
                # keyed reduction closing a transform fan-out: accounted to transform
                ops_used.add(OperationKind.TRANSFORM)
                return Kind.DATASET
            if kind is Kind.DATASET:
                ops_used.add(OperationKind.AGGREGATE)
                return Kind.DATASET
        elif kind is Kind.DATASET:
            ops_used.add(OperationKind.AGGREGATE)
            return Kind.ELEMENT
        raise _fail(i, f"aggregate({step.spec.mode}) cannot take {kind.value}")
    if isinstance(step, SetOpStep):
        if not source and kind is not Kind.DATASET:
            raise _fail(i, f"{step.op.value} takes a DataSet, not {kind.value}")
        return Kind.DATASET
    if isinstance(step, IterativePlan):
        if kind is not Kind.DATASET:
            raise _fail(i, f"iterate takes a DataSet, not {kind.value}")
        try:
            body = check_pipeline(step.body, Kind.DATASET)
        except PipelineTypeError as exc:
            raise _fail(i, f"iterate body: {exc}") from None
        if body.output is not Kind.DATASET:
            raise _fail(i, f"iterate body must yield a DataSet, yields {body.output.value}")
        ops_used |= body.operations
        return Kind.DATASET
    raise _fail(i, f"unknown step {step!r}")


def _label(step: Step) -> str:
    return "iterate" if isinstance(step, IterativePlan) else step.op.value


def check_pipeline(p: Pipeline, input_kind: Kind = Kind.NONE, *, closed: bool = True) -> PipelineInfo:
    """Type-check ``p``; raise PipelineTypeError naming the first bad step.

    ``closed`` additionally requires that no Multiset is left at the end.
    Aggregation by key directly after a fan-out counts toward the transform
    operation in ``operations``, since it completes that transform's reduction.
    """
    if not p.steps:
        raise PipelineTypeError("pipeline has no steps")
    kind = input_kind
    used: set[OperationKind] = set()
    for i, step in enumerate(p.steps):
        kind = _step_kind(step, kind, i, used)
    if closed and kind is Kind.MULTISET:
        raise _fail(len(p.steps) - 1, "a Multiset must be reduced by a by_key aggregate before the pipeline ends")
    return PipelineInfo(kind, used, p.pattern)


def kind_of(value: Any) -> Kind:
    if value is None:
        return Kind.NONE
    if isinstance(value, Element):
        return Kind.ELEMENT
    if isinstance(value, DataSet):
        return Kind.DATASET
    if isinstance(value, Multiset):
        return Kind.MULTISET
    if isinstance(value, tuple):
        return Kind.SEQUENCE
    if isinstance(value, Ack):
        return Kind.ACK
    raise InputKindMismatch(f"not a pipeline value: {type(value).__name__}")


# -- execution ----------------------------------------------------------------------

def _concrete(v: Any, what: str) -> Any:
    if isinstance(v, Slot):
        raise InvalidValue(f"{what} is an unfilled {v.kind} slot")
    return v


def run_step(step: Step, value: Any, ctx: ExecContext) -> Any:
    if isinstance(step, GetStep):
        if step.key is None:
            return ctx.resolve_set(step.set)
        key = _concrete(step.key, "get key")
        if step.set in ctx.bindings:
            return ctx.bindings[step.set].get(key)
        return ctx.require_backend().get(step.set, key)
    if isinstance(step, PutStep):
        backend = ctx.require_backend()
        if step.element is not None:
            e = _concrete(step.element, "put element")
            check_element_size(e, ctx.element_size_cap)
            return Ack(1, backend.put(step.set, e))
        value = _present(value)
        items = [value] if isinstance(value, Element) else list(value)
        seq = None
        for e in items:
            check_element_size(e, ctx.element_size_cap)
            seq = backend.put(step.set, e)
        return Ack(len(items), seq)
    if isinstance(step, DeleteStep):
        backend = ctx.require_backend()
        if step.key is not None:
            return Ack(1, backend.delete(step.set, _concrete(step.key, "delete key")))
        value = _present(value)
        keys = [value.key] if isinstance(value, Element) else value.keys()
        seq = None
        for k in keys:
            seq = backend.delete(step.set, k)
        return Ack(len(keys), seq)
    if isinstance(step, TransformStep):
        return ops.transform(_present(value), step.spec, ctx)
    if isinstance(step, FilterStep):
        return ops.filter_set(_present(value), step.predicate)
    if isinstance(step, ProjectStep):
        return ops.project(_present(value), step.fields)
    if isinstance(step, OrderByStep):
        return ops.order_by(_present(value), step.field, step.direction)
    if isinstance(step, AggregateStep):
        return ops.aggregate(_present(value), step.spec)
    if isinstance(step, SetOpStep):
        left = ctx.resolve_set(step.left) if step.left is not None else _present(value)
        right = ctx.resolve_set(step.right)
        if step.op is OperationKind.UNION:
            return ops.union(left, right)
        if step.op is OperationKind.DIFFERENCE:
            return ops.difference(left, right)
        return ops.cross_product(left, right, ctx.cross_product_cap)
    if isinstance(step, IterativePlan):
        return _iterate(step, _present(value), ctx).result
    raise PipelineTypeError(f"unknown step {step!r}")


def _present(value: Any) -> Any:
    if value is None:
        raise ElementNotFound("previous step produced no element (key not found)")
    return value


def run_pipeline(
    backend: Any,
    p: Pipeline,
    bindings: Mapping[str, DataSet] | None = None,
    *,
    input: Any = None,
    seed: int = 0,
    closed: bool = True,
    ctx: ExecContext | None = None,
) -> Any:
    """Apply the steps of ``p`` in order to ``input`` and return the last output.

    Errors propagate unchanged apart from a ``step_index`` attribute.
    """
    check_pipeline(p, kind_of(input), closed=closed)
    if ctx is None:
        ctx = ExecContext(backend, bindings, seed)
    value = input
    for i, step in enumerate(p.steps):
        try:
            value = run_step(step, value, ctx)
        except OpBenchError as exc:
            if not hasattr(exc, "step_index"):
                exc.step_index = i
            raise
    return value


class IterationResult(NamedTuple):
    result: DataSet
    iterations_run: int
    final_delta: float | None


def _iterate(plan: IterativePlan, data: DataSet, ctx: ExecContext) -> IterationResult:
    current = data
    delta = None
    for iteration in range(1, plan.max_iterations_guard + 1):
        value = current
        for i, step in enumerate(plan.body.steps):
            try:
                value = run_step(step, value, ctx)
            except OpBenchError as exc:
                if not hasattr(exc, "iteration"):
                    exc.iteration = iteration
                    exc.step_index = i
                raise
        if not isinstance(value, DataSet):
            raise InputKindMismatch(f"iteration {iteration} produced {type(value).__name__}, not a DataSet")
        stop, delta = plan.stop.check(iteration, current, value)
        current = value
        if stop:
            return IterationResult(current, iteration, delta)
    raise GuardTripped(
        f"stopping condition not met after {plan.max_iterations_guard} iterations",
        result=current, iterations=plan.max_iterations_guard, final_delta=delta,
    )


def run_iterative(
    backend: Any,
    plan: IterativePlan,
    data: DataSet,
    bindings: Mapping[str, DataSet] | None = None,
    *,
    seed: int = 0,
) -> IterationResult:
    body = check_pipeline(plan.body, Kind.DATASET)
    if body.output is not Kind.DATASET:
        raise PipelineTypeError(f"iterate body must yield a DataSet, yields {body.output.value}")
    return _iterate(plan, data, ExecContext(backend, bindings, seed))
