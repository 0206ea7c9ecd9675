"""Client streams, open-loop scheduling and the metrics report.

Each stream issues operations drawn from its pipeline mix. With a target rate
the stream is open-loop: operation ``i`` is due at ``start + i/rate`` no matter
how earlier operations fared, and its latency is measured from that due time,
so a stalled backend shows up in the latency of everything scheduled during
the stall. Without a rate the stream is closed-loop and latency runs from
issue to completion.

A stream without a termination clause is continuous and stops once every
terminating stream has finished.
"""

from __future__ import annotations

import dataclasses
import datetime as _dt
import json
import logging
import random
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Mapping, Union

from opbench.datagen import derive_seed
from opbench.driver.clock import MonotonicClock
from opbench.driver.latency import LatencyRecorder
from opbench.errors import EmptyRecorder, InvalidValue, OpBenchError, WorkloadSetupError
from opbench.model import And, Compare, Element, Not, Or, Predicate, Scalar, Slot, Tag
from opbench.ops import ExecContext
from opbench.pipeline import (
    DeleteStep,
    FilterStep,
    GetStep,
    IterativePlan,
    Pipeline,
    PutStep,
    SetOpStep,
    check_pipeline,
    run_pipeline,
)

log = logging.getLogger(__name__)

DATA_SIZE_CHECK_EVERY = 100
SLOT_KINDS = ("random_key", "next_element", "random_float", "random_int")


@dataclass(frozen=True)
class Duration:
    seconds: float


@dataclass(frozen=True)
class OpCount:
    n: int


@dataclass(frozen=True)
class DataSize:
    set: str
    threshold_bytes: int | None = None  # None: the prescription's dataset target


Termination = Union[Duration, OpCount, DataSize, None]


@dataclass(frozen=True)
class MixEntry:
    weight: float
    pipeline: Pipeline


@dataclass(frozen=True)
class StreamSpec:
    name: str
    mix: tuple[MixEntry, ...]
    rate: float | None = None  # ops/s; None is closed-loop
    client_threads: int = 1
    termination: Termination = None

    def __post_init__(self) -> None:
        if not isinstance(self.mix, tuple):
            object.__setattr__(self, "mix", tuple(self.mix))

    @classmethod
    def single(cls, name: str, pipeline: Pipeline, **kwargs: Any) -> "StreamSpec":
        return cls(name, (MixEntry(1.0, pipeline),), **kwargs)


def schedule_next(rate: float, op_index: int, start_ns: int) -> int:
    """Due time of operation ``op_index`` for an open-loop stream."""
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    return start_ns + round(op_index * 1_000_000_000 / rate)


# -- slots ---------------------------------------------------------------------------

def iter_slots(p: Pipeline) -> Iterator[tuple[str, Slot]]:
    """Yield (position, slot) for every slot in ``p``; position is key, element or literal."""
    for step in p.steps:
        if isinstance(step, (GetStep, DeleteStep)) and isinstance(step.key, Slot):
            yield "key", step.key
        elif isinstance(step, PutStep) and isinstance(step.element, Slot):
            yield "element", step.element
        elif isinstance(step, FilterStep):
            yield from (("literal", s) for s in _predicate_slots(step.predicate))
        elif isinstance(step, IterativePlan):
            yield from iter_slots(step.body)


def _predicate_slots(p: Predicate) -> Iterator[Slot]:
    if isinstance(p, Compare):
        if isinstance(p.literal, Slot):
            yield p.literal
    elif isinstance(p, (And, Or)):
        for t in p.terms:
            yield from _predicate_slots(t)
    elif isinstance(p, Not):
        yield from _predicate_slots(p.term)


SLOT_POSITIONS = {"random_key": "key", "next_element": "element", "random_float": "literal", "random_int": "literal"}


class SlotFiller:
    """Draws slot values for one stream from its seeded randomizer."""

    def __init__(self, rng: random.Random, key_pools: Mapping[str, list[str]], elements: Iterator[Element] | None):
        self.rng = rng
        self.key_pools = key_pools
        self.elements = elements

    def value(self, slot: Slot) -> Any:
        if slot.kind == "random_key":
            pool = self.key_pools.get(slot.param("set"))
            if not pool:
                raise InvalidValue(f"no keys to draw from in set {slot.param('set')!r}")
            return pool[self.rng.randrange(len(pool))]
        if slot.kind == "next_element":
            if self.elements is None:
                raise InvalidValue("next_element slot without an element source")
            return next(self.elements)
        if slot.kind == "random_float":
            return Scalar(Tag.FLOAT64, self.rng.uniform(float(slot.param("low", 0.0)), float(slot.param("high", 1.0))))
        if slot.kind == "random_int":
            return Scalar(Tag.INT64, self.rng.randint(int(slot.param("low", 0)), int(slot.param("high", 100))))
        raise InvalidValue(f"unknown slot kind {slot.kind!r}")

    def _pred(self, p: Predicate) -> Predicate:
        if isinstance(p, Compare) and isinstance(p.literal, Slot):
            return Compare(p.field, p.op, self.value(p.literal))
        if isinstance(p, And):
            return And(tuple(self._pred(t) for t in p.terms))
        if isinstance(p, Or):
            return Or(tuple(self._pred(t) for t in p.terms))
        if isinstance(p, Not):
            return Not(self._pred(p.term))
        return p

    def fill(self, p: Pipeline) -> Pipeline:
        steps = []
        for step in p.steps:
            if isinstance(step, (GetStep, DeleteStep)) and isinstance(step.key, Slot):
                step = dataclasses.replace(step, key=self.value(step.key))
            elif isinstance(step, PutStep) and isinstance(step.element, Slot):
                step = dataclasses.replace(step, element=self.value(step.element))
            elif isinstance(step, FilterStep):
                step = FilterStep(self._pred(step.predicate))
            elif isinstance(step, IterativePlan):
                step = dataclasses.replace(step, body=self.fill(step.body))
            steps.append(step)
        return Pipeline(tuple(steps))


def referenced_sets(p: Pipeline) -> tuple[set[str], set[str]]:
    """(sets read, sets written) by the steps and slots of ``p``."""
    reads: set[str] = set()
    writes: set[str] = set()
    for step in p.steps:
        if isinstance(step, GetStep):
            reads.add(step.set)
        elif isinstance(step, (PutStep, DeleteStep)):
            writes.add(step.set)
        elif isinstance(step, SetOpStep):
            reads.add(step.right)
            if step.left is not None:
                reads.add(step.left)
        elif isinstance(step, IterativePlan):
            r, w = referenced_sets(step.body)
            reads |= r
            writes |= w
    for _, slot in iter_slots(p):
        if slot.kind == "random_key":
            reads.add(slot.param("set"))
    return reads, writes


# -- report --------------------------------------------------------------------------

METRICS = ("throughput", "latency", "duration")


@dataclass
class LatencySummary:
    min: int
    mean: int
    p50: int
    p90: int
    p95: int
    p99: int
    max: int

    @classmethod
    def from_recorder(cls, r: LatencyRecorder) -> "LatencySummary | None":
        if r.count == 0:
            return None

        def us(ns: float) -> int:
            return round(ns / 1000)

        return cls(
            min=us(r.min_ns), mean=us(r.mean_ns()),
            p50=us(r.quantile_ns(0.50)), p90=us(r.quantile_ns(0.90)),
            p95=us(r.quantile_ns(0.95)), p99=us(r.quantile_ns(0.99)),
            max=us(r.max_ns),
        )

    def monotone(self) -> bool:
        return self.min <= self.p50 <= self.p90 <= self.p95 <= self.p99 <= self.max


@dataclass
class StreamReport:
    name: str
    ops_completed: int
    ops_failed: int
    throughput: float
    latency: LatencySummary | None
    termination_reason: str
    active_seconds: float


@dataclass
class MetricsReport:
    streams: list[StreamReport]
    duration_s: float
    prescription: str
    seed: int
    backend: str
    timestamp: str
    metrics: tuple[str, ...] = METRICS
    results: dict[str, Any] = field(default_factory=dict, repr=False, compare=False)

    def to_dict(self) -> dict[str, Any]:
        streams = []
        for s in self.streams:
            d: dict[str, Any] = {"name": s.name, "ops_completed": s.ops_completed, "ops_failed": s.ops_failed}
            if "throughput" in self.metrics:
                d["throughput"] = s.throughput
            if "latency" in self.metrics:
                d["latency"] = dataclasses.asdict(s.latency) if s.latency is not None else None
            d["termination_reason"] = s.termination_reason
            d["active_seconds"] = s.active_seconds
            streams.append(d)
        out: dict[str, Any] = {"streams": streams}
        if "duration" in self.metrics:
            out["duration_s"] = self.duration_s
        out.update(prescription=self.prescription, seed=self.seed, backend=self.backend, timestamp=self.timestamp)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def stream(self, name: str) -> StreamReport:
        for s in self.streams:
            if s.name == name:
                return s
        raise KeyError(name)


# -- execution -----------------------------------------------------------------------

class _Job:
    __slots__ = ("index", "pipeline", "intended_ns")

    def __init__(self, index: int, pipeline: Pipeline, intended_ns: int):
        self.index = index
        self.pipeline = pipeline
        self.intended_ns = intended_ns


class _StreamRun:
    def __init__(self, spec: StreamSpec, seed: int, filler: SlotFiller, threshold: int | None):
        self.spec = spec
        self.seed = derive_seed(seed, f"exec:{spec.name}")
        self.choice_rng = random.Random(derive_seed(seed, f"mix:{spec.name}"))
        self.filler = filler
        self.threshold = threshold
        self.recorder = LatencyRecorder()
        self.lock = threading.Lock()
        self.next_index = 0
        self.completed = 0
        self.failed = 0
        self.finished_ops = 0
        self.stopped = False
        self.reason = ""
        self.start_ns = 0
        self.last_done_ns: int | None = None
        self.last_result: Any = None
        self.last_index = -1
        self.workers_left = spec.client_threads
        weights = [m.weight for m in spec.mix]
        self.cum_weights = [sum(weights[: i + 1]) for i in range(len(weights))]

    @property
    def continuous(self) -> bool:
        return self.spec.termination is None

    def stop(self, reason: str) -> None:
        if not self.stopped:
            self.stopped = True
            self.reason = reason

    def _choose(self) -> Pipeline:
        mix = self.spec.mix
        if len(mix) == 1:
            return mix[0].pipeline
        u = self.choice_rng.random() * self.cum_weights[-1]
        for entry, cw in zip(mix, self.cum_weights):
            if u < cw:
                return entry.pipeline
        return mix[-1].pipeline

    def due(self, index: int, ready_ns: int) -> int:
        if self.spec.rate is None:
            return ready_ns
        return schedule_next(self.spec.rate, index, self.start_ns)

    def check_before_issue(self, intended_ns: int) -> bool:
        """Apply count/duration clauses to the next op; False if the stream is done."""
        if self.stopped:
            return False
        term = self.spec.termination
        if isinstance(term, OpCount) and self.next_index >= term.n:
            self.stop("op_count")
        elif isinstance(term, Duration) and intended_ns >= self.start_ns + round(term.seconds * 1e9):
            self.stop("duration")
        return not self.stopped

    def issue(self, intended_ns: int) -> _Job:
        i = self.next_index
        self.next_index += 1
        template = self._choose()
        try:
            pipeline = self.filler.fill(template)
        except (OpBenchError, StopIteration) as exc:
            pipeline = _Broken(exc)
        return _Job(i, pipeline, intended_ns)

    def finish(self, job: _Job, ok: bool, result: Any, done_ns: int, backend: Any) -> None:
        if ok:
            self.completed += 1
            self.recorder.record(done_ns - job.intended_ns)
            if job.index > self.last_index:
                self.last_index = job.index
                self.last_result = result
        else:
            self.failed += 1
        self.finished_ops += 1
        if self.last_done_ns is None or done_ns > self.last_done_ns:
            self.last_done_ns = done_ns
        term = self.spec.termination
        if isinstance(term, DataSize) and self.finished_ops % DATA_SIZE_CHECK_EVERY == 0:
            if backend.size_bytes(term.set) >= self.threshold:
                self.stop("data_size")


class _Broken:
    """Stands in for a pipeline whose slots could not be filled."""

    def __init__(self, exc: BaseException):
        self.exc = exc


def _execute(run: _StreamRun, job: _Job, backend: Any, bindings: Mapping[str, Any]) -> tuple[bool, Any]:
    if isinstance(job.pipeline, _Broken):
        log.debug("stream %s op %d: %s", run.spec.name, job.index, job.pipeline.exc)
        return False, None
    try:
        ctx = ExecContext(backend, bindings, run.seed)
        return True, run_pipeline(backend, job.pipeline, ctx=ctx)
    except Exception as exc:  # counted, never propagated to sibling streams
        if run.failed == 0:
            log.warning("stream %s op %d failed: %s: %s", run.spec.name, job.index, type(exc).__name__, exc)
        return False, None


def _run_threads(runs: list[_StreamRun], backend: Any, clock: Any, bindings: Mapping[str, Any]) -> int:
    finite_left = [sum(1 for r in runs if not r.continuous)]
    finite_done = threading.Event()
    guard = threading.Lock()
    start_ns = clock.now_ns() + 20_000_000
    for r in runs:
        r.start_ns = start_ns

    def worker(run: _StreamRun) -> None:
        clock.sleep_until(start_ns)
        while True:
            with run.lock:
                if run.continuous and finite_done.is_set():
                    run.stop("co_termination")
                now = clock.now_ns()
                intended = run.due(run.next_index, now)
                if not run.check_before_issue(intended):
                    break
                job = run.issue(intended)
            clock.sleep_until(job.intended_ns)
            ok, result = _execute(run, job, backend, bindings)
            done = clock.now_ns()
            with run.lock:
                run.finish(job, ok, result, done, backend)
        with run.lock:
            run.workers_left -= 1
            last = run.workers_left == 0
        if last and not run.continuous:
            with guard:
                finite_left[0] -= 1
                if finite_left[0] == 0:
                    finite_done.set()

    threads = [
        threading.Thread(target=worker, args=(r,), name=f"{r.spec.name}-{w}", daemon=True)
        for r in runs
        for w in range(r.spec.client_threads)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    return start_ns


def _run_simulated(runs: list[_StreamRun], backend: Any, clock: Any, bindings: Mapping[str, Any]) -> int:
    """Deterministic discrete-event run against a serial backend on a fake clock."""
    start_ns = clock.now_ns()
    for r in runs:
        r.start_ns = start_ns
    free_at = {id(r): [start_ns] * r.spec.client_threads for r in runs}
    while True:
        best = None
        for order, r in enumerate(runs):
            if r.stopped:
                continue
            workers = free_at[id(r)]
            w = min(range(len(workers)), key=workers.__getitem__)
            intended = r.due(r.next_index, workers[w])
            if not r.check_before_issue(intended):
                continue
            ready = max(intended, workers[w])
            if best is None or ready < best[0]:
                best = (ready, order, r, w, intended)
        # finite streams only notice their limit in check_before_issue, so decide co-termination here
        if best is None or all(r.stopped for r in runs if not r.continuous):
            for r in runs:
                if r.continuous and not r.stopped:
                    r.stop("co_termination")
            break
        ready, _, r, w, intended = best
        clock.sleep_until(ready)
        job = r.issue(intended)
        ok, result = _execute(r, job, backend, bindings)
        clock.advance(clock.op_cost_ns)
        done = clock.now_ns()
        free_at[id(r)][w] = done
        r.finish(job, ok, result, done, backend)
    return start_ns


def validate_streams(backend: Any, streams: list[StreamSpec], bindings: Mapping[str, Any] = ()) -> None:
    """Raise WorkloadSetupError for anything that would fail before the first op."""
    bound = set(bindings)
    names = set()
    for s in streams:
        if s.name in names:
            raise WorkloadSetupError(f"duplicate stream name {s.name!r}")
        names.add(s.name)
        if not s.mix:
            raise WorkloadSetupError(f"stream {s.name!r} has no pipelines")
        if any(not (m.weight > 0) for m in s.mix):
            raise WorkloadSetupError(f"stream {s.name!r} has a non-positive mix weight")
        if s.rate is not None and not s.rate > 0:
            raise WorkloadSetupError(f"stream {s.name!r} rate must be positive")
        if s.client_threads < 1:
            raise WorkloadSetupError(f"stream {s.name!r} needs at least one client thread")
        term = s.termination
        if isinstance(term, OpCount) and term.n < 1:
            raise WorkloadSetupError(f"stream {s.name!r}: op_count must be positive")
        if isinstance(term, Duration) and not term.seconds > 0:
            raise WorkloadSetupError(f"stream {s.name!r}: duration must be positive")
        if isinstance(term, DataSize):
            if not backend.has_set(term.set):
                raise WorkloadSetupError(f"stream {s.name!r}: data_size set {term.set!r} does not exist")
            if term.threshold_bytes is None or term.threshold_bytes <= 0:
                raise WorkloadSetupError(f"stream {s.name!r}: data_size threshold must be a positive byte count")
        for m in s.mix:
            try:
                check_pipeline(m.pipeline)
            except OpBenchError as exc:
                raise WorkloadSetupError(f"stream {s.name!r}: {exc}") from None
            reads, writes = referenced_sets(m.pipeline)
            for name in sorted(reads | writes):
                if name not in bound and not backend.has_set(name):
                    raise WorkloadSetupError(f"stream {s.name!r} references missing set {name!r}")
            for _, slot in iter_slots(m.pipeline):
                if slot.kind not in SLOT_KINDS:
                    raise WorkloadSetupError(f"stream {s.name!r}: unknown slot kind {slot.kind!r}")
    if streams and all(s.termination is None for s in streams):
        raise WorkloadSetupError("every stream is continuous; at least one needs a termination clause")


def run_workload(
    backend: Any,
    streams: list[StreamSpec],
    seed: int,
    *,
    clock: Any = None,
    element_source: Callable[[str], Iterator[Element]] | None = None,
    bindings: Mapping[str, Any] | None = None,
    prescription: str = "",
    metrics: tuple[str, ...] = METRICS,
) -> MetricsReport:
    """Run all streams concurrently until each terminates, then report.

    ``element_source(stream_name)`` supplies elements for ``next_element``
    slots. A FakeClock selects the deterministic simulated executor.
    """
    clock = clock or MonotonicClock()
    bindings = dict(bindings or {})
    validate_streams(backend, streams, bindings)
    pools: dict[str, list[str]] = {}
    runs = []
    for s in streams:
        for m in s.mix:
            for _, slot in iter_slots(m.pipeline):
                name = slot.param("set")
                if slot.kind == "random_key" and name not in pools:
                    src = bindings[name] if name in bindings else backend.scan_snapshot(name)
                    pools[name] = [e.key for e in src]
        needs_elements = any(slot.kind == "next_element" for m in s.mix for _, slot in iter_slots(m.pipeline))
        elements = None
        if needs_elements:
            if element_source is None:
                raise WorkloadSetupError(f"stream {s.name!r} puts generated elements but no source was given")
            elements = element_source(s.name)
        filler = SlotFiller(random.Random(derive_seed(seed, f"slots:{s.name}")), pools, elements)
        threshold = s.termination.threshold_bytes if isinstance(s.termination, DataSize) else None
        runs.append(_StreamRun(s, seed, filler, threshold))
    timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    if getattr(clock, "simulated", False):
        start_ns = _run_simulated(runs, backend, clock, bindings)
    else:
        start_ns = _run_threads(runs, backend, clock, bindings)
    end_ns = max([clock.now_ns()] + [r.last_done_ns for r in runs if r.last_done_ns is not None])
    report = build_report(runs, start_ns, end_ns, prescription=prescription, seed=seed,
                          backend_id=getattr(backend, "backend_id", type(backend).__name__),
                          timestamp=timestamp, metrics=metrics)
    return report


def build_report(runs: list[_StreamRun], start_ns: int, end_ns: int, *, prescription: str, seed: int,
                 backend_id: str, timestamp: str, metrics: tuple[str, ...] = METRICS) -> MetricsReport:
    stream_reports = []
    for r in runs:
        active = ((r.last_done_ns - start_ns) / 1e9) if r.last_done_ns is not None else 0.0
        throughput = r.completed / active if active > 0 else 0.0
        try:
            latency = LatencySummary.from_recorder(r.recorder)
        except EmptyRecorder:
            latency = None
        stream_reports.append(StreamReport(
            name=r.spec.name, ops_completed=r.completed, ops_failed=r.failed, throughput=throughput,
            latency=latency, termination_reason=r.reason or "finished", active_seconds=active,
        ))
    report = MetricsReport(
        streams=stream_reports, duration_s=(end_ns - start_ns) / 1e9, prescription=prescription,
        seed=seed, backend=backend_id, timestamp=timestamp, metrics=tuple(metrics),
    )
    report.results = {r.spec.name: r.last_result for r in runs}
    return report
