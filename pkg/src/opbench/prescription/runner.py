"""Run a prescription end to end: generate, load, run, report."""

from __future__ import annotations

import json
import logging
import threading
from pathlib import Path
from typing import Any, Iterator

from opbench.backend import StorageBackend
from opbench.datagen import GeneratorSpec, LogImport, gen_graph, iter_elements
from opbench.driver.workload import DataSize, MetricsReport, iter_slots, referenced_sets, run_workload
from opbench.errors import RunError
from opbench.model import Element
from opbench.model import encode_element as canonical_encode
from opbench.pipeline import Ack
from opbench.prescription.format import Prescription, encode_element

log = logging.getLogger(__name__)


class _SharedElements:
    """Thread-safe iterator over one element stream, shared by all putting streams."""

    def __init__(self, it: Iterator[Element]):
        self._it = it
        self._lock = threading.Lock()

    def __iter__(self) -> "_SharedElements":
        return self

    def __next__(self) -> Element:
        with self._lock:
            return next(self._it)


def _size_gated(p: Prescription, set_name: str) -> bool:
    return any(isinstance(s.termination, DataSize) and s.termination.set == set_name for s in p.streams)


def load_dataset(p: Prescription, backend: StorageBackend) -> tuple[int, GeneratorSpec]:
    """Create and fill the prescription's data set; return (elements loaded, generator for later puts).

    Records and logs are generated until both ``count`` elements and the
    byte target are reached, unless a stream is gated on the set's size, in
    which case only ``count`` elements are preloaded and the stream does the
    rest. Graphs are always loaded whole.
    """
    ds = p.dataset
    gen = ds.generator(p.seed)
    try:
        gen.validate()
        if ds.import_path is not None:
            source: Iterator[Element] = iter(LogImport.from_path(ds.import_path))
            count = None
        elif ds.kind == "graph":
            source = iter(gen_graph(gen, ds.set))
            count = None
        else:
            source = iter_elements(gen)
            count = gen.param("count")
    except Exception as exc:
        raise RunError("datagen", exc) from exc

    try:
        backend.create_set(ds.set)
        loaded = 0
        gated = _size_gated(p, ds.set)
        for e in source:
            backend.put(ds.set, e)
            loaded += 1
            if count is None:
                continue
            if loaded >= count and (gated or backend.size_bytes(ds.set) >= ds.target_size_bytes):
                break
        for s in p.streams:
            for m in s.mix:
                for name in sorted(referenced_sets(m.pipeline)[1]):
                    if not backend.has_set(name):
                        backend.create_set(name)
    except RunError:
        raise
    except Exception as exc:
        raise RunError("load", exc) from exc
    if ds.import_path is not None:
        log.info("imported %d log lines (%d malformed)", loaded, getattr(source, "malformed", 0))
    return loaded, gen


def result_to_json(value: Any) -> Any:
    if value is None:
        return None
    if isinstance(value, Element):
        return encode_element(value)
    if isinstance(value, Ack):
        return {"ack": value.count, "seq": value.seq}
    return [encode_element(e) for e in value]  # DataSet, Multiset or ordered tuple


def run_prescription(
    p: Prescription,
    backend: StorageBackend,
    report_path: str | Path | None = None,
    *,
    clock: Any = None,
    results_path: str | Path | None = None,
) -> MetricsReport:
    """Execute ``p`` against an empty ``backend``; errors surface as RunError with a phase."""
    loaded, gen = load_dataset(p, backend)

    streams = []
    for s in p.streams:
        t = s.termination
        if isinstance(t, DataSize) and t.threshold_bytes is None:
            s = s.__class__(s.name, s.mix, s.rate, s.client_threads, DataSize(t.set, p.dataset.target_size_bytes))
        streams.append(s)

    shared: _SharedElements | None = None
    if any(slot.kind == "next_element" for s in streams for m in s.mix for _, slot in iter_slots(m.pipeline)):
        if p.dataset.kind in ("records", "logs"):
            shared = _SharedElements(iter_elements(gen, loaded))
        else:
            # graphs and imports have no unbounded source; continue with synthetic logs/records
            fallback = GeneratorSpec("logs" if p.dataset.kind is None else "records", p.seed)
            shared = _SharedElements(iter_elements(fallback, loaded))

    try:
        report = run_workload(
            backend, streams, p.seed, clock=clock,
            element_source=(lambda _name: shared) if shared is not None else None,
            prescription=p.name, metrics=p.metrics,
        )
    except Exception as exc:
        raise RunError("run", exc) from exc

    try:
        if report_path is not None:
            Path(report_path).write_text(report.to_json(), encoding="utf-8")
        if results_path is not None:
            doc = {name: result_to_json(v) for name, v in report.results.items()}
            Path(results_path).write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    except Exception as exc:
        raise RunError("report", exc) from exc
    return report


def dataset_bytes(backend: StorageBackend) -> dict[str, bytes]:
    """Canonical bytes of every set in ``backend``, for determinism checks."""
    out = {}
    for name in backend.set_names():
        buf = bytearray()
        for e in backend.scan_snapshot(name):
            canonical_encode(e, buf)
        out[name] = bytes(buf)
    return out

