"""Prescriptions: declarative benchmark tests, their file format and the built-ins."""

from __future__ import annotations

from importlib import resources

from opbench.prescription.format import (
    DatasetSpec,
    Diagnostic,
    Prescription,
    apply_overrides,
    load_document,
    parse_document,
    parse_prescription,
    serialize,
    to_document,
    validate_prescription,
)
from opbench.prescription.runner import dataset_bytes, load_dataset, run_prescription

BUILTINS = ("fast_storage", "log_monitoring", "pagerank")
SUMMARIES = {
    "fast_storage": "put/get/delete key-value mix with a background union of inserts; reports throughput",
    "log_monitoring": "rate-limited log ingest until a size threshold, with concurrent filter+sum queries; reports latency",
    "pagerank": "iterative PageRank over a random graph, then order by rank; reports duration",
}


def builtin_text(name: str) -> str:
    if name not in BUILTINS:
        raise KeyError(f"no builtin prescription named {name!r}; choose from {', '.join(BUILTINS)}")
    return resources.files("opbench.prescription").joinpath("builtins", f"{name}.json").read_text("utf-8")


def builtin(name: str) -> Prescription:
    return parse_prescription(builtin_text(name))


__all__ = [
    "BUILTINS", "SUMMARIES", "DatasetSpec", "Diagnostic", "Prescription", "apply_overrides", "builtin",
    "builtin_text", "dataset_bytes", "load_dataset", "load_document", "parse_document", "parse_prescription",
    "run_prescription", "serialize", "to_document", "validate_prescription",
]
