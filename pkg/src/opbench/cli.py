"""Command line entry point: ``opbench run|validate|list|gen-data``.

Exit status is 0 on success, 1 when a run fails and 2 for usage or
validation errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from opbench.backend import BACKENDS, snapshot_to_file
from opbench.datagen import GeneratorSpec, gen_graph, iter_elements
from opbench.driver.clock import FakeClock, MonotonicClock
from opbench.errors import OpBenchError, PrescriptionError, RunError
from opbench.prescription import (
    BUILTINS,
    SUMMARIES,
    apply_overrides,
    builtin_text,
    load_dataset,
    load_document,
    parse_document,
    run_prescription,
    validate_prescription,
)

EXIT_OK, EXIT_RUN_FAILED, EXIT_USAGE = 0, 1, 2
SEED_ENV = "BIGOP_SEED"

log = logging.getLogger("opbench")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse exits 2 as well, but keep the synopsis on stderr
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="opbench", description="Prescription-driven benchmark harness.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a prescription and write a metrics report")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--prescription", type=Path, help="prescription file")
    src.add_argument("--builtin", choices=BUILTINS, help="built-in prescription name")
    run.add_argument("--backend", choices=sorted(BACKENDS), default="memory")
    run.add_argument("--report", type=Path, required=True, help="where to write the metrics report")
    run.add_argument("--seed", type=int, help=f"overrides the prescription seed (default: ${SEED_ENV})")
    run.add_argument("--override", action="append", default=[], metavar="PATH=VALUE",
                     help="set a dotted path in the prescription before validation, e.g. dataset.params.n=100")
    run.add_argument("--results", type=Path, help="also write each stream's last result as JSON")
    run.add_argument("--clock", choices=("real", "fake"), default="real",
                     help="fake runs a deterministic simulation in virtual time")

    val = sub.add_parser("validate", help="check a prescription file")
    val.add_argument("path", type=Path)

    sub.add_parser("list", help="list built-in prescriptions")

    gen = sub.add_parser("gen-data", help="generate a data set into a snapshot file")
    gen.add_argument("--spec", type=Path, required=True,
                     help="generator spec JSON ({kind, seed, params, set}) or a prescription")
    gen.add_argument("--out", type=Path, required=True)
    return parser


def _env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise _UsageError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _cmd_run(args: argparse.Namespace) -> int:
    if args.builtin:
        text = builtin_text(args.builtin)
    else:
        try:
            text = args.prescription.read_bytes()
        except OSError as exc:
            raise _UsageError(f"cannot read {args.prescription}: {exc}") from None
    overrides = list(args.override)
    seed = args.seed if args.seed is not None else _env_seed()
    if seed is not None:
        overrides.append(f"seed={seed}")
    doc = apply_overrides(load_document(text), overrides)
    p = parse_document(doc)
    backend = BACKENDS[args.backend]()
    clock = FakeClock() if args.clock == "fake" else MonotonicClock()
    try:
        run_prescription(p, backend, args.report, clock=clock, results_path=args.results)
    except RunError as exc:
        print(f"opbench: run failed in phase {exc.phase}: {exc.cause}", file=sys.stderr)
        return EXIT_RUN_FAILED
    log.info("report written to %s", args.report)
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        doc = load_document(args.path.read_bytes())
    except OSError as exc:
        raise _UsageError(f"cannot read {args.path}: {exc}") from None
    diags = validate_prescription(doc)
    for d in diags:
        print(f"{args.path}: {d}", file=sys.stderr)
    if diags:
        return EXIT_USAGE
    print(f"{args.path}: ok")
    return EXIT_OK


def _cmd_list(_args: argparse.Namespace) -> int:
    for name in BUILTINS:
        print(f"{name}\t{SUMMARIES[name]}")
    return EXIT_OK


def _cmd_gen_data(args: argparse.Namespace) -> int:
    try:
        doc = json.loads(args.spec.read_text("utf-8"))
    except (OSError, ValueError) as exc:
        raise _UsageError(f"cannot read spec {args.spec}: {exc}") from None
    if not isinstance(doc, dict):
        raise _UsageError("spec must be a JSON object")
    if "dataset" in doc:
        p = parse_document(doc)
        backend = BACKENDS["memory"]()
        try:
            load_dataset(p, backend)
        except RunError as exc:
            print(f"opbench: {exc}", file=sys.stderr)
            return EXIT_RUN_FAILED
    else:
        try:
            spec = GeneratorSpec(doc["kind"], doc.get("seed", 0), dict(doc.get("params", {})))
        except (KeyError, TypeError) as exc:
            raise _UsageError(f"spec needs at least a kind: {exc}") from None
        name = doc.get("set", spec.kind)
        spec.validate()
        backend = BACKENDS["memory"]()
        backend.create_set(name)
        if spec.kind == "graph":
            elements = iter(gen_graph(spec, name))
        else:
            it = iter_elements(spec)
            elements = (next(it) for _ in range(spec.param("count")))
        for e in elements:
            backend.put(name, e)
    snapshot_to_file(backend, args.out)
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "validate": _cmd_validate, "list": _cmd_list, "gen-data": _cmd_gen_data}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except PrescriptionError as exc:
        print(f"opbench: invalid prescription: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OpBenchError as exc:
        print(f"opbench: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
