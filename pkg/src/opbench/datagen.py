"""Seeded synthetic data for the built-in prescriptions.

All generators are pure functions of their spec: the same spec gives the same
canonical bytes. Keys are zero-padded to ten digits so that key order equals
generation order.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

from opbench.errors import EdgeSpaceExhausted, InvalidSpec, InvalidValue
from opbench.model import (
    INT64_MIN,
    DataSet,
    Element,
    IdList,
    Record,
    Scalar,
    Tag,
)

KINDS = ("records", "logs", "graph")
LEVELS = (("INFO", 0.90), ("WARN", 0.07), ("ERROR", 0.03))
LOG_EPOCH_MS = 1_400_000_000_000

DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "records": {"count": 1000, "field_count": 3, "value_bytes": 100},
    "logs": {"count": 1000, "server_count": 16, "message_bytes": 914},
    "graph": {"n": 1000, "m": 5000, "content_bytes": 0},
}


def derive_seed(seed: int, label: str) -> int:
    """Independent 64-bit seed for a named sub-stream of ``seed``."""
    digest = hashlib.blake2b(f"{seed}:{label}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    seed: int = 0
    params: dict[str, Any] = field(default_factory=dict)

    def param(self, name: str) -> Any:
        if name in self.params:
            return self.params[name]
        return DEFAULT_PARAMS[self.kind][name]

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown generator kind {self.kind!r}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise InvalidSpec(f"seed must be a u64, got {self.seed!r}")
        defaults = DEFAULT_PARAMS[self.kind]
        for name in self.params:
            if name not in defaults:
                raise InvalidSpec(f"{self.kind}: unknown parameter {name!r}")
        for name in defaults:
            v = self.param(name)
            if type(v) is not int:
                raise InvalidSpec(f"{self.kind}.{name} must be an integer, got {v!r}")
            floor = 0 if name == "content_bytes" else 1
            if v < floor:
                raise InvalidSpec(f"{self.kind}.{name} must be >= {floor}, got {v}")
        if self.kind == "graph":
            n, m = self.param("n"), self.param("m")
            if n < 2:
                raise InvalidSpec(f"graph needs n >= 2, got {n}")
            if m < n:
                raise InvalidSpec(f"graph needs m >= n, got m={m}, n={n}")
            if m > n * (n - 1):
                raise EdgeSpaceExhausted(f"m={m} exceeds the {n * (n - 1)} possible edges")


def _rng(spec: GeneratorSpec, start: int) -> random.Random:
    return random.Random(derive_seed(spec.seed, f"{spec.kind}:{start}"))


def _text(rng: random.Random, nbytes: int) -> str:
    return rng.randbytes((nbytes + 1) // 2).hex()[:nbytes]


def record_key(i: int) -> str:
    return f"r{i:010d}"


def log_key(i: int) -> str:
    return f"l{i:010d}"


def node_key(i: int) -> str:
    return f"n{i:010d}"


def iter_records(spec: GeneratorSpec, start: int = 0) -> Iterator[Element]:
    """Unbounded record stream beginning at index ``start``."""
    spec.validate()
    rng = _rng(spec, start)
    k, vb = spec.param("field_count"), spec.param("value_bytes")
    names = [f"f{j}" for j in range(k)]
    i = start
    while True:
        values: list[Scalar] = [Scalar(Tag.INT64, rng.getrandbits(64) + INT64_MIN)]
        if k > 1:
            values.append(Scalar(Tag.FLOAT64, rng.random()))
        values.extend(Scalar(Tag.STRING, _text(rng, vb)) for _ in range(k - 2))
        yield Element(record_key(i), Record(tuple(zip(names, values))))
        i += 1


def gen_records(spec: GeneratorSpec, name: str = "records") -> DataSet:
    spec.validate()
    it = iter_records(spec)
    return DataSet(name, [next(it) for _ in range(spec.param("count"))])


def _level(u: float) -> str:
    acc = 0.0
    for level, p in LEVELS:
        acc += p
        if u < acc:
            return level
    return LEVELS[-1][0]


def iter_logs(spec: GeneratorSpec, start: int = 0) -> Iterator[Element]:
    """Unbounded log stream. Timestamps are strictly increasing in the index."""
    spec.validate()
    rng = _rng(spec, start)
    servers, mb = spec.param("server_count"), spec.param("message_bytes")
    i = start
    while True:
        ts = LOG_EPOCH_MS + i * 1000 + rng.randrange(1000)
        rec = Record((
            ("ts", Scalar(Tag.INT64, ts)),
            ("server_id", Scalar(Tag.INT64, rng.randrange(servers))),
            ("level", Scalar(Tag.STRING, _level(rng.random()))),
            ("latency_ms", Scalar(Tag.FLOAT64, rng.lognormvariate(3.0, 1.0))),
            ("msg", Scalar(Tag.STRING, _text(rng, mb))),
        ))
        yield Element(log_key(i), rec)
        i += 1


def gen_logs(spec: GeneratorSpec) -> Iterator[Element]:
    """Yield exactly ``count`` log elements, lazily."""
    spec.validate()
    it = iter_logs(spec)
    for _ in range(spec.param("count")):
        yield next(it)


def graph_edges(spec: GeneratorSpec) -> list[list[int]]:
    """Adjacency lists (by node index) of the random directed graph described by ``spec``."""
    spec.validate()
    n, m = spec.param("n"), spec.param("m")
    rng = _rng(spec, 0)
    adj: list[list[int]] = [[] for _ in range(n)]
    seen: set[tuple[int, int]] = set()
    for src in range(n):
        dst = rng.randrange(n - 1)
        if dst >= src:
            dst += 1
        adj[src].append(dst)
        seen.add((src, dst))
    need = m - n
    free = n * (n - 1) - n
    if need > free // 2:
        # dense request: sample directly from the remaining pairs
        pool = [(s, d) for s in range(n) for d in range(n) if s != d and (s, d) not in seen]
        extra = rng.sample(pool, need)
    else:
        extra = []
        while len(extra) < need:
            s, d = rng.randrange(n), rng.randrange(n)
            if s == d or (s, d) in seen:
                continue
            seen.add((s, d))
            extra.append((s, d))
    for s, d in extra:
        adj[s].append(d)
    return adj


def gen_graph(spec: GeneratorSpec, name: str = "graph") -> DataSet:
    adj = graph_edges(spec)
    n = len(adj)
    rank = Scalar(Tag.FLOAT64, 1.0 / n)
    content_bytes = spec.param("content_bytes")
    crng = _rng(spec, 1) if content_bytes else None
    out = []
    for i, targets in enumerate(adj):
        fields = [("out_links", IdList(tuple(node_key(t) for t in targets))), ("rank", rank)]
        if crng is not None:
            fields.append(("content", Scalar(Tag.STRING, _text(crng, content_bytes))))
        out.append(Element(node_key(i), Record(tuple(fields))))
    return DataSet(name, out)


def iter_elements(spec: GeneratorSpec, start: int = 0) -> Iterator[Element]:
    """Unbounded element stream for records/logs; the whole node list for graphs."""
    if spec.kind == "records":
        return iter_records(spec, start)
    if spec.kind == "logs":
        return iter_logs(spec, start)
    spec.validate()
    return iter(list(gen_graph(spec))[start:])


# -- log import ------------------------------------------------------------------

class LogImport:
    """Iterate log elements parsed from ``ts\\tserver_id\\tlevel\\tlatency_ms\\tmsg`` lines.

    Malformed lines are skipped; ``malformed`` holds the running count.
    """

    def __init__(self, lines: Iterable[bytes | str]):
        self._lines = lines
        self.malformed = 0
        self.accepted = 0

    @classmethod
    def from_path(cls, path: str | Path) -> "LogImport":
        def lines() -> Iterator[bytes]:
            with open(path, "rb") as fh:
                yield from fh
        return cls(lines())

    def _parse(self, raw: bytes | str) -> Record | None:
        try:
            line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        except UnicodeDecodeError:
            return None
        if line.endswith("\n"):
            line = line[:-1]
        parts = line.split("\t", 4)
        if len(parts) != 5:
            return None
        ts, server, level, latency, msg = parts
        try:
            latency_ms = float(latency)
            if not math.isfinite(latency_ms) or not level:
                return None
            return Record((
                ("ts", Scalar(Tag.INT64, int(ts))),
                ("server_id", Scalar(Tag.INT64, int(server))),
                ("level", Scalar(Tag.STRING, level)),
                ("latency_ms", Scalar(Tag.FLOAT64, latency_ms)),
                ("msg", Scalar(Tag.STRING, msg)),
            ))
        except (ValueError, InvalidValue):
            return None

    def __iter__(self) -> Iterator[Element]:
        for raw in self._lines:
            rec = self._parse(raw)
            if rec is None:
                self.malformed += 1
                continue
            yield Element(log_key(self.accepted), rec)
            self.accepted += 1
