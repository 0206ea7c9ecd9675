"""Storage backends: the seam between the harness and the system under test.

``StorageBackend`` is the contract every adapter implements. ``MemoryBackend``
is the reference implementation used by the test suite and by desk-scale runs.

Writing an adapter for an external system (a SQL cluster, an HBase table, a
Spark job server) means subclassing ``StorageBackend`` and honouring:

* put/get/delete are linearizable per key and return a sequence stamp from
  put/delete (any monotonically increasing integer, or None if unavailable);
* ``scan_snapshot`` fixes the key population when called and yields each of
  those keys once, in ascending key order, with the value current at read time;
* ``size_bytes`` reports the canonical-encoding size of the set's elements.

Set-valued operations run in the harness on top of ``scan_snapshot``; an
adapter that wants to push them down to its system can do so behind the same
interface as long as results are observationally identical.
"""

from __future__ import annotations

import abc
import struct
import threading
import zlib
from pathlib import Path
from typing import Iterator

from opbench.errors import CorruptSnapshot, SetAlreadyExists, SetNotFound, SnapshotIOError
from opbench.model import (
    DEFAULT_ELEMENT_SIZE_CAP,
    Element,
    check_element_size,
    decode_element,
    encode_element,
)


class StorageBackend(abc.ABC):
    backend_id = "abstract"

    @abc.abstractmethod
    def create_set(self, name: str) -> None: ...

    @abc.abstractmethod
    def drop_set(self, name: str) -> None: ...

    @abc.abstractmethod
    def has_set(self, name: str) -> bool: ...

    @abc.abstractmethod
    def set_names(self) -> list[str]: ...

    @abc.abstractmethod
    def put(self, name: str, e: Element) -> int | None: ...

    @abc.abstractmethod
    def get(self, name: str, key: str) -> Element | None: ...

    @abc.abstractmethod
    def delete(self, name: str, key: str) -> int | None: ...

    @abc.abstractmethod
    def scan_snapshot(self, name: str) -> Iterator[Element]: ...

    @abc.abstractmethod
    def size_bytes(self, name: str) -> int: ...

    @abc.abstractmethod
    def cardinality(self, name: str) -> int: ...


class _Set:
    __slots__ = ("elements", "size")

    def __init__(self) -> None:
        self.elements: dict[str, Element] = {}
        self.size = 0


class MemoryBackend(StorageBackend):
    """Thread-safe in-process backend.

    A single lock serializes writes and the key-population capture of scans;
    each write takes the next value of a backend-wide sequence counter while
    holding it, which is the operation's linearization point.
    """

    backend_id = "memory"

    def __init__(self, element_size_cap: int = DEFAULT_ELEMENT_SIZE_CAP):
        self._sets: dict[str, _Set] = {}
        self._lock = threading.Lock()
        self._seq = 0
        self.element_size_cap = element_size_cap

    def _set(self, name: str) -> _Set:
        s = self._sets.get(name)
        if s is None:
            raise SetNotFound(f"no set named {name!r}")
        return s

    def create_set(self, name: str) -> None:
        if not name:
            raise ValueError("set name must be nonempty")
        with self._lock:
            if name in self._sets:
                raise SetAlreadyExists(f"set {name!r} already exists")
            self._sets[name] = _Set()

    def drop_set(self, name: str) -> None:
        with self._lock:
            self._set(name)
            del self._sets[name]

    def has_set(self, name: str) -> bool:
        return name in self._sets

    def set_names(self) -> list[str]:
        with self._lock:
            return sorted(self._sets)

    def put(self, name: str, e: Element) -> int:
        check_element_size(e, self.element_size_cap)
        with self._lock:
            s = self._set(name)
            old = s.elements.get(e.key)
            if old is not None:
                s.size -= old.size_bytes
            s.elements[e.key] = e
            s.size += e.size_bytes
            self._seq += 1
            return self._seq

    def get(self, name: str, key: str) -> Element | None:
        with self._lock:
            return self._set(name).elements.get(key)

    def delete(self, name: str, key: str) -> int:
        with self._lock:
            s = self._set(name)
            old = s.elements.pop(key, None)
            if old is not None:
                s.size -= old.size_bytes
            self._seq += 1
            return self._seq

    def scan_snapshot(self, name: str) -> Iterator[Element]:
        # capture keys eagerly so the snapshot point is the call, not the first next()
        with self._lock:
            s = self._set(name)
            keys = sorted(s.elements)
        return self._scan(s, keys)

    def _scan(self, s: _Set, keys: list[str]) -> Iterator[Element]:
        lock = self._lock
        for key in keys:
            with lock:
                e = s.elements.get(key)
            if e is not None:
                yield e

    def size_bytes(self, name: str) -> int:
        with self._lock:
            return self._set(name).size

    def cardinality(self, name: str) -> int:
        with self._lock:
            return len(self._set(name).elements)


# -- snapshot files ---------------------------------------------------------------

MAGIC = b"BGOP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHI")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


def encode_snapshot(backend: StorageBackend) -> bytes:
    names = backend.set_names()
    out = bytearray(_HEADER.pack(MAGIC, FORMAT_VERSION, len(names)))
    for name in names:
        body = bytearray()
        count = 0
        for e in backend.scan_snapshot(name):
            encode_element(e, body)
            count += 1
        raw = name.encode("utf-8")
        out += _U32.pack(len(raw)) + raw + _U64.pack(count) + body
        out += _U32.pack(zlib.crc32(body))
    return bytes(out)


def decode_snapshot(data: bytes, backend: StorageBackend | None = None) -> StorageBackend:
    backend = backend if backend is not None else MemoryBackend()
    try:
        magic, version, nsets = _HEADER.unpack_from(data, 0)
    except struct.error:
        raise CorruptSnapshot("snapshot header truncated") from None
    if magic != MAGIC:
        raise CorruptSnapshot(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CorruptSnapshot(f"unsupported snapshot version {version}")
    pos = _HEADER.size
    try:
        for _ in range(nsets):
            (nlen,) = _U32.unpack_from(data, pos)
            pos += 4
            name = data[pos:pos + nlen].decode("utf-8")
            if len(name.encode("utf-8")) != nlen:
                raise CorruptSnapshot("set name truncated")
            pos += nlen
            (count,) = _U64.unpack_from(data, pos)
            pos += 8
            start = pos
            elements = []
            for _ in range(count):
                e, pos = decode_element(data, pos)
                elements.append(e)
            (crc,) = _U32.unpack_from(data, pos)
            if zlib.crc32(data[start:pos]) != crc:
                raise CorruptSnapshot(f"CRC mismatch in set {name!r}")
            pos += 4
            backend.create_set(name)
            for e in elements:
                backend.put(name, e)
    except CorruptSnapshot:
        raise
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise CorruptSnapshot(f"snapshot malformed at byte {pos}: {exc}") from None
    if pos != len(data):
        raise CorruptSnapshot(f"{len(data) - pos} trailing bytes after last set")
    return backend


def snapshot_to_file(backend: StorageBackend, path: str | Path) -> None:
    try:
        Path(path).write_bytes(encode_snapshot(backend))
    except OSError as exc:
        raise SnapshotIOError(f"cannot write snapshot {path}: {exc}") from exc


def restore_from_file(path: str | Path) -> MemoryBackend:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise SnapshotIOError(f"cannot read snapshot {path}: {exc}") from exc
    return decode_snapshot(data)


BACKENDS = {"memory": MemoryBackend}
