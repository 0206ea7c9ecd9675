from __future__ import annotations

import math
import threading

from opbench.errors import EmptyRecorder

LOW_NS = 1_000  # 1 us
HIGH_NS = 100_000_000_000  # 100 s
GROWTH = 1.01
_LOG_GROWTH = math.log(GROWTH)
N_BUCKETS = math.ceil(math.log(HIGH_NS / LOW_NS) / _LOG_GROWTH)


class LatencyRecorder:
    """Log-bucketed latency histogram with exact count, sum, min and max.

    Bucket ``i`` covers ``[LOW_NS * GROWTH**i, LOW_NS * GROWTH**(i+1))`` and is
    reported at its geometric midpoint, so any quantile is within
    ``sqrt(GROWTH) - 1`` (about 0.5%) of the exact order statistic. Values
    outside ``[LOW_NS, HIGH_NS)`` land in the edge buckets and are counted in
    ``clamped``; min and max stay exact regardless.
    """

    def __init__(self) -> None:
        self.counts = [0] * N_BUCKETS
        self.count = 0
        self.total_ns = 0
        self.min_ns: int | None = None
        self.max_ns: int | None = None
        self.clamped = 0
        self._lock = threading.Lock()

    @staticmethod
    def bucket_of(latency_ns: int) -> tuple[int, bool]:
        if latency_ns < LOW_NS:
            return 0, True
        if latency_ns >= HIGH_NS:
            return N_BUCKETS - 1, True
        i = int(math.log(latency_ns / LOW_NS) / _LOG_GROWTH)
        return min(i, N_BUCKETS - 1), False

    def record(self, latency_ns: int) -> None:
        i, clamped = self.bucket_of(latency_ns)
        with self._lock:
            self.counts[i] += 1
            self.count += 1
            self.total_ns += latency_ns
            if clamped:
                self.clamped += 1
            if self.min_ns is None or latency_ns < self.min_ns:
                self.min_ns = latency_ns
            if self.max_ns is None or latency_ns > self.max_ns:
                self.max_ns = latency_ns

    def quantile_ns(self, q: float) -> float:
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"quantile must be in [0, 1], got {q}")
        with self._lock:
            if self.count == 0:
                raise EmptyRecorder("no samples recorded")
            if q == 0.0:
                return float(self.min_ns)
            if q == 1.0:
                return float(self.max_ns)
            rank = max(1, math.ceil(q * self.count))
            seen = 0
            for i, c in enumerate(self.counts):
                seen += c
                if seen >= rank:
                    break
            mid = LOW_NS * GROWTH ** (i + 0.5)
            return float(min(max(mid, self.min_ns), self.max_ns))

    def quantile(self, q: float) -> float:
        """Quantile in microseconds."""
        return self.quantile_ns(q) / 1000.0

    def mean_ns(self) -> float:
        with self._lock:
            if self.count == 0:
                raise EmptyRecorder("no samples recorded")
            return self.total_ns / self.count

    def merge(self, other: "LatencyRecorder") -> None:
        with other._lock:
            counts = list(other.counts)
            stats = (other.count, other.total_ns, other.min_ns, other.max_ns, other.clamped)
        with self._lock:
            for i, c in enumerate(counts):
                self.counts[i] += c
            count, total, lo, hi, clamped = stats
            self.count += count
            self.total_ns += total
            self.clamped += clamped
            if lo is not None and (self.min_ns is None or lo < self.min_ns):
                self.min_ns = lo
            if hi is not None and (self.max_ns is None or hi > self.max_ns):
                self.max_ns = hi
