"""Workload driver: client streams, rate control and client-side metrics."""

from opbench.driver.clock import FakeClock, MonotonicClock
from opbench.driver.latency import LatencyRecorder
from opbench.driver.workload import (
    DataSize,
    Duration,
    LatencySummary,
    MetricsReport,
    MixEntry,
    OpCount,
    StreamReport,
    StreamSpec,
    run_workload,
    schedule_next,
)

__all__ = [
    "DataSize", "Duration", "FakeClock", "LatencyRecorder", "LatencySummary", "MetricsReport",
    "MixEntry", "MonotonicClock", "OpCount", "StreamReport", "StreamSpec", "run_workload", "schedule_next",
]
