"""Clocks used by the workload driver.

``MonotonicClock`` drives real runs. ``FakeClock`` makes the driver switch to
a deterministic single-threaded simulation in which every operation costs
``op_cost_ns`` of virtual time, plus whatever the backend adds through
``advance`` (this is how stalls are injected in tests).
"""

from __future__ import annotations

import time


class MonotonicClock:
    simulated = False

    def now_ns(self) -> int:
        return time.monotonic_ns()

    def sleep_until(self, t_ns: int) -> None:
        remaining = t_ns - time.monotonic_ns()
        if remaining > 0:
            time.sleep(remaining / 1e9)


class FakeClock:
    simulated = True

    def __init__(self, start_ns: int = 0, op_cost_ns: int = 1_000):
        if op_cost_ns < 1:
            raise ValueError("op_cost_ns must be positive so closed-loop streams make progress")
        self._now = start_ns
        self.op_cost_ns = op_cost_ns

    def now_ns(self) -> int:
        return self._now

    def sleep_until(self, t_ns: int) -> None:
        if t_ns > self._now:
            self._now = t_ns

    def advance(self, ns: int) -> None:
        if ns < 0:
            raise ValueError("a monotonic clock cannot go back")
        self._now += ns
