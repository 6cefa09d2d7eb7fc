"""Injectable clocks.

Scenario runs use a logical millisecond counter so replays are byte-identical;
the service uses wall time.
"""

from __future__ import annotations

import threading
import time


class LogicalClock:
    """Monotone counter; every reading advances by ``step`` milliseconds."""

    def __init__(self, start: int = 0, step: int = 1):
        self._now = start
        self._step = step
        self._lock = threading.Lock()

    def now_ms(self) -> int:
        with self._lock:
            self._now += self._step
            return self._now

    def peek_ms(self) -> int:
        return self._now


class WallClock:
    def now_ms(self) -> int:
        return time.time_ns() // 1_000_000

    def peek_ms(self) -> int:
        return self.now_ms()


def make_clock(kind: str, start: int = 0):
    if kind == "logical":
        return LogicalClock(start=start)
    if kind == "wall":
        return WallClock()  # start is meaningless for wall time
    raise ValueError(f"unknown clock kind: {kind}")
