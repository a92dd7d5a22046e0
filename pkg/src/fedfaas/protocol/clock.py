"""Timestamping: nanosecond monotonic readings with one wall anchor.

Latency breakdown arithmetic uses the monotonic clock only; the wall
anchor exists so traces from different processes can be lined up
approximately for display.
"""
from __future__ import annotations

import time


class Clock:
    """Real clock. One instance per process is plenty."""

    def __init__(self) -> None:
        self.wall_anchor_ns = time.time_ns()
        self._mono_anchor_ns = time.monotonic_ns()

    def now_ns(self) -> int:
        return time.monotonic_ns()

    def wall_ns(self, mono_ns: int) -> int:
        """Approximate wall time for a monotonic reading from this process."""
        return self.wall_anchor_ns + (mono_ns - self._mono_anchor_ns)


class FakeClock(Clock):
    """Manually advanced clock for deterministic tests."""

    def __init__(self, start_ns: int = 0) -> None:
        self.wall_anchor_ns = 0
        self._mono_anchor_ns = 0
        self._now = start_ns

    def now_ns(self) -> int:
        return self._now

    def advance(self, seconds: float) -> None:
        self._now += int(seconds * 1e9)
