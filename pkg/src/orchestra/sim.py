"""Deterministic discrete-event loop over virtual time.

Everything time-related in the engine runtime and the experiment
harness is driven through this loop; wall-clock time never enters the
system. Events at equal timestamps run in insertion order unless a tie
seed is given, in which case equal-time events are permuted
deterministically by that seed (used to exercise scheduling
interleavings).
"""

from __future__ import annotations

import heapq
import random
from typing import Callable, Optional


class EventLoop:
    def __init__(self, tie_seed: Optional[int] = None):
        self._heap: list[tuple[float, float, int, Callable[[], None]]] = []
        self._now = 0.0
        self._seq = 0
        self._tie_rng = random.Random(tie_seed) if tie_seed is not None else None

    def now(self) -> float:
        return self._now

    def schedule(self, delay: float, fn: Callable[[], None]) -> None:
        """Run ``fn`` at ``now() + delay`` (delay may be zero, never negative)."""
        assert delay >= 0, f"cannot schedule into the past (delay={delay})"
        tie = self._tie_rng.random() if self._tie_rng is not None else 0.0
        heapq.heappush(self._heap, (self._now + delay, tie, self._seq, fn))
        self._seq += 1

    def at(self, when: float, fn: Callable[[], None]) -> None:
        self.schedule(max(0.0, when - self._now), fn)

    def run(self, until: Optional[float] = None) -> float:
        """Drain the event queue; returns the final virtual time."""
        while self._heap:
            when, _tie, _seq, fn = self._heap[0]
            if until is not None and when > until:
                break
            heapq.heappop(self._heap)
            self._now = max(self._now, when)
            fn()
        return self._now

    @property
    def pending(self) -> int:
        return len(self._heap)
