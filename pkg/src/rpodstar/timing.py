"""Monotonic per-phase wall-clock instrumentation."""

from __future__ import annotations

import time
from contextlib import contextmanager


class PhaseTimer:
    """Accumulates named phase durations plus an independent total.

    >>> t = PhaseTimer()
    >>> with t.phase("svd"):
    ...     pass
    >>> sorted(t.phases)
    ['svd']
    """

    def __init__(self):
        self.phases: dict[str, float] = {}
        self._start = time.perf_counter()
        self.total: float | None = None

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.phases[name] = self.phases.get(name, 0.0) + time.perf_counter() - t0

    def stop(self) -> dict:
        self.total = time.perf_counter() - self._start
        return self.as_dict()

    def as_dict(self) -> dict:
        out = dict(self.phases)
        out["total"] = self.total if self.total is not None else time.perf_counter() - self._start
        return out
