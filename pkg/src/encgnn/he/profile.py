"""Operation counting and depth tracking.

Counts are the latency surrogate used throughout the benchmarks: every backend
charges the same counters for the same logical circuit, so numbers recorded
under the exact simulator carry over to the CKKS backend.
"""
from __future__ import annotations

import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterator

COUNTERS = ("add", "add_plain", "mult_ct", "mult_plain", "rotate", "rescale", "relinearize")


def _zero() -> dict[str, int]:
    return dict.fromkeys(COUNTERS, 0)


@dataclass
class OpProfile:
    counts: dict[str, int] = field(default_factory=_zero)
    stages: dict[str, dict[str, int]] = field(default_factory=dict)
    max_depth_consumed: int = 0
    wall_time_ms: float = 0.0

    def __getattr__(self, name: str) -> int:
        counts = self.__dict__.get("counts")
        if counts is not None and name in counts:
            return counts[name]
        raise AttributeError(name)

    def stage(self, name: str) -> dict[str, int]:
        return self.stages.get(name, _zero())

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            **self.counts,
            "max_depth_consumed": self.max_depth_consumed,
            "stages": {k: dict(v) for k, v in self.stages.items()},
        }
        if timing:
            out["wall_time_ms"] = self.wall_time_ms
        return out


class _Scope:
    def __init__(self, top_level: int):
        self.profile = OpProfile()
        self.top_level = top_level
        self.min_level = top_level


class Profiler:
    """Thread-safe op counter shared by every ciphertext produced by a backend."""

    def __init__(self, top_level: int):
        self.top_level = top_level
        self._lock = threading.Lock()
        self._scopes: list[_Scope] = []
        self._stages: list[str] = []

    def charge(self, op: str, n: int = 1) -> None:
        with self._lock:
            stage = self._stages[-1] if self._stages else None
            for s in self._scopes:
                s.profile.counts[op] += n
                if stage is not None:
                    s.profile.stages.setdefault(stage, _zero())[op] += n

    def touch(self, level: int) -> None:
        with self._lock:
            for s in self._scopes:
                if level < s.min_level:
                    s.min_level = level

    @contextmanager
    def scope(self) -> Iterator[OpProfile]:
        """Collect every charge made while the block runs."""
        s = _Scope(self.top_level)
        with self._lock:
            self._scopes.append(s)
        t0 = time.perf_counter()
        try:
            yield s.profile
        finally:
            s.profile.wall_time_ms = (time.perf_counter() - t0) * 1e3
            s.profile.max_depth_consumed = s.top_level - s.min_level
            with self._lock:
                self._scopes.remove(s)

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        with self._lock:
            self._stages.append(name)
        try:
            yield
        finally:
            with self._lock:
                self._stages.pop()
