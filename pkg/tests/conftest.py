from __future__ import annotations

import threading
import time

import pytest


class FakeClock:
    """Deterministic monotonic clock for timeout tests."""

    def __init__(self, start: float = 1000.0) -> None:
        self.t = start
        self._lock = threading.Lock()

    def now(self) -> float:
        with self._lock:
            return self.t

    def advance(self, dt: float) -> None:
        with self._lock:
            self.t += dt


@pytest.fixture
def fake_clock():
    return FakeClock()


def wait_for(pred, timeout: float = 5.0, step: float = 0.002):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if pred():
            return
        time.sleep(step)
    raise AssertionError("condition not met in time")
