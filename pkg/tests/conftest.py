import time
import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_LINES = pytest.StashKey[list]()


class _Criterion:
    def __init__(self, config, num, title, limit):
        self.config, self.num, self.title, self.limit = config, num, title, limit
        self.detail = ""

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        ok = exc_type is None
        note = self.detail
        if exc_type is not None:
            note = (str(exc).splitlines() or [exc_type.__name__])[0]
        elif self.limit is not None and elapsed > self.limit:
            ok = False
            note = f"took {elapsed:.1f}s, limit {self.limit:g}s"
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {self.num}: {self.title} ({elapsed:.2f}s) {note}".rstrip()
        self.config.stash.setdefault(_LINES, []).append(line)
        print(line)
        if exc_type is None and not ok:
            raise AssertionError(line)
        return False


@pytest.fixture
def criterion(request):
    """``with criterion(n, title, limit=seconds) as c:`` records one pass/fail line."""
    return lambda num, title, limit=None: _Criterion(request.config, num, title, limit)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
