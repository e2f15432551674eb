import time

import pytest

_ACCEPTANCE = []


class Criterion:
    """Collects checks for one acceptance criterion and reports a single line."""

    def __init__(self, number, title, budget):
        self.number, self.title, self.budget = number, title, budget
        self.failures, self.notes = [], []
        self.start = time.perf_counter()

    def check(self, ok, message):
        if not ok:
            self.failures.append(message)
        return ok

    def note(self, message):
        self.notes.append(message)

    def finish(self):
        elapsed = time.perf_counter() - self.start
        if self.budget is not None:
            self.check(elapsed < self.budget, f"runtime {elapsed:.1f}s exceeds {self.budget:g}s")
        status = "PASS" if not self.failures else "FAIL"
        detail = "; ".join(self.failures or self.notes)
        line = f"[{status}] criterion {self.number}: {self.title} ({elapsed:.1f}s) {detail}".rstrip()
        _ACCEPTANCE.append(line)
        print(line)
        assert not self.failures, line


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
