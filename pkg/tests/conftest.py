import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

_ACCEPTANCE = {}


class _Recorder:
    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.checks = []

    def check(self, label, ok, detail=""):
        self.checks.append((label, bool(ok), detail))

    @property
    def passed(self):
        return bool(self.checks) and all(ok for _, ok, _ in self.checks)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        failed = [f"{label} ({detail})" for label, ok, detail in self.checks if not ok]
        tail = "; failed: " + ", ".join(failed) if failed else ""
        return f"criterion {self.number:2d} {status}  {self.title}{tail}"


@pytest.fixture
def criterion(request):
    """Collects sub-checks of one acceptance criterion and asserts them all."""
    def make(number, title):
        rec = _Recorder(number, title)
        _ACCEPTANCE[number] = rec
        return rec
    return make


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number].line())
