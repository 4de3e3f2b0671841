import pytest

_LINES = []


class Verdict:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.notes = []
        self.ok = True

    def check(self, cond, note):
        cond = bool(cond)
        self.ok &= cond
        self.notes.append(("ok  " if cond else "FAIL") + " " + note)
        return cond

    def line(self):
        return f"CRITERION {self.number:>2} {'PASS' if self.ok else 'FAIL'}  {self.title}"


@pytest.fixture
def criterion(request):
    made = []

    def make(number, title):
        v = Verdict(number, title)
        made.append(v)
        return v

    yield make
    for v in made:
        print(v.line())
        for n in v.notes:
            print("    " + n)
        _LINES.append(v)


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for v in sorted(_LINES, key=lambda v: v.number):
        terminalreporter.write_line(v.line())
        for n in v.notes:
            if n.startswith("FAIL"):
                terminalreporter.write_line("    " + n)
