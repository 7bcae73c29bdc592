"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE:
        tr.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
