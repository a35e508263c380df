import pytest

from qhavg.geometry import UnitCube, rasterize
from qhavg.solver import solve


@pytest.fixture(scope="session")
def square_field():
    return solve(rasterize(UnitCube(2), 1 / 64), (0.5, 0.5))


# acceptance verdicts, one entry per sub-check: (criterion, label, ok, detail)
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted({c for c, *_ in ACCEPTANCE}):
        subs = [(label, ok, detail) for c, label, ok, detail in ACCEPTANCE if c == crit]
        verdict = "PASS" if all(ok for _, ok, _ in subs) else "FAIL"
        tr.write_line(f"{verdict} criterion {crit}")
        for label, ok, detail in subs:
            tr.write_line(f"    [{'ok' if ok else 'FAILED'}] {label}: {detail}")
