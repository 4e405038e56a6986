from __future__ import annotations

import pytest

from sfroute.graph import Network

_CRITERIA: list[tuple[str, bool, str]] = []


def record_criterion(label: str, passed: bool, detail: str) -> None:
    _CRITERIA.append((label, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(_CRITERIA, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")


def path_graph(n: int) -> Network:
    return Network(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(leaves: int) -> Network:
    # hub is node 0
    return Network(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def cycle_graph(n: int) -> Network:
    return Network(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> Network:
    return Network(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


@pytest.fixture
def path4() -> Network:
    return path_graph(4)


@pytest.fixture
def square() -> Network:
    return cycle_graph(4)
