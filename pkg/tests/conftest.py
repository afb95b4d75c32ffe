import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fleetcluster.milp import ModelInstance  # noqa: E402


def _row(model: ModelInstance, name: str):
    for c in model.constraints:
        if c.name == name:
            return c
    raise KeyError(name)


def implied(model: ModelInstance, con: str, known: dict[str, float], target: str) -> float:
    """Value of ``target`` that makes row ``con`` hold with equality, every
    other variable in the row taken from ``known`` (missing ones are 0)."""
    row = _row(model, con)
    names = [model.variables[i].name for i in row.index]
    acc, tcoef = 0.0, None
    for n, a in zip(names, row.coef):
        if n == target:
            tcoef = a
        else:
            acc += a * known.get(n, 0.0)
    assert tcoef is not None, f"{target} not in {con}"
    return (row.rhs - acc) / tcoef


def row_slack(model: ModelInstance, con: str, values: dict[str, float]) -> float:
    """``rhs - lhs`` of row ``con`` at the given point (missing vars are 0)."""
    row = _row(model, con)
    lhs = sum(a * values.get(model.variables[i].name, 0.0) for i, a in zip(row.index, row.coef))
    return row.rhs - lhs


@pytest.fixture
def row():
    return _row


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
