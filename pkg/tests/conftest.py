import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mapfsplit.grid import GridGraph  # noqa: E402
from mapfsplit.instance import Instance  # noqa: E402

# three-robot 6x4 example; no obstacles
THREE_STARTS = [(1, 4), (3, 3), (6, 4)]
THREE_GOALS = [(5, 4), (4, 2), (5, 1)]


@pytest.fixture
def three_robot():
    return Instance(GridGraph(6, 4), THREE_STARTS, THREE_GOALS, "three")


def grid_from_rows(rows):
    """Rows listed top (highest row number) first, '@' blocked."""
    h = len(rows)
    blocked = np.array([[ch == "@" for ch in rows[h - 1 - r]] for r in range(h)], dtype=bool)
    return GridGraph(len(rows[0]), h, blocked)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
