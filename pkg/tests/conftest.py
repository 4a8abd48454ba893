import re

import numpy as np
import pytest

from panoplane.sphere import EquirectGrid
from panoplane.synth import make_room, render_gt


@pytest.fixture(scope="session")
def grid256():
    return EquirectGrid(512, 256)


@pytest.fixture(scope="session")
def room_scene():
    return make_room((4.0, 3.0, 5.0), (0.5, -0.2, 0.3))


@pytest.fixture(scope="session")
def room_gt(room_scene, grid256):
    """(depth, normals, boundary, labels, rgb) of the 6-wall room."""
    return render_gt(room_scene, grid256)


_acceptance_results = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    m = re.search(r"test_acceptance\.py::.*test_criterion_(\d+)_(\w+)", report.nodeid)
    if m:
        _acceptance_results[int(m.group(1))] = (m.group(2), report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_acceptance_results):
        name, outcome = _acceptance_results[num]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} [{name}]: {status}")


def dilate_wrap(mask: np.ndarray, iterations: int) -> np.ndarray:
    """4-neighborhood dilation with longitude wrap, rows clamped."""
    out = mask.copy()
    for _ in range(iterations):
        grown = out | np.roll(out, 1, axis=1) | np.roll(out, -1, axis=1)
        grown[1:] |= out[:-1]
        grown[:-1] |= out[1:]
        out = grown
    return out
