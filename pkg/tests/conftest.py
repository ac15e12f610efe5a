import numpy as np
import pytest

from viscodamage.mesh import GAMMA1, GAMMA3, build_structured_mesh, classify_boundary, rectangle_spec
from viscodamage.spaces import build_velocity_dofmap


def square_mesh(h, bottom=GAMMA3, left=GAMMA1, width=1.0, height=1.0):
    spec = rectangle_spec(width, height, left=left, bottom=bottom)
    return classify_boundary(build_structured_mesh(width, height, h), spec)


@pytest.fixture
def small_square():
    """Unit square, h = 1/2, clamped on the left, contact on the bottom."""
    mesh = square_mesh("1/2")
    return mesh, build_velocity_dofmap(mesh)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---- acceptance summary: one line per criterion at the end of the run ----

ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    ACCEPTANCE[number] = (passed, detail)


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False,
                     help="also run full-scale reproduction tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip = pytest.mark.skip(reason="slow full-scale run; use --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if report.skipped and name.startswith("test_criterion_"):
        number = int(name.split("_")[2])
        ACCEPTANCE.setdefault(number, (None, report.longrepr[-1].removeprefix("Skipped: ")))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
        terminalreporter.write_line(f"criterion {number}: {status}  {detail}")
