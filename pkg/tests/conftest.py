import pytest

from smforge.hardware import make_hardware
from smforge.machines import Params, build_tower, make_primitive


def toy_hardware(cyclic=False):
    """Three parts, two sectors over {x, y}; the cyclic version adds an empty
    wrap sector."""
    parts = [("A", ["s", "f"]), ("B", ["s", "m", "f"]), ("C", ["s", "f"])]
    tapes = [("X", ["x", "y"]), ("Z", ["x", "y"])]
    if cyclic:
        tapes.append(("W", []))
    return make_hardware(parts, tapes, cyclic=cyclic)


@pytest.fixture(scope="session")
def tower():
    return build_tower(Params())


@pytest.fixture(scope="session")
def lr1():
    return make_primitive("LR", k=1)


@pytest.fixture(scope="session")
def lr2():
    return make_primitive("LR", k=2)


_ACCEPTANCE = []


def record_criterion(line):
    _ACCEPTANCE.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
