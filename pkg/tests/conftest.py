import warnings
from pathlib import Path

import pytest

from toricding import from_vertices, load_bundled

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def bundled():
    return {p.name: p for p in load_bundled()}


@pytest.fixture(scope="session")
def p1():
    return from_vertices([(-1,), (1,)], name="P1")


@pytest.fixture(scope="session")
def interval_m1_2():
    return from_vertices([(-1,), (2,)], raw_mode=True, name="interval_m1_2")


@pytest.fixture(scope="session")
def interval_m1_3():
    return from_vertices([(-1,), (3,)], raw_mode=True, name="interval_m1_3")


@pytest.fixture(autouse=True)
def _quiet_box_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="xi box radius")
        yield
