import numpy as np
import pytest

from killing_cgb import catalog_metric


@pytest.fixture(scope="session")
def eh():
    return catalog_metric("eguchi-hanson")


@pytest.fixture(scope="session")
def tn():
    return catalog_metric("taub-nut")


@pytest.fixture(scope="session")
def rot1():
    return catalog_metric("flat-r4-rot1")


@pytest.fixture(scope="session")
def rot2():
    return catalog_metric("flat-r4-rot2")


@pytest.fixture(scope="session")
def r2():
    return catalog_metric("flat-r2-rot")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
