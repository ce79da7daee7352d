import numpy as np
import pytest

from rscqt.design import build_scic, standard_fiducials
from rscqt.models import benchmark_target, benchmark_true

# criterion id -> (passed, detail); filled by the acceptance tests
ACCEPTANCE_RESULTS = {}


@pytest.fixture(scope="session")
def target():
    return benchmark_target()


@pytest.fixture(scope="session")
def true_set():
    return benchmark_true()


@pytest.fixture(scope="session")
def fiducials():
    return standard_fiducials()


@pytest.fixture(scope="session")
def scic(fiducials):
    return build_scic(fiducials)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
