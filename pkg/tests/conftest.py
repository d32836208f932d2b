import os
import re
from pathlib import Path

import pytest

from rpusim.data import DATA_ROOT_ENV


def _mnist_dir():
    candidates = []
    if os.environ.get(DATA_ROOT_ENV):
        candidates.append(Path(os.environ[DATA_ROOT_ENV]) / "mnist")
    candidates.append(Path("/root/data/mnist"))
    for c in candidates:
        if (c / "train-images-idx3-ubyte").exists() or (c / "train-images-idx3-ubyte.gz").exists():
            return c
    return None


@pytest.fixture(scope="session")
def mnist_dir():
    path = _mnist_dir()
    if path is None:
        pytest.skip(f"MNIST IDX files not found; set {DATA_ROOT_ENV} to a directory containing mnist/")
    return path


# acceptance outcomes, printed as one line per criterion at the end of the session
ACCEPTANCE_RESULTS = {}


@pytest.fixture
def report():
    def record(criterion, passed, detail=""):
        status = passed if isinstance(passed, str) else ("PASS" if passed else "FAIL")
        ACCEPTANCE_RESULTS[criterion] = (status, detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE_RESULTS, key=lambda c: (int(re.match(r"\d+", c).group()), c)):
        status, detail = ACCEPTANCE_RESULTS[criterion]
        terminalreporter.write_line(f"criterion {criterion}: {status}  {detail}")
