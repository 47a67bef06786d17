import numpy as np
import pytest

from mwalign import synthetic

# acceptance results collected by test_acceptance.py, printed at the end of the run
ACCEPTANCE = {}


def record(criterion: str, passed, detail: str = ""):
    """``passed`` is True, False or None (skipped)."""
    ACCEPTANCE[criterion] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (len(k), k)):
        passed, detail = ACCEPTANCE[key]
        status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        terminalreporter.write_line(f"{status} {key} {detail}".rstrip())


@pytest.fixture(scope="session")
def box_mesh():
    return synthetic.box_mesh(rng=0)


@pytest.fixture(scope="session")
def box_samples(box_mesh):
    from mwalign import mesh_to_samples
    return mesh_to_samples(box_mesh)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
