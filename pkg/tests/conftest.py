import numpy as np
import pytest

from pcglm import _kernels_py

try:
    from pcglm import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None

KERNELS = [pytest.param(_kernels_py, id="python")]
if _kernels_c is not None:
    KERNELS.append(pytest.param(_kernels_c, id="cython"))


@pytest.fixture(params=KERNELS)
def kernels(request, monkeypatch):
    """Run a test once per available kernel backend."""
    from pcglm import numeric

    monkeypatch.setattr(numeric, "_impl", request.param)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance report -----------------------------------------------------

_acceptance = {}
_labels = {}


def pytest_collection_modifyitems(items):
    for item in items:
        if item.module.__name__.endswith("test_acceptance"):
            doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
            _labels[item.nodeid] = doc


def pytest_runtest_logreport(report):
    if report.nodeid not in _labels:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, label in _labels.items():
        if nodeid in _acceptance:
            mark = "PASS" if _acceptance[nodeid] == "passed" else "FAIL"
            terminalreporter.write_line(f"{mark}  {label}")
