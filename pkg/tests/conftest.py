import numpy as np
import pytest

from forster_nhqc import atom
from forster_nhqc.simulation import design_pulse


@pytest.fixture(scope="session")
def baseline():
    """Dimensionless CNOT recipe: ``T = 1``, ``V = 18000``, ``omega_b = 600``."""
    return atom.ModelParams.baseline()


@pytest.fixture(scope="session")
def pulse():
    return design_pulse()


@pytest.fixture(scope="session")
def cnot():
    return np.asarray(atom.target_gate(*atom.GATES["cnot"]))


@pytest.fixture(scope="session")
def physical():
    return atom.ModelParams.physical()


@pytest.fixture(scope="session")
def physical_pulse(physical):
    return design_pulse(T=physical.T)


# -- acceptance report ------------------------------------------------------------
# Tests marked ``@pytest.mark.criterion("4", "label")`` are collected into one
# PASS/FAIL line per criterion, printed at the end of the session.  Measured
# values attached with ``record_property("measured", ...)`` are shown alongside.

_CRITERIA: dict[str, list[tuple[str, str, str]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        measured = dict(report.user_properties).get("measured", "")
        _CRITERIA.setdefault(mark.args[0], []).append((mark.args[1], report.outcome, measured))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: (int(k), k)):
        parts = _CRITERIA[key]
        ok = all(outcome == "passed" for _, outcome, _ in parts)
        detail = "; ".join(f"{label}: {outcome}" + (f" ({m})" if m else "")
                           for label, outcome, m in parts)
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
