"""Shared helpers for the test suite, plus the acceptance summary hook."""

import numpy as np
import pytest

_ACCEPTANCE_RESULTS = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1].removeprefix("test_").replace("_", " ")
        _ACCEPTANCE_RESULTS[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, outcome in _ACCEPTANCE_RESULTS.items():
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"  [ACCEPTANCE] {name}: {verdict}")

from hbm.lti import LtiSystem
from hbm.quadrotor import quadrotor_system


def random_stabilizable_system(rng, n=None, m=None, dt=0.05) -> LtiSystem:
    """Random (A, B) pair rescaled so every mode is controllable enough to pass
    the stabilizability test (dense random B makes uncontrollable modes
    measure-zero)."""
    n = n if n is not None else int(rng.integers(2, 7))
    m = m if m is not None else int(rng.integers(1, n))
    A = rng.normal(size=(n, n))
    A *= rng.uniform(0.5, 1.5) / max(np.abs(np.linalg.eigvals(A)))
    B = rng.normal(size=(n, m))
    return LtiSystem(A=A, B=B, dt=dt)


def random_objective(rng, n, m, with_cross=False):
    """Random PD (Q, R) and optionally a small cross term S keeping the
    augmented matrix PSD."""
    Mq = rng.normal(size=(n, n))
    Q = Mq @ Mq.T + 0.1 * np.eye(n)
    Mr = rng.normal(size=(m, m))
    R = Mr @ Mr.T + 0.1 * np.eye(m)
    S = np.zeros((n, m))
    if with_cross:
        S = 0.05 * rng.normal(size=(n, m))
        aug = np.block([[Q, S], [S.T, R]])
        if np.min(np.linalg.eigvalsh((aug + aug.T) / 2)) <= 1e-9:
            S = np.zeros((n, m))
    return Q, R, S


@pytest.fixture(scope="session")
def quad():
    return quadrotor_system()
