import numpy as np
import pytest

from rvzhomotopy.cw import CwModel

NOMINAL_X0 = np.array([0.03031809, 0.0, 31.16639, -0.02963377, 0.04570523, 0.0])
ORIGIN = np.zeros(6)


def rk4_transition(A, B, dt, h=1e-3):
    """Integrate d/dt M = [[A, B], [0, 0]] M from the identity; returns (phi, gamma)."""
    Ab = np.zeros((9, 9))
    Ab[:6, :6] = A
    Ab[:6, 6:] = B
    M = np.eye(9)
    steps = int(round(dt / h))
    h = dt / steps
    for _ in range(steps):
        k1 = Ab @ M
        k2 = Ab @ (M + 0.5 * h * k1)
        k3 = Ab @ (M + 0.5 * h * k2)
        k4 = Ab @ (M + h * k3)
        M = M + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return M[:6, :6], M[:6, 6:]


@pytest.fixture
def model():
    return CwModel()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
