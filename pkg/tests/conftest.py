import sys

import numpy as np
import pytest


def torus_knot(n_samples=8193, R=2.0, r=0.7, p=2, q=3):
    t = np.linspace(0.0, 2 * np.pi, n_samples)
    rad = R + r * np.cos(q * t)
    return np.stack([rad * np.cos(p * t), rad * np.sin(p * t), r * np.sin(q * t)], axis=1)


@pytest.fixture(scope="session")
def knot_points():
    return torus_knot()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
