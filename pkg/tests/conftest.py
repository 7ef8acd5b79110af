import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from hardylab.nonlinearity import NonlinearitySpec  # noqa: E402
from hardylab.radial import RadialSolution, solve_minimal  # noqa: E402

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def exp_spec():
    return NonlinearitySpec.exponential()


@pytest.fixture(scope="session")
def gelfand2(exp_spec):
    """Minimal Gelfand solution, n = 2, lambda = 1."""
    return solve_minimal(2, exp_spec, 1.0, steps=2000)


@pytest.fixture(scope="session")
def gelfand3(exp_spec):
    return solve_minimal(3, exp_spec, 2.0, steps=2000)


@pytest.fixture(scope="session")
def parabola3():
    """u = 1 - r^2 in R^3, which solves -Delta u = 6."""
    return RadialSolution.from_profile(
        3, 1.0, NonlinearitySpec.constant(6.0), lambda r: 1 - r * r, lambda r: -2 * r, steps=4000
    )


def parabola(n, steps=2000):
    """u = 1 - r^2 in R^n with the constant source 2n."""
    return RadialSolution.from_profile(
        n, 1.0, NonlinearitySpec.constant(2.0 * n), lambda r: 1 - r * r, lambda r: -2 * r, steps=steps
    )


def rate(errors, hs):
    """Least-squares slope of log(error) against log(h)."""
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])


# acceptance gate: one line per criterion in the terminal summary -------------------------

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, title, seconds, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{k:2d}] {title} ({seconds:.1f} s) {detail}")
