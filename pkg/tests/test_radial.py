import io
from math import log

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardylab.errors import BeyondExtremalError, PreconditionError
from hardylab.nonlinearity import NonlinearitySpec
from hardylab.radial import (
    RadialSolution,
    branch_lambda,
    fold,
    integrate_radial,
    residual,
    solve_minimal,
    trace_branch,
)
from conftest import rate
from oracles import liouville_profile, liouville_u0


def test_constant_source_profile():
    sol = integrate_radial(3, NonlinearitySpec.constant(1.0), 1.0, 1 / 6)
    assert abs(sol.boundary_value) <= 1e-8
    assert np.allclose(sol.u, (1 - sol.grid**2) / 6, atol=1e-12)


def test_liouville_shot_hits_zero():
    sol = integrate_radial(2, NonlinearitySpec.exponential(), 1.0, liouville_u0(1.0))
    assert abs(sol.boundary_value) <= 1e-9
    assert np.max(np.abs(sol.u - liouville_profile(1.0, sol.grid))) <= 1e-9


def test_near_singular_profile_n10():
    # u(0) = 40 puts the profile on top of -2 log r away from the origin;
    # u(1) is zero to rounding (the sign is not resolved at this level)
    sol = integrate_radial(10, NonlinearitySpec.exponential(16, 1), 1.0, 40.0, steps=4000)
    assert not sol.diverged
    assert abs(sol.boundary_value) <= 1e-12
    away = sol.grid >= 0.1
    assert np.max(np.abs(sol.u[away] + 2 * np.log(sol.grid[away]))) <= 1e-10


def test_divergence_flag():
    sol = integrate_radial(2, NonlinearitySpec.power(-1, 2), 100.0, 1.0)
    assert sol.diverged and 0 < sol.blowup_radius < 1
    assert np.isnan(sol.u[-1])


def test_minimal_liouville():
    sol = solve_minimal(2, NonlinearitySpec.exponential(), 1.0)
    assert round(sol.center_value, 3) == 0.317
    assert sol.center_value == pytest.approx(liouville_u0(1.0), abs=1e-9)


def test_minimal_constant_source():
    sol = solve_minimal(3, NonlinearitySpec.constant(1.0), 6.0)
    assert sol.center_value == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(sol.u, 1 - sol.grid**2, atol=1e-10)


def test_minimal_near_fold_from_below():
    sol = solve_minimal(2, NonlinearitySpec.exponential(), 1.999)
    assert sol.center_value < 2 * log(2)
    assert sol.center_value == pytest.approx(liouville_u0(1.999), abs=1e-6)


def test_beyond_extremal():
    with pytest.raises(BeyondExtremalError):
        solve_minimal(2, NonlinearitySpec.exponential(), 2.1)
    with pytest.raises(PreconditionError):
        solve_minimal(2, NonlinearitySpec.exponential(), -1.0)


def test_fold_liouville():
    lam, u0 = fold(2, NonlinearitySpec.exponential())
    assert lam == pytest.approx(2.0, abs=1e-4)
    assert u0 == pytest.approx(2 * log(2), abs=1e-3)


def test_fold_dimension_ten():
    br = trace_branch(10, NonlinearitySpec.exponential(), eigenvalues=False)
    assert br.lambda_star == pytest.approx(16.0, abs=1e-2)
    assert not br.fold_interior


def test_linear_branch():
    br = trace_branch(3, NonlinearitySpec.constant(1.0), m0_max=2.0, steps=800)
    lam, u0, mu = br.arrays()
    assert np.allclose(lam, 6 * u0, rtol=1e-9)
    assert not br.fold_interior
    assert np.ptp(mu) <= 1e-9 * mu[0]
    assert mu[0] == pytest.approx(np.pi**2, rel=1e-4)


def test_branch_csv_header():
    br = trace_branch(2, NonlinearitySpec.exponential(), lambda_cap=1.0, eigenvalues=False)
    text = br.to_csv()
    assert text.splitlines()[0] == "lambda,u0,mu1"


def test_residual_polynomial():
    sol = RadialSolution.from_profile(3, 1.0, NonlinearitySpec.constant(6.0), lambda r: 1 - r * r,
                                      lambda r: -2 * r, steps=1000)
    assert residual(sol) <= 1e-10


def test_residual_gelfand_fine():
    sol = solve_minimal(2, NonlinearitySpec.exponential(), 1.0, steps=10_000)
    assert residual(sol) <= 1e-6


def test_residual_singular_profile():
    sol = RadialSolution.from_profile(10, 1.0, NonlinearitySpec.exponential(16, 1), lambda r: -2 * np.log(r),
                                      lambda r: -2 / r, steps=4000, r_min=0.1)
    assert residual(sol) <= 1e-6


def test_residual_converges_on_closed_form():
    # fourth-order stencils: halving h divides the residual by about 16
    prof = [RadialSolution.from_profile(10, 1.0, NonlinearitySpec.exponential(16, 1), lambda r: -2 * np.log(r),
                                        lambda r: -2 / r, steps=s, r_min=0.1) for s in (200, 400, 800)]
    res = [residual(p) for p in prof]
    assert rate(res, [p.h for p in prof]) >= 3.5


def test_profile_csv_roundtrip(gelfand2):
    text = gelfand2.to_csv()
    rows = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1)
    assert np.array_equal(rows[:, 1], gelfand2.u)


@given(st.floats(0.05, 1.95))
def test_minimal_matches_liouville(lam):
    sol = solve_minimal(2, NonlinearitySpec.exponential(), lam, steps=400)
    assert np.max(np.abs(sol.u - liouville_profile(lam, sol.grid))) <= 1e-7


@given(st.floats(0.1, 3.0), st.integers(2, 6))
def test_branch_scaling(m0, n):
    # u(0) = m0 with lambda(m0) reproduces a zero at r = 1
    spec = NonlinearitySpec.exponential()
    lam = branch_lambda(n, spec, m0)
    if np.isfinite(lam):
        sol = integrate_radial(n, spec, lam, m0, steps=200)
        assert abs(sol.boundary_value) <= 1e-8 * max(1.0, m0)


@given(st.floats(0.1, 1.9))
def test_solution_positive_and_decreasing(lam):
    sol = solve_minimal(2, NonlinearitySpec.exponential(), lam, steps=400)
    assert np.all(sol.u[:-1] > 0)
    assert np.all(sol.uprime[1:] < 0)
