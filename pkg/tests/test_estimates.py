import warnings
from math import pi, sqrt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardylab.errors import ConfigurationError, PreconditionError, RangeError, UnstableSolutionError
from hardylab.estimates import (
    Cutoff,
    admissible_alpha,
    alpha_scan,
    cap_fraction,
    fitted_constant,
    gelfand_family,
    gt_constant,
    linfty_ratio,
    lp_norm,
    morrey_norm,
    pipeline_slack,
    potential_bound,
    singular_quadratic_form,
    singular_solution_check,
    sz_defect,
    weighted_dirichlet,
)
from hardylab.levelset import radial_field
from hardylab.nonlinearity import NonlinearitySpec
from hardylab.radial import RadialSolution, branch_lambda, integrate_radial, solve_minimal
from conftest import parabola
from oracles import ball_volume, singular_q_sweep

ZERO = NonlinearitySpec.constant(0.0)


def _constant(n, c=1.0, steps=1000):
    return RadialSolution.from_profile(n, 0.0, ZERO, lambda r: c + 0 * r, lambda r: 0 * r, steps=steps)


# admissible exponents ---------------------------------------------------------------------

def test_alpha_examples():
    assert admissible_alpha(3).interval == pytest.approx((1.0, 2.0), abs=1e-12)
    assert admissible_alpha(4).interval == pytest.approx((2.0, 6 - 2 * sqrt(3)), abs=1e-10)
    assert admissible_alpha(5).empty
    assert admissible_alpha(9, radial=True).interval == pytest.approx((7.0, 2 + 4 * sqrt(2)), abs=1e-10)
    assert admissible_alpha(10, radial=True).empty


def test_alpha_scan_thresholds():
    rows = alpha_scan(2, 15)
    assert [n for n, g, _ in rows if not g.empty] == [3, 4]
    assert [n for n, _, r in rows if not r.empty] == list(range(2, 10))


def test_alpha_weighted_window():
    a = admissible_alpha(6, window="weighted")
    assert not a.empty and a.window == (0.0, 5.0)
    assert all(a.condition(x) for x in np.linspace(a.interval[0] + 1e-9, a.interval[1] - 1e-9, 20))


@given(st.integers(2, 20), st.booleans())
def test_alpha_certificate(n, radial):
    assert admissible_alpha(n, radial).certificate()


@given(st.integers(2, 20), st.floats(0, 1))
def test_alpha_interval_consistent(n, t):
    a = admissible_alpha(n)
    if a.empty:
        return
    lo, hi = a.interval
    x = lo + t * (hi - lo)
    if lo < x < hi:
        assert a.contains(x)


# Sternberg-Zumbrun -------------------------------------------------------------------------

def test_sz_explicit(parabola3):
    rep = sz_defect(parabola3, lambda r: 1 - r, lambda r: -1 + 0 * r, check_stability=False)
    assert rep.lhs == pytest.approx(16 * pi / 15, abs=1e-6)
    assert rep.rhs == pytest.approx(48 * pi / 15, abs=1e-6)
    assert rep.slack == pytest.approx(32 * pi / 15, abs=1e-6)


def test_sz_zero_eta(gelfand2):
    rep = sz_defect(gelfand2, lambda r: 0 * r)
    assert rep.lhs == 0 and rep.rhs == 0 and rep.holds


def test_sz_gelfand_cosine(gelfand2):
    rep = sz_defect(gelfand2, lambda r: np.cos(pi * r / 2), lambda r: -pi / 2 * np.sin(pi * r / 2))
    assert rep.holds and rep.slack >= 0


def test_sz_refuses_unstable():
    spec = NonlinearitySpec.exponential()
    m0 = 3.0  # beyond the fold at 2 log 2
    sol = integrate_radial(2, spec, branch_lambda(2, spec, m0), m0, steps=2000)
    with pytest.raises(UnstableSolutionError):
        sz_defect(sol, lambda r: 1 - r)


def test_sz_eta_must_vanish(gelfand2):
    with pytest.raises(PreconditionError):
        sz_defect(gelfand2, lambda r: 1 + 0 * r)


# weighted Dirichlet and the proof chain ----------------------------------------------------

def test_weighted_explicit(parabola3):
    rep = weighted_dirichlet(parabola3, 1.5, check_stability=False)
    assert rep.lhs == pytest.approx(16 * pi / 3.5, rel=1e-10)
    assert rep.rhs == pytest.approx(4 * pi * 4 * (1 - 0.9**5) / 5, rel=1e-10)


def test_weighted_constant_u():
    rep = weighted_dirichlet(_constant(3), 1.5)
    assert rep.lhs == 0 and rep.empirical_constant == 0


def test_weighted_ratio_bounded_on_branch():
    lam_star, fam = gelfand_family(3, [0.25, 0.5, 0.9], steps=1000)
    ratios = [weighted_dirichlet(s, 1.5, delta=0.1).empirical_constant for _, s in fam]
    assert np.all(np.isfinite(ratios)) and max(ratios) < 10 * min(ratios)


def test_weighted_alpha_checks(gelfand3):
    with pytest.raises(RangeError):
        weighted_dirichlet(gelfand3, 2.0)
    # off-centre poles use the general condition, which has no solutions in R^5
    sol = solve_minimal(5, NonlinearitySpec.exponential(), 1.0, steps=500)
    with pytest.raises(RangeError):
        weighted_dirichlet(sol, 3.5, y=0.2)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        rep = weighted_dirichlet(sol, 3.5, y=0.2, override=True)
    assert rep.extras["override"] and len(w) == 1


def test_pipeline_explicit(parabola3):
    reps = pipeline_slack(parabola3, 1.5, delta=0.5, epsilon=0.1, check_stability=False)
    assert len(reps) == 10
    assert all(r.holds for r in reps)
    assert [r.name for r in reps][-1] == "weighted_dirichlet"


def test_pipeline_off_centre(gelfand3):
    reps = pipeline_slack(gelfand3, 1.5, y=0.3)
    assert all(r.holds for r in reps)
    # the Hardy link with kappa -> 0 agrees with the unregularised weight integral
    assert reps[0].extras["kappa_gap"] <= 1e-4


def test_pipeline_bound_dominates_direct_integral():
    _, fam = gelfand_family(3, [0.25, 0.5, 0.9, 0.99], steps=1000)
    for _, sol in fam:
        bound = pipeline_slack(sol, 1.5, y=0.2)[-1].rhs
        direct = weighted_dirichlet(sol, 1.5, y=0.2, delta=0.5).lhs
        assert bound >= 0.95 * direct


def test_pipeline_no_absorption():
    sol = solve_minimal(10, NonlinearitySpec.exponential(), 8.0, steps=500)
    with pytest.raises(ConfigurationError):
        pipeline_slack(sol, 8.1)


@given(st.floats(1.05, 1.95), st.floats(0.0, 0.45), st.floats(0.2, 2.5))
def test_pipeline_random(alpha, y, lam):
    sol = solve_minimal(3, NonlinearitySpec.exponential(), lam, steps=400)
    try:
        reps = pipeline_slack(sol, alpha, y=y or None, delta=0.5, n_rho=32, n_theta=32)
    except ConfigurationError:
        return
    assert all(r.holds for r in reps)


def test_cutoff_profile():
    c = Cutoff(0.4)
    r = np.linspace(0, 1, 2001)
    assert np.all(c.value(r[r <= 0.8]) == 1) and c.value(1.0) == 0
    assert np.max(np.abs(c.deriv(r))) <= 3 / 0.4 + 1e-12
    fd = np.gradient(c.value(r), r)
    smooth = np.abs(r - 0.8) > 0.01
    assert np.allclose(fd[smooth][5:-5], c.deriv(r)[smooth][5:-5], atol=1e-3)


# potential and L-infinity --------------------------------------------------------------------

def test_potential_constant():
    rep = potential_bound(_constant(3), delta=0.5)
    assert rep.lhs == pytest.approx(0, abs=1e-14) and rep.rhs == 0


def test_potential_parabola(parabola3):
    rep = potential_bound(parabola3, delta=1.0)
    # average of 1 - r^2 over B_{1/2} is 1 - (3/5)(1/4)
    assert rep.lhs == pytest.approx(3 / 20, rel=1e-10)
    assert rep.rhs == pytest.approx(4 * pi, rel=1e-10)
    assert rep.extras["gt_holds"]


def test_potential_fitted_constant_on_branch():
    spec = NonlinearitySpec.exponential()
    reps = [potential_bound(solve_minimal(2, spec, lam), delta=0.5) for lam in (0.5, 1.9)]
    assert fitted_constant(reps) <= gt_constant(2)
    assert all(r.extras["gt_holds"] for r in reps)


def test_linfty_parabola(parabola3):
    # ||u||_1 = 8 pi / 15 and ||grad u||^2 on 1/2 < r < 1 is 4 pi * 4 (1 - 1/32) / 5
    expect = 1 / (8 * pi / 15 + sqrt(16 * pi * 31 / 160))
    assert linfty_ratio(parabola3).empirical_constant == pytest.approx(expect, rel=1e-6)


def test_linfty_zero():
    assert linfty_ratio(_constant(3, 0.0)).empirical_constant == 0.0


def test_linfty_grows_at_n10():
    _, fam = gelfand_family(10, [0.9, 0.99, 0.999], steps=1000)
    vals = [linfty_ratio(s).empirical_constant for _, s in fam]
    assert vals[0] < vals[1] < vals[2]


# the singular solution -----------------------------------------------------------------------

def test_singular_n10():
    rep = singular_solution_check(10)
    assert rep.residual <= 1e-8 and rep.nonnegative and rep.passed
    assert rep.hardy_constant == rep.potential_constant == 16


def test_singular_n9_witness():
    rep = singular_solution_check(9)
    assert not rep.nonnegative and rep.witness[1] < 0 and rep.consistent


def test_singular_n12_strict():
    rep = singular_solution_check(12)
    assert min(rep.q_values) > 0 and rep.consistent


@pytest.mark.parametrize("n", [3, 9, 10, 12])
def test_singular_threshold(n):
    assert singular_solution_check(n).nonnegative == (n >= 10)


@given(st.integers(3, 14), st.floats(0.05, 1.0))
def test_singular_form_matches_quadrature(n, s):
    assert singular_quadratic_form(n, s) == pytest.approx(singular_q_sweep(n, s), rel=1e-6, abs=1e-8)


# Morrey and L^p -----------------------------------------------------------------------------

def test_morrey_constant_five_ball():
    norm = morrey_norm(_constant(5), 2, 5, which="value")
    assert norm**2 == pytest.approx(8 * pi**2 / 15, rel=1e-10)


def test_morrey_zero():
    assert morrey_norm(_constant(5, 0.0), 2, 2.5, which="value") == 0.0


def test_morrey_grid_matches_radial():
    f = radial_field(3, 41, 0.0, 1.0)
    g = f.like(np.ones(f.shape))
    assert morrey_norm(g, 1, 3) == pytest.approx(ball_volume(3), rel=0.02)


def test_cap_fraction():
    assert cap_fraction(7, 0.0) == pytest.approx(0.5)
    c = np.linspace(-1, 1, 11)
    assert np.allclose(cap_fraction(3, c), (1 - c) / 2)


def test_lp_norm(parabola3):
    assert lp_norm(parabola3, 1) == pytest.approx(8 * pi / 15, rel=1e-6)
    f = radial_field(2, 81, 0.0, 1.0)
    assert lp_norm(f.like(np.ones(f.shape)), 2) == pytest.approx(sqrt(pi), rel=1e-2)


@given(st.floats(1.0, 4.0), st.floats(0.5, 5.0))
def test_morrey_dominates_scaled_lp(p, lam):
    # the largest ball (radius 2) contains the domain
    sol = parabola(5, steps=400)
    m = morrey_norm(sol, p, lam, which="value", centers=4, radii=3)
    assert m >= (2.0 ** (lam - 5)) ** (1 / p) * lp_norm(sol, p) * (1 - 1e-9)
