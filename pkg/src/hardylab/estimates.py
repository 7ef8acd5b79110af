"""Stability-driven estimates for radial solutions on the unit ball.

Covers the Sternberg-Zumbrun inequality, the weighted Dirichlet bound and
the chain of inequalities that proves it, the admissible exponents alpha
and the resulting dimension thresholds, the potential representation and
the L-infinity ratio, the singular solution -2 log r, and Morrey / L^p
norms.

Integrals with the singular weight |x - y|^(-alpha) use the polar
Gauss-Jacobi rule of :mod:`hardylab.quadrature`; the error estimate
attached to each report is the change under a 1.5x refinement of that rule.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from math import sqrt

import numpy as np
from scipy.integrate import simpson
from scipy.signal import fftconvolve
from scipy.special import betainc

from .errors import ConfigurationError, PreconditionError, RangeError, UnstableSolutionError
from .levelset import ScalarField
from .nonlinearity import NonlinearitySpec
from .quadrature import PolarRule, ball_volume, gauss_jacobi_interval, gauss_legendre, sphere_area
from .radial import RadialSolution, fold, residual, solve_minimal
from .reports import ROUNDING, EstimateReport, InequalityReport, _plain
from .spectrum import _profile, principal_eigenvalue

KAPPAS = (1e-2, 1e-3, 1e-4)
MORREY_CENTERS = 16
MORREY_RADII = 12
BLOWUP_FACTOR = 10.0  # growth convention for flagging blow-up along a family


# admissible exponents -------------------------------------------------------------

def condition_general(alpha, n):
    """(alpha-2)^2/4 < (n-1-alpha)^2/(n-1) with 0 <= alpha < n-1."""
    return 0 <= alpha < n - 1 and (alpha - 2) ** 2 / 4 < (n - 1 - alpha) ** 2 / (n - 1)


def condition_radial(alpha, n):
    """(alpha-2)^2/4 < n-1 with 0 <= alpha < n-1."""
    return 0 <= alpha < n - 1 and (alpha - 2) ** 2 / 4 < n - 1


def _general_positive_set(n):
    """Open intervals where 4(n-1-a)^2 - (n-1)(a-2)^2 > 0.

    The quadratic factors as L1 L2 with L1 = 2(n-1-a) - s(a-2) and
    L2 = 2(n-1-a) + s(a-2), s = sqrt(n-1); its roots are those of the two
    linear factors, which avoids cancellation in the discriminant.
    """
    s = sqrt(n - 1)
    r1 = 2 * (n - 1 + s) / (2 + s)
    c2 = 5 - n  # leading coefficient
    if c2 == 0:
        return [(-np.inf, r1)], (r1,)
    r2 = 2 * (s - (n - 1)) / (s - 2)
    lo, hi = min(r1, r2), max(r1, r2)
    if c2 > 0:
        return [(-np.inf, lo), (hi, np.inf)], (lo, hi)
    return [(lo, hi)], (lo, hi)


def _radial_positive_set(n):
    s = sqrt(n - 1)
    return [(2 - 2 * s, 2 + 2 * s)], (2 - 2 * s, 2 + 2 * s)


@dataclass
class AlphaAdmissibility:
    n: int
    radial: bool
    interval: tuple | None
    window: tuple
    roots: tuple
    pieces: list = field(default_factory=list)

    @property
    def empty(self):
        return self.interval is None

    def condition(self, alpha):
        cond = condition_radial if self.radial else condition_general
        return bool(cond(alpha, self.n))

    def contains(self, alpha):
        lo, hi = self.window
        in_window = (lo < alpha < hi) if self.window_open else (lo <= alpha < hi)
        return bool(in_window and self.condition(alpha))

    @property
    def window_open(self):
        return self.window[0] == self.n - 2

    def certificate(self, samples=64):
        """Sampled check: points inside satisfy both constraints, the
        complement within the window violates at least one."""
        lo, hi = self.window
        a = lo + (hi - lo) * (np.arange(samples) + 0.5) / samples
        for x in a:
            inside = any(p < x < q for p, q in self.pieces)
            if inside != self.contains(x):
                return False
        return True

    def as_dict(self):
        return _plain({
            "n": self.n, "radial": self.radial, "interval": self.interval,
            "window": self.window, "roots": self.roots, "pieces": self.pieces,
        })


def admissible_alpha(n, radial=False, window="linfty"):
    """Exponents alpha meeting the weighted-estimate condition.

    ``window="linfty"`` intersects with (n-2, n-1), the range needed for
    the L-infinity bound; ``window="weighted"`` uses [0, n-1), the range
    of the weighted Dirichlet estimate itself.
    """
    if n < 2:
        raise PreconditionError("n >= 2 required")
    if window == "linfty":
        win = (float(n - 2), float(n - 1))
    elif window == "weighted":
        win = (0.0, float(n - 1))
    else:
        raise PreconditionError(f"unknown window {window!r}")
    pos, roots = (_radial_positive_set if radial else _general_positive_set)(n)
    pieces = []
    for a, b in pos:
        lo, hi = max(a, win[0]), min(b, win[1])
        if hi > lo:
            pieces.append((float(lo), float(hi)))
    interval = pieces[0] if pieces else None
    return AlphaAdmissibility(n, radial, interval, win, tuple(float(r) for r in roots), pieces)


def alpha_scan(n_min=2, n_max=15):
    """One row per n: (n, general interval, radial interval)."""
    return [(n, admissible_alpha(n, False), admissible_alpha(n, True)) for n in range(n_min, n_max + 1)]


# shared helpers ------------------------------------------------------------------

@dataclass(frozen=True)
class Cutoff:
    """zeta = 0 on the unit sphere, 1 on K_{delta/2} = {|x| <= 1 - delta/2}.

    A C^1 cubic ramp 3t^2 - 2t^3 in t = dist(x, boundary)/(delta/2); its
    slope is at most 3/delta.
    """

    delta: float

    def _t(self, r):
        return np.clip((1.0 - np.asarray(r, dtype=float)) / (0.5 * self.delta), 0.0, 1.0)

    def value(self, r):
        t = self._t(r)
        return t * t * (3.0 - 2.0 * t)

    def deriv(self, r):
        """d zeta / dr (non-positive)."""
        t = self._t(r)
        return -6.0 * t * (1.0 - t) / (0.5 * self.delta)


def _check_y(yn, delta):
    if not 0 < delta <= 1:
        raise PreconditionError("delta must lie in (0, 1]")
    if yn > 1.0 - delta + 1e-12:
        raise PreconditionError(f"y is not in K_delta: |y| = {yn} > 1 - delta = {1 - delta}")


def _ynorm(y, n):
    if y is None:
        return 0.0
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.size == 1:
        return float(abs(y[0]))
    if y.size != n:
        raise PreconditionError("y has the wrong dimension")
    return float(np.linalg.norm(y))


def _require_stable(sol, stability=None):
    rep = stability if stability is not None else principal_eigenvalue(sol, strict=False)
    if not rep.stable:
        raise UnstableSolutionError(f"solution is unstable (mu1 = {rep.mu1:.6g})")
    return rep


def shell_energy(sol, a, b=1.0, m=64):
    """int_{a <= |x| <= b} |grad u|^2 dx from the Hermite interpolant of u'."""
    if b <= a:
        return 0.0
    r, w = gauss_legendre(a, b, m)
    return sphere_area(sol.n) * float(np.sum(w * sol.du_at(r) ** 2 * r ** (sol.n - 1)))


def _grid_integral(sol, values, rule=simpson):
    return sphere_area(sol.n) * float(rule(values * sol.grid ** (sol.n - 1), x=sol.grid))


# Sternberg-Zumbrun ---------------------------------------------------------------

def sz_defect(sol, eta, deta=None, stability=None, check_stability=True, tol=1e-8):
    """Stability inequality in geometric form for a radial solution.

    LHS = int (|grad_T |grad u||^2 + |A|^2 |grad u|^2) eta^2 and
    RHS = int |grad u|^2 |grad eta|^2; in the radial case the first term
    vanishes and |A|^2 |grad u|^2 = (n-1) u'^2 / r^2.
    """
    vals, dvals = _profile(sol, eta, deta)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if abs(vals[-1]) > tol * scale:
        raise PreconditionError("eta must vanish on the boundary")
    mu1 = None
    if check_stability:
        mu1 = _require_stable(sol, stability).mu1
    r, up, n = sol.grid, sol.uprime, sol.n
    q = np.empty_like(r)
    pos = r > 0
    q[pos] = (up[pos] / r[pos]) ** 2
    if not pos.all():
        q[~pos] = (up[1] / r[1]) ** 2  # u'/r -> u''(0)
    tangential = np.zeros_like(r)  # |grad_T |grad u||^2 for radial u
    lhs_int = (tangential + (n - 1) * q) * vals**2
    rhs_int = up**2 * dvals**2
    lhs, rhs = _grid_integral(sol, lhs_int), _grid_integral(sol, rhs_int)
    lt, rt = _grid_integral(sol, lhs_int, np.trapezoid), _grid_integral(sol, rhs_int, np.trapezoid)
    eps = abs((rhs - lhs) - (rt - lt)) + 16 * ROUNDING * (abs(lhs) + abs(rhs))
    return InequalityReport(
        "sternberg_zumbrun", lhs, rhs, eps,
        params={"n": n, "lambda": sol.lam}, extras={"mu1": mu1, "h": sol.h},
    )


# weighted Dirichlet estimate --------------------------------------------------------

def _alpha_ok(n, alpha, radial):
    return condition_radial(alpha, n) if radial else condition_general(alpha, n)


def weighted_dirichlet(sol, alpha, y=None, delta=0.1, override=False, check_stability=True,
                       n_rho=48, n_theta=48, family=""):
    """I = int |grad u|^2 |x-y|^(-alpha) against ||grad u||^2 on the boundary layer.

    ``alpha`` must satisfy the weighted-estimate condition (radial form when
    y = 0); ``override=True`` downgrades a violation to a warning and a
    flag in the report.
    """
    n = sol.n
    yn = _ynorm(y, n)
    _check_y(yn, delta)
    if not 0 <= alpha < n - 1:
        raise RangeError(f"alpha must lie in [0, n-1); got {alpha}")
    radial = yn == 0.0
    ok = _alpha_ok(n, alpha, radial)
    if not ok:
        msg = f"alpha = {alpha} violates the {'radial' if radial else 'general'} condition for n = {n}"
        if not override:
            raise RangeError(msg)
        warnings.warn(msg, stacklevel=2)
    if check_stability and sol.spec is not None:
        _require_stable(sol)
    rule = PolarRule(n, yn, alpha, n_rho=n_rho, n_theta=n_theta)
    I = rule.integrate(sol.du_at(rule.r) ** 2)
    fine = rule.refine()
    I_fine = fine.integrate(sol.du_at(fine.r) ** 2)
    E = shell_energy(sol, 1.0 - delta)
    return EstimateReport(
        "weighted_dirichlet", I, E,
        params={"n": n, "lambda": sol.lam, "alpha": alpha, "y": yn, "delta": delta},
        family=family,
        extras={"quad_error": abs(I - I_fine), "admissible": ok, "override": bool(override and not ok)},
    )


# the proof chain ---------------------------------------------------------------------

def _chain(sol, alpha, yn, delta, eps, kappas, n_rho, n_theta):
    n = sol.n
    cut = Cutoff(delta)
    rule = PolarRule(n, yn, alpha, n_rho=n_rho, n_theta=n_theta)
    r, w, ry = rule.r, rule.omega_dot_xhat, rule.r_y
    Q = rule.integrate  # includes the weight r_y^(-alpha)
    up = sol.du_at(r)
    g = np.abs(up)
    z, dz = cut.value(r), cut.deriv(r)
    ur = up * w  # u_{r_y}
    H2 = ((n - 1) / r) ** 2
    A2 = (n - 1) / r**2
    tan_g = np.zeros_like(r)  # |grad_T |grad u||^2, level sets are spheres about 0
    radial = yn == 0.0

    I = Q(g * g * z * z)
    Ir = Q(ur * ur * z * z)

    # Hardy step with phi_k = (|grad u|^2 + k^2)^(1/4) zeta, k -> 0 by Richardson
    gmax = float(np.max(np.abs(sol.uprime)))
    Ak, Bk, Ck = [], [], []
    for k in kappas:
        phi2 = np.sqrt(g * g + (k * gmax) ** 2) * z * z
        Ak.append(Q(g * phi2))
        Bk.append(Q(g * w * w * phi2))
        # grad_T phi_k = 0: phi_k is radial about 0 like the level sets
        Ck.append(Q(g * (4.0 * 0.0 + H2 * phi2) * ry * ry))
    ratio = (kappas[-2] / kappas[-1]) ** 2

    def extrap(v):
        return v[-1] + (v[-1] - v[-2]) / (ratio - 1.0)

    A0, B0, C0k = extrap(Ak), extrap(Bk), extrap(Ck)
    lhs1 = ((n - 1 - alpha) * A0 + alpha * B0) ** 2
    rhs1 = A0 * C0k

    # epsilon split: 4|grad u| |grad_T(|grad u|^(1/2) zeta)|^2
    #   <= (1+eps)|grad_T|grad u||^2 zeta^2 + 4(1+1/eps)|grad u|^2 |grad_T zeta|^2
    C0 = Q(g * H2 * g * z * z * ry * ry)  # kappa = 0 value of the right factor
    T1 = Q(tan_g * z * z * ry * ry)
    Hterm = Q(H2 * g * g * z * z * ry * ry)
    Zhalf = Q(g * g * dz * dz * ry * ry)  # int |grad u|^2 |grad zeta|^2 r_y^(2-alpha)
    c_split = 4.0 * (1.0 + 1.0 / eps)
    lhs2 = I * C0
    rhs2 = I * ((1 + eps) * T1 + Hterm) + I * c_split * Zhalf

    # cutoff: |grad zeta| <= 3/delta, delta/2 <= r_y <= 2 off K_{delta/2}
    rmin, rmax = 1.0 - 0.5 * delta - yn, 1.0 + yn
    Mmax = max(rmin ** (2 - alpha), rmax ** (2 - alpha))
    E_half = shell_energy(sol, 1.0 - 0.5 * delta)
    E = shell_energy(sol, 1.0 - delta)
    c1 = c_split * 9.0 / delta**2 * Mmax
    rhs3 = I * ((1 + eps) * T1 + Hterm) + I * c_split * 9.0 / delta**2 * Mmax * E_half

    # curvature: H^2 <= (n-1)|A|^2, and the layer grows to Omega \ K_delta
    S = Q((tan_g + A2 * g * g) * z * z * ry * ry)
    rhs4 = I * (1 + eps) * (n - 1) * S + I * c1 * E
    curv_gap = float(np.max(np.abs(H2 - (n - 1) * A2) / H2))

    # stability with eta = r_y^((2-alpha)/2) zeta
    grad_eta2 = ((2 - alpha) ** 2 / 4) * z * z + (2 - alpha) * ry * z * dz * w + ry * ry * dz * dz
    G = Q(g * g * grad_eta2)
    rhs5 = I * (1 + eps) * (n - 1) * G + I * c1 * E

    # |grad eta|^2 <= (1+e')(2-alpha)^2/4 r_y^-alpha zeta^2 + (1+1/e') r_y^(2-alpha)|grad zeta|^2
    e2 = eps / (1 + eps)  # (1+eps)(1+e2) = 1+2eps
    lead = (1 + 2 * eps) * (n - 1) * (alpha - 2) ** 2 / 4
    rhs6 = lead * I * I + I * (1 + eps) * (n - 1) * (1 + 1 / e2) * Zhalf + I * c1 * E
    c_tot = c1 + (1 + eps) * (n - 1) * (1 + 1 / e2) * 9.0 / delta**2 * Mmax
    rhs7 = lead * I * I + I * c_tot * E

    # absorption and the extracted bound
    coef = (n - 1) ** 2 if radial else (n - 1 - alpha) ** 2
    lhs8 = coef * I * I
    rhs8 = ((n - 1 - alpha) * I + alpha * Ir) ** 2
    I_bound = c_tot * E / (coef - lead)
    I_full = Q(g * g)
    m_weight = rmin ** (-alpha)
    I_full_bound = I_bound + m_weight * E

    links = [
        ("hardy", lhs1, rhs1, {"A": A0, "B": B0, "C": C0k, "A_kappa": Ak, "B_kappa": Bk, "C_kappa": Ck,
                               "kappa_gap": abs(A0 - I) / I if I else 0.0}),
        ("epsilon_split", lhs2, rhs2, {"split_constant": c_split}),
        ("cutoff_gradient", rhs2, rhs3, {"M": Mmax, "E_half": E_half}),
        ("curvature", rhs3, rhs4, {"curvature_equality_gap": curv_gap}),
        ("stability", rhs4, rhs5, {"S": S, "G": G}),
        ("eta_expansion", rhs5, rhs6, {"epsilon_prime": e2}),
        ("cutoff_eta", rhs6, rhs7, {"C_total": c_tot}),
        ("absorption", lhs8, rhs8, {"I": I, "I_r": Ir}),
        ("extracted_bound", I, I_bound, {"E": E}),
        ("weighted_dirichlet", I_full, I_full_bound, {"I_full": I_full}),
    ]
    return links


def pipeline_slack(sol, alpha, y=None, delta=0.5, epsilon=0.1, kappas=KAPPAS,
                   n_rho=48, n_theta=48, check_stability=True):
    """Reproduce every inequality in the proof of the weighted estimate.

    Returns one InequalityReport per link, in proof order: Hardy step,
    epsilon split, cutoff bound, curvature comparison, stability step,
    expansion of |grad eta|^2, second cutoff bound, absorption, the
    extracted bound on I, and finally I over the whole ball against that
    bound plus the boundary-layer contribution.
    """
    n = sol.n
    yn = _ynorm(y, n)
    _check_y(yn, delta)
    if not 0 <= alpha < n - 1:
        raise RangeError(f"alpha must lie in [0, n-1); got {alpha}")
    if epsilon <= 0:
        raise ConfigurationError("epsilon must be positive")
    radial = yn == 0.0
    coef = (n - 1) ** 2 if radial else (n - 1 - alpha) ** 2
    lead = (1 + 2 * epsilon) * (n - 1) * (alpha - 2) ** 2 / 4
    if not lead < coef:
        raise ConfigurationError(
            f"absorption fails: (1+2eps)(n-1)(alpha-2)^2/4 = {lead:.6g} >= {coef:.6g}"
        )
    if check_stability and sol.spec is not None:
        _require_stable(sol)
    a = _chain(sol, alpha, yn, delta, epsilon, kappas, n_rho, n_theta)
    b = _chain(sol, alpha, yn, delta, epsilon, kappas, int(1.5 * n_rho) + 1, int(1.5 * n_theta) + 1)
    out = []
    params = {"n": n, "lambda": sol.lam, "alpha": alpha, "y": yn, "delta": delta, "epsilon": epsilon}
    for (name, lhs, rhs, ex), (_, lf, rf, _) in zip(a, b):
        eps = abs((rhs - lhs) - (rf - lf)) + 64 * ROUNDING * (abs(lhs) + abs(rhs))
        out.append(InequalityReport(name, float(lhs), float(rhs), float(eps), dict(params), extras=ex))
    return out


# potential representation and L-infinity ratio ---------------------------------------

def gt_constant(n):
    """Dimensional constant 2^n / (n |B_1|) of the potential estimate on a ball."""
    return 2.0**n / (n * ball_volume(n))


def potential_bound(sol, y=None, delta=0.5, n_rho=48, n_theta=48, family=""):
    """|u(y) - average of u over B_{delta/2}(y)| against int r_y^(1-n) |grad u|."""
    n = sol.n
    yn = _ynorm(y, n)
    if yn + 0.5 * delta > 1.0 + 1e-12:
        raise PreconditionError("B_{delta/2}(y) is not contained in the unit ball")
    avg_rule = PolarRule(n, yn, 0.0, n_rho=n_rho, n_theta=n_theta, domain="ball_at_y", radius=0.5 * delta)
    avg = avg_rule.integrate(sol.u_at(avg_rule.r)) / (ball_volume(n) * (0.5 * delta) ** n)
    lhs = abs(float(sol.u_at(yn)) - avg)
    rule = PolarRule(n, yn, n - 1.0, n_rho=n_rho, n_theta=n_theta)
    J = rule.integrate(np.abs(sol.du_at(rule.r)))
    fine = rule.refine()
    J_fine = fine.integrate(np.abs(sol.du_at(fine.r)))
    C = gt_constant(n)
    return EstimateReport(
        "potential", lhs, J,
        params={"n": n, "lambda": sol.lam, "y": yn, "delta": delta}, family=family,
        extras={"average": avg, "gt_constant": C, "gt_holds": bool(lhs <= C * J + ROUNDING),
                "quad_error": abs(J - J_fine)},
    )


def fitted_constant(reports):
    """Smallest C with lhs <= C rhs on every report of a family."""
    return max((r.empirical_constant for r in reports), default=0.0)


def linfty_ratio(sol, delta=0.5, family=""):
    """sup_{K_delta}|u| / (||u||_{L^1} + ||grad u||_{L^2(Omega minus K_delta)})."""
    if not 0 < delta <= 0.5:
        raise PreconditionError("delta must lie in (0, 1/2]")
    inner = sol.grid <= 1.0 - delta
    sup = float(max(np.max(np.abs(sol.u[inner])), abs(float(sol.u_at(1.0 - delta)))))
    l1 = _grid_integral(sol, np.abs(sol.u))
    grad = sqrt(shell_energy(sol, 1.0 - delta))
    return EstimateReport(
        "linfty", sup, l1 + grad,
        params={"n": sol.n, "lambda": sol.lam, "delta": delta}, family=family,
        extras={"l1": l1, "grad_outer": grad, "u0": sol.center_value},
    )


# the singular solution -2 log r ------------------------------------------------------

@dataclass
class SingularReport:
    n: int
    residual: float
    fd_residual: float  # relative to max f(u), second order on a graded grid
    s_values: list
    q_values: list
    nonnegative: bool
    witness: tuple | None
    hardy_constant: float  # (n-2)^2/4
    potential_constant: float  # 2(n-2)
    predicted_stable: bool
    residual_tol: float = 1e-8

    @property
    def consistent(self):
        return self.nonnegative == self.predicted_stable

    @property
    def passed(self):
        return self.residual <= self.residual_tol and self.consistent

    def as_dict(self):
        d = _plain(self)
        d.update(consistent=self.consistent, passed=self.passed)
        return d


def singular_quadratic_form(n, s, m=8):
    """Q(xi) for xi = r^a (1-r), a = -(n-2)/2 + s, against f'(u) = 2(n-2)/r^2.

    Gauss-Jacobi in r with weight r^(2s-1) absorbs the singular power; the
    rest of the integrand is a quadratic polynomial, so the rule is exact.
    """
    a = -(n - 2) / 2 + s
    r, w = gauss_jacobi_interval(m, 1.0, 2 * s - 1)
    poly = (a * (1 - r) - r) ** 2 - 2 * (n - 2) * (1 - r) ** 2
    return sphere_area(n) * float(np.sum(w * poly))


def singular_solution_check(n, h=1e-2, s_values=None, points=20001, residual_tol=1e-8):
    """Residual of u = -2 log r with f(u) = 2(n-2) e^u, and its stability sweep."""
    if n < 3:
        raise PreconditionError("n >= 3 required")
    if s_values is None:
        s_values = np.linspace(0.0, 1.0, 201)[1:]
    r = np.geomspace(h, 1.0, points)  # graded so that h_i / r_i is constant
    spec = NonlinearitySpec.exponential(2.0 * (n - 2), 1.0)
    u, du, d2u = -2 * np.log(r), -2 / r, 2 / r**2
    res = float(np.max(np.abs(d2u + (n - 1) / r * du + spec.f(u))))
    prof = RadialSolution(n, 1.0, r, u, du, spec, meta={"profile": "-2 log r"})
    fd = residual(prof) / float(np.max(spec.f(u)))
    q = [singular_quadratic_form(n, s) for s in s_values]
    k = int(np.argmin(q))
    witness = (float(s_values[k]), float(q[k])) if q[k] < 0 else None
    return SingularReport(
        n, res, fd, [float(s) for s in s_values], q, bool(min(q) >= 0), witness,
        (n - 2) ** 2 / 4, 2.0 * (n - 2), n >= 10, residual_tol,
    )


# Morrey and L^p norms ------------------------------------------------------------------

def cap_fraction(n, c):
    """Fraction of S^{n-1} with x_1 > c."""
    c = np.clip(np.asarray(c, dtype=float), -1.0, 1.0)
    half = 0.5 * betainc((n - 1) / 2.0, 0.5, 1.0 - c * c)
    return np.where(c >= 0, half, 1.0 - half)


def _ball_shell_fraction(n, r, t, rho):
    """Fraction of the sphere |x| = r inside B_rho(t e_1)."""
    if t == 0.0:
        return (r < rho).astype(float)
    c = (r * r + t * t - rho * rho) / (2 * r * t)
    return np.where(c >= 1, 0.0, np.where(c <= -1, 1.0, cap_fraction(n, c)))


def dyadic_radii(count, largest=2.0):
    return largest * 0.5 ** np.arange(count)


def morrey_norm(source, p, lam, centers=MORREY_CENTERS, radii=MORREY_RADII, which="gradient",
                details=False):
    """Lower bound for the M^{p,lam} norm of w (extended by zero outside the domain).

    For a radial solution ``which`` selects w = |grad u| or w = |u|; the
    supremum over centres is reduced by symmetry to y = t e_1 with
    ``centers`` values of t in [0, 1].  For a grid field, w is the sampled
    values and the centres form a ``centers``-per-axis sub-lattice.  Radii
    are dyadic, 2^(1-j) (grid: the box diagonal halved repeatedly).
    Returns the p-th root of the largest rho^(lam-n) int_{B_rho(y)} |w|^p.
    """
    if p < 1:
        raise PreconditionError("p >= 1 required")
    if isinstance(source, ScalarField):
        best, arg = _morrey_grid(source, p, lam, centers, radii)
    elif isinstance(source, RadialSolution):
        if not 0 < lam <= source.n:
            raise PreconditionError("0 < lam <= n required")
        fn = source.du_at if which == "gradient" else source.u_at
        n = source.n
        best, arg = 0.0, None
        for t in np.linspace(0.0, 1.0, centers):
            for rho in dyadic_radii(radii):
                r, w = gauss_legendre(0.0, 1.0, 48, breaks=[abs(t - rho), t + rho, source.grid[0]])
                vals = np.abs(fn(r)) ** p * r ** (n - 1) * _ball_shell_fraction(n, r, t, rho)
                v = rho ** (lam - n) * sphere_area(n) * float(np.sum(w * vals))
                if v > best:
                    best, arg = v, (float(t), float(rho))
    else:
        raise PreconditionError("source must be a RadialSolution or a ScalarField")
    norm = best ** (1.0 / p)
    return (norm, {"sup": best, "argmax": arg}) if details else norm


def _morrey_grid(field, p, lam, centers, radii):
    n = field.dim
    if not 0 < lam <= n:
        raise PreconditionError("0 < lam <= n required")
    dens = np.abs(field.values) ** p * field.weights
    idx = [np.unique(np.linspace(0, m - 1, centers).round().astype(int)) for m in field.shape]
    diag = float(np.linalg.norm(np.asarray(field.spacing) * (np.asarray(field.shape) - 1)))
    best, arg = 0.0, None
    for rho in dyadic_radii(radii, diag):
        half = [int(np.ceil(rho / h)) for h in field.spacing]
        if min(half) < 1:
            continue
        ax = [h * np.arange(-k, k + 1) for h, k in zip(field.spacing, half)]
        X = np.meshgrid(*ax, indexing="ij")
        ker = (sum(x * x for x in X) <= rho * rho).astype(float)
        conv = fftconvolve(dens, ker, mode="same")
        sub = conv[np.ix_(*idx)]
        v = rho ** (lam - n) * float(np.max(sub))
        if v > best:
            k = np.unravel_index(int(np.argmax(sub)), sub.shape)
            best, arg = v, (tuple(float(field.origin[d] + field.spacing[d] * idx[d][k[d]]) for d in range(n)),
                            float(rho))
    return best, arg


def lp_norm(source, p):
    """||u||_{L^p} over the domain."""
    if p < 1:
        raise PreconditionError("p >= 1 required")
    if isinstance(source, ScalarField):
        return source.integrate(np.abs(source.values) ** p) ** (1.0 / p)
    return _grid_integral(source, np.abs(source.u) ** p) ** (1.0 / p)


# solution families --------------------------------------------------------------------

def gelfand_family(n, fractions, spec=None, steps=2000):
    """Minimal solutions at lambda = fraction * lambda_star; returns (lambda_star, [(fraction, sol)])."""
    spec = spec or NonlinearitySpec.exponential()
    lam_star, _ = fold(n, spec)
    return lam_star, [(float(fr), solve_minimal(n, spec, fr * lam_star, steps=steps)) for fr in fractions]


def family_growth(values):
    """Ratio of the last to the first value of a family (inf if the first is 0)."""
    v = [float(x) for x in values]
    if not v or v[0] == 0:
        return float("inf")
    return v[-1] / v[0]
