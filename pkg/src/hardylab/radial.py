"""Radial solutions of -u'' - (n-1)/r u' = λ f(u) on (0, 1), u'(0) = 0, u(1) = 0.

Shooting from the centre value ``m0 = u(0)`` is the basic primitive.  The
branch of solutions is parametrised by ``m0`` rather than λ: with ``w`` the
solution of the λ = 1 problem started at ``m0`` and ``R`` its first zero,
``u(r) = w(R r)`` solves the Dirichlet problem for λ = R².  The map
``m0 -> λ(m0)`` is single valued through the fold, so branch tracing and
the minimal solution both reduce to scalar problems in ``m0``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from math import sqrt

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq, minimize_scalar

from .errors import BeyondExtremalError, ConvergenceError, DivergenceError, PreconditionError
from .nonlinearity import NonlinearitySpec

SHOOTING_TOL = 1e-9
FOLD_TOL = 1e-6
_RTOL = 1e-12
_BLOWUP = 1e8


@dataclass
class RadialSolution:
    """A radial profile sampled on a strictly increasing grid in [0, 1].

    ``grid[0]`` is normally 0; profiles that are singular at the origin (for
    instance -2 log r) may be sampled on an annulus ``[r_min, 1]``.
    """

    n: int
    lam: float
    grid: np.ndarray
    u: np.ndarray
    uprime: np.ndarray
    spec: NonlinearitySpec
    meta: dict = field(default_factory=dict)
    diverged: bool = False
    blowup_radius: float | None = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.uprime = np.asarray(self.uprime, dtype=float)
        if self.n < 2:
            raise PreconditionError("dimension n must be >= 2")
        if not (self.grid.shape == self.u.shape == self.uprime.shape):
            raise ValueError("grid, u and uprime must have equal shapes")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        self._spline = None

    @classmethod
    def from_profile(cls, n, lam, spec, u, du, steps=1000, r_min=0.0, **meta):
        """Sample closed-form ``u(r)`` and ``u'(r)`` on a uniform grid."""
        grid = np.linspace(r_min, 1.0, steps + 1)
        return cls(n, lam, grid, u(grid), du(grid), spec, meta=dict(meta))

    @property
    def h(self):
        return float(self.grid[1] - self.grid[0])

    @property
    def steps(self):
        return len(self.grid) - 1

    @property
    def center_value(self):
        return float(self.u[0])

    @property
    def boundary_value(self):
        return float(self.u[-1])

    @property
    def full_ball(self):
        return self.grid[0] == 0.0

    def _interp(self):
        if self._spline is None:
            upp = np.gradient(self.uprime, self.grid, edge_order=2)
            self._spline = (
                CubicHermiteSpline(self.grid, self.u, self.uprime),
                CubicHermiteSpline(self.grid, self.uprime, upp),
            )
        return self._spline

    def u_at(self, r):
        return self._interp()[0](np.asarray(r, dtype=float))

    def du_at(self, r):
        """u'(r) from a Hermite interpolant of (u', u'') on the grid."""
        return self._interp()[1](np.asarray(r, dtype=float))

    def source(self):
        """λ f(u) on the grid."""
        return self.lam * self.spec.f(self.u)

    def potential(self):
        """λ f'(u) on the grid."""
        return self.lam * self.spec.fprime(self.u)

    def to_csv(self, fh=None):
        out = fh or io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["r", "u", "uprime"])
        for r, u, du in zip(self.grid, self.u, self.uprime):
            w.writerow([repr(float(r)), repr(float(u)), repr(float(du))])
        if fh is None:
            return out.getvalue()
        return None


def _taylor(n, spec, lam, m0, r):
    """Two-term series u = m0 + a2 r² + a4 r⁴ at the regular-singular origin."""
    f0, fp0 = float(spec.f(m0)), float(spec.fprime(m0))
    a2 = -lam * f0 / (2 * n)
    a4 = -lam * fp0 * a2 / (4 * (n + 2))
    return m0 + a2 * r**2 + a4 * r**4, 2 * a2 * r + 4 * a4 * r**3


def _start_radius(n, spec, lam, m0, h):
    rate = abs(lam * float(spec.f(m0)))
    if rate == 0.0:
        return h
    return min(h, 1e-3 * sqrt(2 * n / rate))


def _rhs(n, spec, lam):
    def rhs(r, y):
        return [y[1], -(n - 1) / r * y[1] - lam * float(spec.f(y[0]))]
    return rhs


def _blowup_event(m0):
    limit = _BLOWUP * max(1.0, abs(m0))

    def event(r, y):
        return limit - abs(y[0])
    event.terminal = True
    return event


def integrate_radial(n, spec, lam, m0, steps=1000):
    """Shoot from u(0) = m0, u'(0) = 0 to r = 1 without enforcing u(1) = 0.

    The origin is handled by the series u ≈ m0 - λ f(m0) r²/(2n) + O(r⁴);
    the rest is an adaptive explicit Runge-Kutta method of order 8 (DOP853)
    reporting at the uniform grid nodes.  If |u| exceeds 1e8·max(1, |m0|)
    the result carries ``diverged=True``, the blow-up radius, and NaN beyond
    it.
    """
    if n < 2:
        raise PreconditionError("n >= 2 required")
    if steps < 100:
        raise PreconditionError("steps >= 100 required")
    grid = np.linspace(0.0, 1.0, steps + 1)
    h = grid[1]
    u = np.full_like(grid, np.nan)
    du = np.full_like(grid, np.nan)
    u[0], du[0] = m0, 0.0
    r0 = _start_radius(n, spec, lam, m0, h)
    y0 = _taylor(n, spec, lam, m0, r0)
    if r0 == h:
        u[1], du[1] = y0
        t_eval, first = grid[2:], 2
    else:
        t_eval, first = grid[1:], 1
    sol = solve_ivp(
        _rhs(n, spec, lam), (r0, 1.0), list(y0), method="DOP853",
        t_eval=t_eval, events=_blowup_event(m0),
        rtol=_RTOL, atol=_RTOL * 1e-2 * max(1.0, abs(m0)),
    )
    k = sol.y.shape[1]
    u[first:first + k] = sol.y[0]
    du[first:first + k] = sol.y[1]
    diverged = sol.status == 1
    radius = float(sol.t_events[0][0]) if diverged else None
    return RadialSolution(
        n, lam, grid, u, du, spec, diverged=diverged, blowup_radius=radius,
        meta={"m0": float(m0), "method": "shooting"},
    )


def first_zero_radius(n, spec, m0, s_max=1e6):
    """First zero R of the λ = 1 profile started at ``m0``; inf if none."""
    if m0 <= 0:
        return 0.0 if m0 == 0 else np.inf
    f0 = float(spec.f(m0))
    if f0 <= 0:
        return np.inf
    s0 = 1e-4 * sqrt(2 * n / f0)
    y0 = _taylor(n, spec, 1.0, m0, s0)

    def zero(s, y):
        return y[0]
    zero.terminal = True
    zero.direction = -1
    sol = solve_ivp(
        _rhs(n, spec, 1.0), (s0, s_max), list(y0), method="DOP853",
        events=[zero, _blowup_event(m0)], rtol=_RTOL, atol=_RTOL * 1e-2 * max(1.0, m0),
    )
    if sol.t_events[0].size:
        return float(sol.t_events[0][0])
    return np.inf


def branch_lambda(n, spec, m0):
    """λ(m0): the parameter for which the solution with u(0) = m0 has u(1) = 0."""
    R = first_zero_radius(n, spec, m0)
    return R * R


def _scan_to(n, spec, target, m0_cap, lam_of):
    """Walk up in m0 until λ(m0) >= target; return a bracket or raise."""
    m_prev, l_prev = 0.0, 0.0
    m_prev2, l_prev2 = None, None
    step = 0.02
    while m_prev < m0_cap:
        m = min(m_prev + step, m0_cap)
        lam = lam_of(m)
        if lam >= target:
            return m_prev, m
        if lam < l_prev and m_prev2 is not None:
            # passed a local maximum of λ(m0) without reaching the target
            res = minimize_scalar(lambda x: -lam_of(x), bracket=(m_prev2, m_prev, m),
                                  method="golden", tol=FOLD_TOL)
            if -res.fun >= target:
                return m_prev2, float(res.x)
            raise BeyondExtremalError(
                f"λ = {target} exceeds the fold λ* ≈ {-res.fun:.10g} (n = {n})")
        m_prev2, l_prev2 = m_prev, l_prev
        m_prev, l_prev = m, lam
        step = min(step * 1.3, 0.25)
    raise BeyondExtremalError(f"no minimal solution with u(0) <= {m0_cap} for λ = {target}")


def solve_minimal(n, spec, lam, tol=SHOOTING_TOL, steps=2000, m0_cap=50.0):
    """Minimal-branch solution: smallest m0 = u(0) with u(1) = 0."""
    if lam < 0:
        raise PreconditionError("λ >= 0 required")
    if lam == 0:
        grid = np.linspace(0.0, 1.0, steps + 1)
        z = np.zeros_like(grid)
        return RadialSolution(n, 0.0, grid, z, z.copy(), spec, meta={"m0": 0.0, "branch": "minimal"})
    cache = {}

    def lam_of(m):
        if m not in cache:
            cache[m] = branch_lambda(n, spec, m)
        return cache[m]

    lo, hi = _scan_to(n, spec, lam, m0_cap, lam_of)
    m0 = brentq(lambda m: lam_of(m) - lam, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200)
    sol = integrate_radial(n, spec, lam, m0, steps)
    if sol.diverged or not abs(sol.boundary_value) <= tol:
        raise ConvergenceError(f"shooting residual |u(1)| = {abs(sol.boundary_value):.3e} > {tol}",
                               residual=abs(sol.boundary_value))
    sol.meta["branch"] = "minimal"
    return sol


def _centred(v, h):
    """Fourth-order centred first difference on nodes 2..N-2."""
    return (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * h)


def residual(sol):
    """Max over interior nodes of the discrete ODE residual.

    u'' is a centred difference of the stored u', and the consistency of
    u' with the centred difference of u is folded into the same maximum, so
    both equations of the first-order system are checked.  Uniform grids
    use fourth-order stencils on nodes 2..N-2; other grids fall back to
    second-order differences on nodes 1..N-1.
    """
    r = sol.grid
    h = np.diff(r)
    if len(r) >= 5 and np.allclose(h, h[0], rtol=1e-9, atol=0):
        inner = slice(2, len(r) - 2)
        d_uprime, d_u = _centred(sol.uprime, h[0]), _centred(sol.u, h[0])
    else:
        inner = slice(1, len(r) - 1)
        d_uprime = np.gradient(sol.uprime, r)[inner]
        d_u = np.gradient(sol.u, r)[inner]
    rr = r[inner]
    with np.errstate(divide="ignore", invalid="ignore"):
        ode = d_uprime + (sol.n - 1) / rr * sol.uprime[inner] + sol.lam * sol.spec.f(sol.u[inner])
    ode = np.where(rr > 0, ode, 0.0)
    cons = d_u - sol.uprime[inner]
    return float(np.nanmax(np.maximum(np.abs(ode), np.abs(cons))))


@dataclass
class BranchPoint:
    lam: float
    u0: float
    mu1: float | None


@dataclass
class Branch:
    """Minimal branch traced in the centre value, with the fold estimate."""

    n: int
    spec: NonlinearitySpec
    points: list
    fold_lambda: float | None
    fold_u0: float | None
    fold_interior: bool
    fold_interval: tuple | None = None

    @property
    def lambda_star(self):
        return self.fold_lambda

    def arrays(self):
        lam = np.array([p.lam for p in self.points])
        u0 = np.array([p.u0 for p in self.points])
        mu = np.array([np.nan if p.mu1 is None else p.mu1 for p in self.points])
        return lam, u0, mu

    def to_csv(self, fh=None):
        out = fh or io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["lambda", "u0", "mu1"])
        for p in self.points:
            w.writerow([repr(float(p.lam)), repr(float(p.u0)), "" if p.mu1 is None else repr(float(p.mu1))])
        if fh is None:
            return out.getvalue()
        return None


def trace_branch(n, spec, lambda_cap=np.inf, steps=400, m0_max=12.0, dm0=0.05,
                 eigenvalues=True, drop=0.9):
    """Continue the branch in m0 = u(0), recording (λ(m0), m0, μ1).

    Tracing stops when λ exceeds ``lambda_cap``, m0 exceeds ``m0_max``, or
    λ has fallen below ``drop`` times its running maximum (well past the
    fold).  The fold is the maximum of λ(m0), refined by golden-section
    search to a tolerance of 1e-6 in m0.  If the maximum sits at the end of
    the traced range the branch is monotone there: ``fold_interior`` is
    False and ``fold_lambda`` is the supremum seen.
    """
    from .spectrum import principal_eigenvalue  # circular at import time

    ms, lams = [0.0], [0.0]
    m = 0.0
    while m < m0_max:
        m = min(m + dm0 * (1.0 + 0.5 * m), m0_max)
        lam = branch_lambda(n, spec, m)
        if not np.isfinite(lam):
            break
        ms.append(m)
        lams.append(lam)
        if lam > lambda_cap or lam < drop * max(lams):
            break
    ms, lams = np.array(ms), np.array(lams)

    k = int(np.argmax(lams))
    interval = None
    if 0 < k < len(ms) - 1:
        res = minimize_scalar(lambda x: -branch_lambda(n, spec, x),
                              bracket=(ms[k - 1], ms[k], ms[k + 1]), method="golden", tol=FOLD_TOL)
        fold_m, fold_l = float(res.x), float(-res.fun)
        # flat top: widen the uncertainty to where λ is indistinguishable
        flat = np.abs(lams - fold_l) <= 1e-12 * max(1.0, fold_l)
        if flat.sum() > 1:
            interval = (float(ms[flat].min()), float(ms[flat].max()))
        else:
            interval = (fold_m - FOLD_TOL * max(1.0, fold_m), fold_m + FOLD_TOL * max(1.0, fold_m))
        interior = True
    else:
        fold_m, fold_l, interior = float(ms[k]), float(lams[k]), False

    points = []
    for mm, ll in zip(ms, lams):
        mu = None
        if eigenvalues and ll > 0:
            sol = integrate_radial(n, spec, ll, mm, steps)
            if not sol.diverged:
                mu = principal_eigenvalue(sol, strict=False).mu1
        elif eigenvalues:
            mu = principal_eigenvalue(solve_minimal(n, spec, 0.0, steps=steps), strict=False).mu1
        points.append(BranchPoint(float(ll), float(mm), mu))
    return Branch(n, spec, points, fold_l, fold_m, interior, interval)


def fold(n, spec, **kw):
    """Shorthand for the (λ*, u(0) at the fold) pair of :func:`trace_branch`."""
    b = trace_branch(n, spec, eigenvalues=False, **kw)
    return b.fold_lambda, b.fold_u0
