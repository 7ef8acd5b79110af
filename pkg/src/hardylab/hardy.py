"""Hardy inequalities along level-set foliations and on single hypersurfaces.

For a function u with level-set normal nu, mean curvature H and a point y
(r_y = |x - y|, u_{r_y} = grad u . (x - y)/r_y), three foliated forms are
checked for 0 <= alpha < n - 1:

``foliated``
    (n-1-alpha) A + alpha B <= sqrt(A C)
``manifold``
    (n-1-alpha)^2 A <= C
``radial`` (u radially symmetric about y)
    (n-1)^2 A' <= C'

with A = int |grad u| phi^2 r_y^-alpha, B = int u_{r_y}^2/|grad u| phi^2 r_y^-alpha,
C = int |grad u| (4|grad_T phi|^2 + H^2 phi^2) r_y^(2-alpha), and A', C' the
same with |grad u| replaced by |u_{r_y}|.

On a single hypersurface M (alpha = 2, y = 0) the ``surface_p2``,
``surface`` and ``carron`` variants compare W = int_M phi^2/|x|^2 with the
tangential Dirichlet energy and the curvature terms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, RangeError
from .levelset import ScalarField, _as_field, boundary_hypothesis, geometry_fields, tangential_gradient
from .quadrature import PolarRule, sphere_area
from .radial import RadialSolution
from .reports import ROUNDING, HardyReport

FOLIATED = ("foliated", "manifold", "radial")
SURFACE = ("surface_p2", "surface", "carron")
BOUNDARY_TOL = 1e-6


@dataclass
class AxisymmetricTest:
    """Test function phi(x) = g(|x|, x.e/|x|) about a fixed axis e.

    ``d_c`` is the derivative in the cosine variable; it is all that the
    tangential gradient along spheres |x| = r needs:
    |grad_T phi|^2 = (1 - c^2) d_c^2 / r^2.
    """

    value: callable
    d_c: callable = None
    label: str = ""

    @property
    def radial(self):
        return self.d_c is None

    def tangential_sq(self, r, c):
        if self.d_c is None:
            return np.zeros(np.broadcast(r, c).shape)
        return (1.0 - c * c) * self.d_c(r, c) ** 2 / (r * r)


def radial_test(g, label="radial"):
    """phi(x) = g(|x|)."""
    return AxisymmetricTest(lambda r, c: g(r) + 0.0 * c, None, label)


def mode_test(g, label="mode1"):
    """phi(x) = g(|x|) x.e/|x|, a first spherical-harmonic mode."""
    return AxisymmetricTest(lambda r, c: g(r) * c, lambda r, c: g(r) + 0.0 * c, label)


def mixed_test(g0, g1, label="mixed"):
    """phi = g0(|x|) + g1(|x|) x.e/|x|."""
    return AxisymmetricTest(lambda r, c: g0(r) + g1(r) * c, lambda r, c: g1(r) + 0.0 * c, label)


def _check_alpha(alpha, n):
    if not 0.0 <= alpha < n - 1:
        raise RangeError(f"alpha must lie in [0, n-1) = [0, {n - 1}); got {alpha}")


def _assemble(A, B, C, Arad, Crad, n, alpha, y, variants, eps, extras):
    out = []
    for v in variants:
        if v == "foliated":
            lm, lr, rhs = (n - 1 - alpha) * A, alpha * B, float(np.sqrt(max(A * C, 0.0)))
        elif v == "manifold":
            lm, lr, rhs = (n - 1 - alpha) ** 2 * A, 0.0, C
        elif v == "radial":
            if Arad is None:
                raise PreconditionError("the radial variant needs u radially symmetric about y")
            lm, lr, rhs = (n - 1) ** 2 * Arad, 0.0, Crad
        else:
            raise PreconditionError(f"unknown foliated variant {v!r}")
        out.append(HardyReport(v, n, float(alpha), tuple(float(t) for t in y), float(lm), float(lr),
                               float(rhs), float(eps.get(v, 0.0)), dict(extras)))
    return out


def _slacks(A, B, C, Arad, Crad, n, alpha):
    s = {
        "foliated": np.sqrt(max(A * C, 0.0)) - (n - 1 - alpha) * A - alpha * B,
        "manifold": C - (n - 1 - alpha) ** 2 * A,
    }
    if Arad is not None:
        s["radial"] = Crad - (n - 1) ** 2 * Arad
    return s


# radial solutions -------------------------------------------------------------

def radial_integrals(sol, phi, alpha, y_norm=0.0, n_rho=48, n_theta=48):
    """A, B, C (and A', C' when y = 0) for a radial solution by the polar rule.

    No range check on alpha beyond integrability (alpha < n).
    """
    n = sol.n
    rule = PolarRule(n, y_norm, alpha, n_rho=n_rho, n_theta=n_theta)
    r, c, w = rule.r, rule.e_dot_xhat, rule.omega_dot_xhat
    g = np.abs(sol.du_at(r))
    val = phi.value(r, c)
    phi2 = val * val
    H2 = ((n - 1) / r) ** 2
    curv = 4.0 * phi.tangential_sq(r, c) + H2 * phi2
    ry2 = rule.r_y**2
    A = rule.integrate(g * phi2)
    B = rule.integrate(g * w * w * phi2)
    C = rule.integrate(g * curv * ry2)
    Arad = Crad = None
    if y_norm == 0.0:
        Arad = rule.integrate(g * np.abs(w) * phi2)
        Crad = rule.integrate(g * np.abs(w) * curv * ry2)
    return A, B, C, Arad, Crad


def _radial_foliated(sol, phi, alpha, y, variants, n_rho, n_theta, check_hypothesis):
    n = sol.n
    y = np.zeros(n) if y is None else np.asarray(y, dtype=float).ravel()
    yn = float(np.linalg.norm(y))
    if yn >= 1.0:
        raise PreconditionError("y must be an interior point of the unit ball")
    if sol.grid[0] > 0:
        raise PreconditionError("solution profile must cover the whole ball")
    if check_hypothesis:
        cs = np.linspace(-1, 1, 33)
        edge = np.max(np.abs(phi.value(np.ones_like(cs), cs)))
        rr = np.linspace(0, 1, 65)[1:]
        top = max(float(np.max(np.abs(phi.value(rr[:, None], cs[None, :])))), np.finfo(float).tiny)
        utop = max(float(np.max(np.abs(sol.u))), np.finfo(float).tiny)
        if edge > BOUNDARY_TOL * top and abs(sol.boundary_value) > BOUNDARY_TOL * utop:
            raise PreconditionError("neither u nor phi vanishes on the boundary sphere")
    if "radial" in variants and yn > 0:
        raise PreconditionError("u is radial about 0, so the radial variant needs y = 0")
    vals = radial_integrals(sol, phi, alpha, yn, n_rho, n_theta)
    fine = radial_integrals(sol, phi, alpha, yn, int(1.5 * n_rho) + 1, int(1.5 * n_theta) + 1)
    s0, s1 = _slacks(*vals, n, alpha), _slacks(*fine, n, alpha)
    scale = abs(vals[0]) * (n - 1) ** 2 + abs(vals[2])
    eps = {k: abs(s0[k] - s1[k]) + ROUNDING * scale * 16 for k in s0}
    A, B, C, Arad, Crad = vals
    extras = {"A": A, "B": B, "C": C, "A_radial": Arad, "C_radial": Crad,
              "test": phi.label, "n_rho": n_rho, "n_theta": n_theta, "source": "radial"}
    # report y as a point along the first axis (the symmetry axis)
    ypt = np.zeros(n)
    ypt[0] = yn
    return _assemble(A, B, C, Arad, Crad, n, alpha, ypt, variants, eps, extras)


# grid fields -------------------------------------------------------------------

def grid_integrals(field, phi, alpha, y, order=4, eps_reg=None):
    """A, B, C, A', C' on a grid with B_{2h}(y) excised, plus remainder bounds."""
    n = field.dim
    geom = geometry_fields(field, eps_reg, order)
    tg = tangential_gradient(geom, phi)
    X = field.coords()
    d = [X[i] - y[i] for i in range(n)]
    ry = np.sqrt(sum(t * t for t in d))
    excl = 2.0 * field.h
    keep = geom.regular & (ry >= excl)
    safe = np.where(ry > 0, ry, 1.0)
    weight = np.where(keep, safe ** (-alpha), 0.0)
    g = geom.grad_norm
    urad = sum(geom.gradient[i] * d[i] for i in range(n)) / safe
    phi2 = phi.values**2
    curv = 4.0 * tg.norm2 + geom.mean_curvature**2 * phi2
    ry2 = ry * ry
    gsafe = np.where(geom.regular, g, 1.0)
    A = field.integrate(g * phi2 * weight)
    B = field.integrate(urad**2 / gsafe * phi2 * weight)
    C = field.integrate(g * curv * ry2 * weight)
    Arad = field.integrate(np.abs(urad) * phi2 * weight)
    Crad = field.integrate(np.abs(urad) * curv * ry2 * weight)
    # remainder on B_{2h}(y), with the non-singular factors bounded by their
    # sampled maximum on a slightly larger ball
    near = field.mask & (ry < excl + field.h)
    S = sphere_area(n)
    rem_a = rem_c = 0.0
    if near.any():
        fa = float(np.max((g * phi2)[near]))
        fc = float(np.max((g * curv)[near & geom.regular])) if (near & geom.regular).any() else 0.0
        rem_a = fa * S * excl ** (n - alpha) / (n - alpha)
        rem_c = fc * S * excl ** (n + 2 - alpha) / (n + 2 - alpha)
    return (A, B, C, Arad, Crad), (rem_a, rem_c), geom


def _grid_foliated(field, phi, alpha, y, variants, order, eps_reg, check_hypothesis):
    n = field.dim
    phi = _as_field(field, phi)
    y = np.zeros(n) if y is None else np.asarray(y, dtype=float).ravel()
    if len(y) != n:
        raise PreconditionError("y has the wrong dimension")
    lo = np.asarray(field.origin)
    hi = lo + np.asarray(field.spacing) * (np.asarray(field.shape) - 1)
    if np.any(y < lo) or np.any(y > hi):
        raise PreconditionError("y must lie inside the grid box")
    vals, (rem_a, rem_c), geom = grid_integrals(field, phi, alpha, y, order, eps_reg)
    if check_hypothesis and not boundary_hypothesis(field, geom, phi.values):
        raise PreconditionError("neither u nor phi vanishes on the boundary")
    coarse = None
    if min(field.shape) >= 8:
        cf = field.coarsen()
        coarse, _, _ = grid_integrals(cf, phi.coarsen(), alpha, y, order, geom.eps_reg)
    s0 = _slacks(*vals, n, alpha)
    A, B, C, Arad, Crad = vals
    eps = {}
    for k in s0:
        e = abs(s0[k] - _slacks(*coarse, n, alpha)[k]) if coarse is not None else 0.0
        if k == "foliated":
            e += (n - 1) * rem_a + np.sqrt(max((A + rem_a) * (C + rem_c), 0.0)) - np.sqrt(max(A * C, 0.0))
        elif k == "manifold":
            e += (n - 1 - alpha) ** 2 * rem_a + rem_c
        else:
            e += (n - 1) ** 2 * rem_a + rem_c
        eps[k] = e + ROUNDING * field.values.size * ((n - 1) ** 2 * abs(A) + abs(C))
    extras = {"A": A, "B": B, "C": C, "A_radial": Arad, "C_radial": Crad,
              "remainder_A": rem_a, "remainder_C": rem_c, "h": field.h, "order": order,
              "source": "grid"}
    return _assemble(A, B, C, Arad, Crad, n, alpha, y, variants, eps, extras)


def foliated_hardy(source, phi, alpha, y=None, variants=("foliated", "manifold"), order=4,
                   eps_reg=None, n_rho=48, n_theta=48, check_hypothesis=True):
    """Foliated Hardy inequalities for a grid field or a radial solution.

    ``source`` is a :class:`ScalarField` (then ``phi`` is a field, array or
    callable on the same grid) or a :class:`RadialSolution` (then ``phi`` is
    an :class:`AxisymmetricTest` about the axis through 0 and y, or a
    callable of |x| for a radial test).  Returns one report per variant.
    """
    if isinstance(source, RadialSolution):
        _check_alpha(alpha, source.n)
        if not isinstance(phi, AxisymmetricTest):
            phi = radial_test(phi)
        return _radial_foliated(source, phi, alpha, y, variants, n_rho, n_theta, check_hypothesis)
    if isinstance(source, ScalarField):
        _check_alpha(alpha, source.dim)
        return _grid_foliated(source, phi, alpha, y, variants, order, eps_reg, check_hypothesis)
    raise PreconditionError("source must be a ScalarField or a RadialSolution")


def radial_hardy(sol, phi, alpha, n_rho=48, n_theta=48):
    """The radial-symmetry variant about the centre of the ball.

    For a radial ``phi`` both sides coincide, since H^2 r^2 = (n-1)^2 and
    the tangential gradient vanishes.
    """
    return foliated_hardy(sol, phi, alpha, None, ("radial",), n_rho=n_rho, n_theta=n_theta)[0]


# single hypersurfaces ---------------------------------------------------------------

def _ambient_gradient(phi, pts, step=1e-6):
    g = np.empty_like(pts)
    for i in range(pts.shape[1]):
        e = np.zeros(pts.shape[1])
        e[i] = step
        g[:, i] = (phi(pts + e) - phi(pts - e)) / (2 * step)
    return g


def surface_integrals(surface, phi, grad=None):
    """W, R, T, K for phi on a sampled surface (alpha = 2, y = 0).

    W = int phi^2/|x|^2, R = int (x/|x| . nu)^2 phi^2/|x|^2,
    T = int |grad_T phi|^2, K = int H^2 phi^2, and Kc = int |H| phi^2/|x|.
    """
    pts = surface.points
    rad = np.linalg.norm(pts, axis=1)
    scale = max(float(np.max(rad)), 1.0)
    if np.any(rad <= 1e-12 * scale):
        raise PreconditionError("the surface passes through the origin")
    v = np.asarray(phi(pts), dtype=float)
    gr = _ambient_gradient(phi, pts) if grad is None else np.asarray(grad(pts), dtype=float)
    tsq = surface.tangential_gradient_sq(gr)
    cosn = np.sum(pts * surface.normals, axis=1) / rad
    H = surface.mean_curvature
    v2 = v * v
    return {
        "W": surface.integrate(v2 / rad**2),
        "R": surface.integrate(cosn**2 * v2 / rad**2),
        "T": surface.integrate(tsq),
        "K": surface.integrate(H * H * v2),
        "Kc": surface.integrate(np.abs(H) * v2 / rad),
        "phi": v,
    }


def surface_hardy(surface, phi, grad=None, variants=SURFACE, eps_disc=None):
    """Single-hypersurface Hardy inequalities for ``phi`` on ``surface``.

    ``phi(points) -> values`` on an (k, n) array; ``grad`` optionally gives
    its ambient gradient (central differences otherwise).  Returns a dict
    variant -> HardyReport.  The Carron variant needs n - 1 >= 3 and is
    skipped below that.
    """
    n = surface.n
    I = surface_integrals(surface, phi, grad)
    v = I.pop("phi")
    if not surface.closed:
        if surface.rim is None:
            raise PreconditionError("open surface without rim samples")
        top = max(float(np.max(np.abs(v))), np.finfo(float).tiny)
        if np.max(np.abs(phi(surface.rim))) > BOUNDARY_TOL * top:
            raise PreconditionError("phi is not compactly supported on the patch")
    W, R, T, K, Kc = I["W"], I["R"], I["T"], I["K"], I["Kc"]
    D = 4 * T + K
    k = n - 3  # (n-1) - 2
    zero = np.zeros(n)
    out = {}
    rhs_new = T + K / 4
    rhs_car = T + 0.5 * k * Kc
    for var in variants:
        if var == "surface_p2":
            lm, lr, rhs = k * W, 2 * R, float(np.sqrt(max(W * D, 0.0)))
        elif var == "surface":
            lm, lr, rhs = k * k / 4 * W, 0.0, rhs_new
        elif var == "carron":
            if n - 1 < 3:
                continue
            lm, lr, rhs = k * k / 4 * W, 0.0, rhs_car
        else:
            raise PreconditionError(f"unknown surface variant {var!r}")
        if eps_disc is None:
            eps = surface.disc_rel * (abs(rhs) + abs(lm) + abs(lr)) + 16 * ROUNDING * (abs(rhs) + abs(lm) + abs(lr))
        else:
            eps = eps_disc
        extras = dict(I, surface=surface.label, nodes=len(v))
        if var == "surface_p2":
            extras["implied_bound"] = (lm + lr) ** 2 / (4 * W) if W > 0 else 0.0
        if var == "surface" and n - 1 >= 3:
            extras["rhs_ratio_new_over_carron"] = rhs_new / rhs_car if rhs_car else float("inf")
        out[var] = HardyReport(var, n, 2.0, tuple(zero), float(lm), float(lr), float(rhs), float(eps), extras)
    return out
