"""Stability of radial solutions: the principal eigenvalue of -Δ - λf'(u).

The radial operator -r^{1-n}(r^{n-1} ξ')' - V ξ is discretised by finite
volumes on the solution's grid (dual cells between node midpoints, masses
∫ r^{n-1} dr over each cell, Dirichlet at r = 1).  With the mass matrix M
diagonal, M^{-1/2} K M^{-1/2} is a symmetric tridiagonal matrix, and its
lowest eigenvalue is found by shifted inverse iteration with a shift below
the Gershgorin bound.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, solveh_banded

from .errors import ConvergenceError, PreconditionError
from .quadrature import sphere_area
from .radial import _RTOL as _SHOOTING_RTOL
from .radial import residual
from .reports import ROUNDING, InequalityReport

STABILITY_TOL = 1e-6
RESIDUAL_LIMIT = 1e-4


@dataclass
class StabilityReport:
    mu1: float
    eigenfunction: np.ndarray
    grid: np.ndarray
    quad_form_min: float
    stable: bool
    semi_stable: bool
    tolerance: float
    iterations: int
    eigenvalues: tuple = ()

    def as_dict(self):
        return {
            "mu1": float(self.mu1),
            "stable": bool(self.stable),
            "semi_stable": bool(self.semi_stable),
            "grid_size": int(len(self.grid)),
        }


def _operator(grid, n, potential):
    """Symmetric tridiagonal (d, e) and masses for nodes 0..N-1 (node N is Dirichlet)."""
    r = grid
    mid = 0.5 * (r[1:] + r[:-1])
    flux = mid ** (n - 1) / np.diff(r)              # c_{i+1/2}, i = 0..N-1
    edges = np.concatenate([[0.0], mid])              # r_{i-1/2}, i = 0..N
    upper = np.concatenate([mid, [r[-1]]])
    mass = (upper ** n - edges ** n) / n
    mass, V = mass[:-1], potential[:-1]
    c_left = np.concatenate([[0.0], flux[:-1]])
    c_right = flux
    K_diag = c_left + c_right - V * mass
    K_off = -flux[:-1]
    sq = np.sqrt(mass)
    d = K_diag / mass
    e = K_off / (sq[:-1] * sq[1:])
    return d, e, mass


def _count_below(d, e, x):
    """Sturm count: number of eigenvalues of the tridiagonal (d, e) below x."""
    e2 = e * e
    q = d[0] - x
    count = int(q < 0)
    tiny = np.finfo(float).tiny
    for i in range(1, len(d)):
        if q == 0.0:
            q = tiny
        q = d[i] - x - e2[i - 1] / q
        count += q < 0
    return count


def _bracket_lowest(d, e, rel=1e-8):
    """Bisection on the Sturm count for a tight bracket of the lowest eigenvalue."""
    radius = np.concatenate([[0.0], np.abs(e)]) + np.concatenate([np.abs(e), [0.0]])
    lo = float(np.min(d - radius))
    hi = float(np.min(d))  # Rayleigh quotient of a unit vector
    if _count_below(d, e, hi) == 0:
        return hi, hi
    while hi - lo > rel * (1.0 + abs(hi)):
        mid = 0.5 * (lo + hi)
        if _count_below(d, e, mid) >= 1:
            hi = mid
        else:
            lo = mid
    return lo, hi


def principal_eigenvalue(sol, modes=1, tol=1e-13, maxiter=2000, strict=True):
    """Principal Dirichlet eigenvalue of -Δ - λ f'(u) for a radial solution.

    The lowest eigenvalue is bracketed by Sturm-sequence bisection to 1e-8
    relative, then resolved by inverse iteration shifted to the lower end of
    the bracket.

    With ``strict`` the solution's residual must be below 1e-4.  ``modes``
    > 1 additionally reports the next eigenvalues of the same matrix.
    """
    if not sol.full_ball:
        raise PreconditionError("eigenvalue problem needs a grid starting at r = 0")
    if strict:
        res = residual(sol)
        if not res <= RESIDUAL_LIMIT:
            raise PreconditionError(f"solution residual {res:.3e} exceeds {RESIDUAL_LIMIT}")
    V = sol.potential()
    d, e, mass = _operator(sol.grid, sol.n, V)
    lo, hi = _bracket_lowest(d, e)
    sigma = lo - 1e-12 * (1.0 + abs(lo))
    N = len(d)
    ab = np.zeros((2, N))
    ab[0, 1:] = e
    ab[1] = d - sigma

    x = np.sqrt(mass) * np.cos(0.5 * np.pi * sol.grid[:-1])
    x /= np.linalg.norm(x)
    # below this the Rayleigh quotient only moves by rounding
    floor = 64 * np.finfo(float).eps * float(np.max(np.abs(d)) + 2 * np.max(np.abs(e), initial=0.0))
    mu_old = np.inf
    for it in range(1, maxiter + 1):
        y = solveh_banded(ab, x)
        x = y / np.linalg.norm(y)
        Ax = d * x
        Ax[:-1] += e * x[1:]
        Ax[1:] += e * x[:-1]
        mu = float(x @ Ax)
        if abs(mu - mu_old) <= max(tol * (1.0 + abs(mu)), floor):
            break
        mu_old = mu
    else:
        res = float(np.linalg.norm(Ax - mu * x))
        raise ConvergenceError(f"inverse iteration did not converge in {maxiter} steps", residual=res)

    xi = np.append(x / np.sqrt(mass), 0.0)
    if xi[np.argmax(np.abs(xi))] < 0:
        xi = -xi
    xi /= xi.max()
    scale = 1.0 + abs(sol.lam) * float(np.max(np.abs(sol.spec.fprime(sol.u))))
    tol_st = STABILITY_TOL * scale
    evals = (mu,)
    if modes > 1:
        evals = tuple(eigh_tridiagonal(d, e, select="i", select_range=(0, modes - 1),
                                       eigvals_only=True))
    return StabilityReport(
        mu1=mu, eigenfunction=xi, grid=sol.grid, quad_form_min=mu,
        stable=mu >= -tol_st, semi_stable=abs(mu) <= tol_st, tolerance=tol_st,
        iterations=it, eigenvalues=evals,
    )


def discrete_rayleigh(sol, xi):
    """Rayleigh quotient of ξ for the same finite-volume form used above."""
    d, e, mass = _operator(sol.grid, sol.n, sol.potential())
    x = np.sqrt(mass) * np.asarray(xi)[:-1]
    Ax = d * x
    Ax[:-1] += e * x[1:]
    Ax[1:] += e * x[:-1]
    return float(x @ Ax / (x @ x))


def _profile(sol, f, df=None):
    r = sol.grid
    vals = np.asarray(f(r) if callable(f) else f, dtype=float)
    if vals.shape != r.shape:
        raise ValueError("profile must be sampled on the solution grid")
    if df is None:
        dvals = np.gradient(vals, r, edge_order=2)
    else:
        dvals = np.asarray(df(r) if callable(df) else df, dtype=float)
    return vals, dvals


def rayleigh(sol, xi, dxi=None, tol=1e-8):
    """Q(ξ) = ∫_{B_1} |ξ'|² - λ f'(u) ξ², trapezoid rule on the solution grid.

    ``xi`` is an array on ``sol.grid`` or a callable of r; ``dxi`` likewise
    (default: second-order finite differences of ξ).
    """
    vals, dvals = _profile(sol, xi, dxi)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if abs(vals[-1]) > tol * scale:
        raise PreconditionError(f"test function must vanish at r = 1 (got {vals[-1]:.3e})")
    r = sol.grid
    integrand = (dvals**2 - sol.potential() * vals**2) * r ** (sol.n - 1)
    return sphere_area(sol.n) * float(np.trapezoid(integrand, r))


def _d1_d2(g, h):
    """Fourth-order centred first and second differences on nodes 2..N-2."""
    d1 = (-g[4:] + 8 * g[3:-1] - 8 * g[1:-3] + g[:-4]) / (12 * h)
    d2 = (-g[4:] + 16 * g[3:-1] - 30 * g[2:-2] + 16 * g[1:-3] - g[:-4]) / (12 * h * h)
    return d1, d2


def _coarse_defect(sol, threshold):
    """Defect on every other node; bounds the fine-grid defect for a convergent stencil."""
    sub = type(sol)(sol.n, sol.lam, sol.grid[::2], sol.u[::2], sol.uprime[::2], sol.spec)
    return gradient_identity_defect(sol=sub, threshold=threshold, _coarse=False).defect


def gradient_identity_defect(sol, threshold=1e-6, _coarse=True):
    """Pointwise check of (Δ + λf'(u))|∇u| = (|∇_T|∇u||² + |A|²|∇u|²)/|∇u|.

    For radial profiles ∇_T|∇u| = 0 and |A|²|∇u|² = (n-1)u'²/r², so the
    right side is (n-1)|u'|/r².  The left side uses fourth-order centred
    differences of the stored |u'|.  Returns the maximum absolute defect on
    the regular set {|u'| >= threshold}, with the relative defect in
    ``extras``.  ``eps_disc`` is the larger of the defect on the 2h
    subgrid and the integration tolerance of shooting data amplified by the
    difference stencils.
    """
    r, g = sol.grid, np.abs(sol.uprime)
    h = np.diff(r)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise PreconditionError("gradient identity check needs a uniform grid")
    d1, d2 = _d1_d2(g, h[0])
    rr, gg, uu = r[2:-2], g[2:-2], sol.u[2:-2]
    keep = (rr > 0) & (gg >= threshold)
    if not np.any(keep):
        raise PreconditionError("regular set {|u'| >= threshold} is empty")
    rr, gg, uu, d1, d2 = rr[keep], gg[keep], uu[keep], d1[keep], d2[keep]
    n = sol.n
    lhs = d2 + (n - 1) / rr * d1 + sol.lam * sol.spec.fprime(uu) * gg
    rhs = (n - 1) * gg / rr**2
    defect = float(np.max(np.abs(lhs - rhs)))
    scale = float(np.max(np.abs(rhs)))
    coarse = _coarse_defect(sol, threshold) if _coarse and len(r) >= 21 else defect
    # data noise amplified by the stencils (sum of |weights| 64/12 and 18/12)
    data_rel = _SHOOTING_RTOL if sol.meta.get("method") == "shooting" else ROUNDING
    noise = data_rel * float(np.max(np.abs(sol.uprime))) * (
        64 / (12 * h[0] ** 2) + 18 * (n - 1) / (12 * h[0] * float(rr.min())))
    return InequalityReport(
        name="gradient_identity",
        lhs=float(np.max(np.abs(lhs))),
        rhs=scale,
        defect=defect,
        eps_disc=max(coarse, noise, ROUNDING * scale),
        params={"n": n, "lambda": sol.lam, "threshold": threshold, "h": float(h[0])},
        extras={"relative_defect": defect / scale if scale > 0 else 0.0, "nodes": int(keep.sum())},
    )
