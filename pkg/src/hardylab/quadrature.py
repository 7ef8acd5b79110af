"""Quadrature rules for radial and singular-weight integrals on balls.

The workhorse is :class:`PolarRule`, which integrates functions of the form
``F(x) |x - y|^(-beta)`` over a ball by switching to polar coordinates
centred at ``y``.  The singular factor combines with the Jacobian into
``rho^(n-1-beta)``, which Gauss-Jacobi nodes absorb exactly, so no excision
is needed.  Integrands are restricted to functions of ``|x|`` and
``x . e`` (axisymmetric about the axis ``e`` through 0 and ``y``); this
reduces the angular integral over S^{n-1} to one polar angle in every
dimension.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import gamma, pi

import numpy as np
from scipy.special import roots_jacobi


def sphere_area(n):
    """|S^{n-1}|, the area of the unit sphere in R^n."""
    return 2.0 * pi ** (n / 2.0) / gamma(n / 2.0)


def ball_volume(n):
    return sphere_area(n) / n


def trapezoid(y, x):
    return float(np.trapezoid(y, x))


def radial_integral(values, grid, n):
    """∫_{B} v(|x|) dx ≈ |S^{n-1}| ∫ v(r) r^{n-1} dr by the trapezoid rule."""
    return sphere_area(n) * trapezoid(np.asarray(values) * np.asarray(grid) ** (n - 1), grid)


@lru_cache(maxsize=256)
def _jacobi(m, a, b):
    x, w = roots_jacobi(m, a, b)
    return x, w


def gauss_jacobi_interval(m, length, power):
    """Nodes/weights for ∫_0^L g(ρ) ρ^power dρ (power > -1)."""
    t, w = _jacobi(m, 0.0, float(power))
    half = 0.5 * length
    rho = half * (1.0 + t)
    return rho, w * half ** (power + 1.0)


@dataclass
class PolarRule:
    """Product rule over a ball in polar coordinates centred at ``y``.

    Parameters
    ----------
    n : dimension
    y_norm : |y|; the point is ``y = y_norm * e``
    beta : exponent of the singular weight |x - y|^(-beta), beta < n
    n_rho, n_theta : numbers of Gauss nodes in ρ and in cos θ
    domain : ``"unit_ball"`` (Ω = B_1(0)) or ``"ball_at_y"`` (B_R(y))
    radius : R for ``"ball_at_y"``
    """

    n: int
    y_norm: float
    beta: float
    n_rho: int = 48
    n_theta: int = 48
    domain: str = "unit_ball"
    radius: float = 1.0

    def __post_init__(self):
        n = self.n
        if self.beta >= n:
            raise ValueError("singular weight not integrable: beta >= n")
        a = (n - 3) / 2.0
        if n >= 2:
            ct, wt = _jacobi(self.n_theta, a, a)
        # |S^{n-2}| with |S^0| = 2
        ang_area = 2.0 if n == 2 else sphere_area(n - 1)
        wt = wt * ang_area

        yn = float(self.y_norm)
        if self.domain == "unit_ball":
            if yn >= 1.0:
                raise ValueError("y must lie inside the unit ball")
            rho_max = -yn * ct + np.sqrt((yn * ct) ** 2 + 1.0 - yn**2)
        elif self.domain == "ball_at_y":
            rho_max = np.full_like(ct, self.radius)
        else:
            raise ValueError(f"unknown domain {self.domain!r}")

        power = n - 1.0 - self.beta
        t, wr = _jacobi(self.n_rho, 0.0, power)
        half = 0.5 * rho_max[:, None]
        rho = half * (1.0 + t[None, :])
        w = wt[:, None] * wr[None, :] * half ** (power + 1.0)

        self.cos_theta = np.broadcast_to(ct[:, None], rho.shape)
        self.rho = rho
        self.weights = w
        # geometry of x = y + ρ ω with ω·e = cos θ
        r2 = yn**2 + rho**2 + 2.0 * yn * rho * self.cos_theta
        self.r = np.sqrt(np.maximum(r2, 0.0))
        self.s = yn + rho * self.cos_theta  # x · e
        # ω · x̂ = (y·ω + ρ)/|x|, e · x̂ = s/|x|
        with np.errstate(invalid="ignore", divide="ignore"):
            self.omega_dot_xhat = np.where(self.r > 0, (yn * self.cos_theta + rho) / self.r, 1.0)
            self.e_dot_xhat = np.where(self.r > 0, self.s / self.r, 1.0)
        self.r_y = rho

    def integrate(self, values):
        """Σ w_k F_k for F sampled on the rule's nodes (singular weight included)."""
        return float(np.sum(self.weights * values))

    def refine(self):
        """Same rule with roughly 1.5x the nodes in each direction."""
        return PolarRule(
            self.n, self.y_norm, self.beta,
            n_rho=int(self.n_rho * 1.5) + 1, n_theta=int(self.n_theta * 1.5) + 1,
            domain=self.domain, radius=self.radius,
        )


def sphere_product_rule(n, order):
    """Product Gauss rule on S^{n-1} in hyperspherical coordinates.

    Returns ``(points, weights)`` with ``points`` of shape (k, n) and weights
    summing to |S^{n-1}|.  Exact for polynomials of degree < 2·order in
    each polar angle cosine and < 2·order in the azimuth.
    """
    if n < 2:
        raise ValueError("n >= 2 required")
    m_phi = 2 * order
    phi = 2.0 * pi * np.arange(m_phi) / m_phi
    pts = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    wts = np.full(m_phi, 2.0 * pi / m_phi)
    # build up S^{k} from S^{k-1}: x = (cos θ, sin θ · p), weight sin^{k-1}θ dθ
    for k in range(2, n):
        a = (k - 2) / 2.0
        ct, wt = _jacobi(order, a, a)
        st = np.sqrt(1.0 - ct**2)
        new_pts = np.concatenate(
            [np.repeat(ct, len(pts))[:, None], (st[:, None, None] * pts[None, :, :]).reshape(-1, k)],
            axis=1,
        )
        new_w = (wt[:, None] * wts[None, :]).ravel()
        pts, wts = new_pts, new_w
    return pts, wts


def gauss_legendre(a, b, m=64, breaks=()):
    """Composite Gauss-Legendre nodes/weights on [a, b], split at ``breaks``."""
    t, w = _jacobi(m, 0.0, 0.0)
    pts = np.unique(np.clip(np.concatenate([[a, b], np.asarray(breaks, dtype=float)]), a, b))
    xs, ws = [], []
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi > lo:
            xs.append(0.5 * (hi - lo) * (t + 1.0) + lo)
            ws.append(0.5 * (hi - lo) * w)
    if not xs:
        return np.empty(0), np.empty(0)
    return np.concatenate(xs), np.concatenate(ws)
