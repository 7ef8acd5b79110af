"""Sampled hypersurfaces: nodes with normals, mean curvature and area weights.

Meshes (icospheres, marching-cubes level sets) get vertex normals from
area-weighted face normals and mean curvature from the cotangent
Laplacian; closed curves in the plane use turning angles.  Quadrature
spheres and flat patches carry exact geometry and exact-for-polynomials
weights, so they serve as analytic references in any dimension.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from .errors import PreconditionError
from .quadrature import sphere_product_rule


@dataclass
class SampledSurface:
    points: np.ndarray  # (k, n)
    normals: np.ndarray  # (k, n), unit
    mean_curvature: np.ndarray  # (k,), sum of principal curvatures
    weights: np.ndarray  # (k,), area element
    closed: bool = True
    rim: np.ndarray | None = None  # boundary samples of a patch
    disc_rel: float = 0.0  # relative discretisation error estimate
    label: str = ""

    @property
    def n(self):
        """Ambient dimension."""
        return self.points.shape[1]

    @property
    def area(self):
        return float(np.sum(self.weights))

    def integrate(self, values):
        return float(np.sum(self.weights * values))

    def tangential_gradient_sq(self, grad):
        """|nabla_T phi|^2 from ambient gradients of shape (k, n)."""
        dn = np.sum(grad * self.normals, axis=1)
        return np.maximum(np.sum(grad * grad, axis=1) - dn * dn, 0.0)


def _cot(a, b):
    return np.sum(a * b, axis=1) / np.linalg.norm(np.cross(a, b), axis=1)


def from_mesh(verts, faces, label="mesh"):
    """Vertex samples of a closed triangle mesh in R^3."""
    verts = np.asarray(verts, dtype=float)
    faces = np.asarray(faces, dtype=int)
    if not len(faces):
        raise PreconditionError("empty mesh")
    tri = verts[faces]
    fn = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    farea = 0.5 * np.linalg.norm(fn, axis=1)
    # marching cubes can emit zero-area triangles; they carry no measure
    good = farea > 1e-14 * max(float(farea.max()), np.finfo(float).tiny)
    faces, tri, fn, farea = faces[good], tri[good], fn[good], farea[good]
    k = len(verts)
    area = np.zeros(k)
    nrm = np.zeros((k, 3))
    lap = np.zeros((k, 3))
    for c in range(3):
        np.add.at(area, faces[:, c], farea / 3.0)
        np.add.at(nrm, faces[:, c], fn)  # |fn| = 2 * face area
        # cotangent of the angle at corner c weights the opposite edge
        i, j, m = faces[:, c], faces[:, (c + 1) % 3], faces[:, (c + 2) % 3]
        w = 0.5 * _cot(verts[j] - verts[i], verts[m] - verts[i])
        d = verts[m] - verts[j]
        np.add.at(lap, j, w[:, None] * d)
        np.add.at(lap, m, -w[:, None] * d)
    used = area > 0
    nl = np.linalg.norm(nrm, axis=1)
    nrm = nrm / np.where(nl > 0, nl, 1.0)[:, None]
    safe = np.where(used, area, 1.0)
    # Laplace-Beltrami of the position is -H nu
    H = -np.sum(lap * nrm, axis=1) / safe
    edges = np.concatenate([tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 1], tri[:, 0] - tri[:, 2]])
    h = float(np.mean(np.linalg.norm(edges, axis=1)))
    hmax = float(np.max(np.abs(H[used]))) if used.any() else 0.0
    return SampledSurface(verts[used], nrm[used], H[used], area[used], True, None, (h * hmax) ** 2 / 16, label)


def _icosahedron():
    t = (1.0 + 5.0**0.5) / 2.0
    v = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=float)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def icosphere_mesh(level):
    """Vertices and faces of the unit icosphere after ``level`` subdivisions."""
    v, f = _icosahedron()
    verts = list(v)
    for _ in range(level):
        cache = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                cache[key] = len(verts) - 1
            return cache[key]

        nf = []
        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        f = np.array(nf)
    return np.array(verts), f


def icosphere(level, radius=1.0, center=(0.0, 0.0, 0.0)):
    v, f = icosphere_mesh(level)
    s = from_mesh(radius * v + np.asarray(center, dtype=float), f, label=f"icosphere{level}")
    return s


def polygon_circle(m, radius=1.0, center=(0.0, 0.0)):
    """Regular m-gon inscribed in a circle, as a sampled closed curve."""
    th = 2.0 * np.pi * np.arange(m) / m
    pts = np.asarray(center, dtype=float) + radius * np.stack([np.cos(th), np.sin(th)], axis=1)
    nxt, prv = np.roll(pts, -1, axis=0), np.roll(pts, 1, axis=0)
    e1, e0 = nxt - pts, pts - prv
    l1, l0 = np.linalg.norm(e1, axis=1), np.linalg.norm(e0, axis=1)
    w = 0.5 * (l0 + l1)
    t0, t1 = e0 / l0[:, None], e1 / l1[:, None]
    # outward normals of the two edges, averaged
    n0 = np.stack([t0[:, 1], -t0[:, 0]], axis=1)
    n1 = np.stack([t1[:, 1], -t1[:, 0]], axis=1)
    nrm = n0 + n1
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    turn = np.arcsin(np.clip(t0[:, 0] * t1[:, 1] - t0[:, 1] * t1[:, 0], -1, 1))
    H = turn / w
    h = float(np.mean(l1))
    return SampledSurface(pts, nrm, H, w, True, None, (h / radius) ** 2, f"polygon{m}")


def default_order(n, budget=100_000):
    """Largest product-rule order on S^{n-1} (2 order^(n-1) nodes) within ``budget``, at most 16."""
    return int(max(2, min(16, np.floor((budget / 2) ** (1.0 / (n - 1))))))


def quadrature_sphere(n, radius=1.0, order=None, center=None):
    """Sphere of radius ``radius`` in R^n on a product Gauss rule (exact geometry)."""
    order = default_order(n) if order is None else order
    pts, w = sphere_product_rule(n, order)
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    return SampledSurface(
        c + radius * pts, pts.copy(), np.full(len(w), (n - 1) / radius),
        w * radius ** (n - 1), True, None, 0.0, f"sphere{n}",
    )


def flat_patch(n, radius=1.0, n_radial=32, order=None):
    """Disk of radius ``radius`` in the hyperplane {x_n = 0} of R^n (n >= 3).

    Gauss-Legendre in the radius times a product rule on S^{n-2}; the rim
    samples the boundary sphere for the compact-support check.
    """
    if n < 3:
        raise PreconditionError("flat patches need n >= 3")
    order = default_order(n - 1, 20_000) if order is None else order
    t, wt = roots_legendre(n_radial)
    rho = 0.5 * radius * (1.0 + t)
    wr = 0.5 * radius * wt * rho ** (n - 2)
    dirs, wd = sphere_product_rule(n - 1, order)
    pts = (rho[:, None, None] * dirs[None, :, :]).reshape(-1, n - 1)
    pts = np.hstack([pts, np.zeros((len(pts), 1))])
    w = (wr[:, None] * wd[None, :]).ravel()
    nrm = np.zeros_like(pts)
    nrm[:, -1] = 1.0
    rim = np.hstack([radius * dirs, np.zeros((len(dirs), 1))])
    return SampledSurface(pts, nrm, np.zeros(len(w)), w, False, rim, 0.0, f"flat{n}")
