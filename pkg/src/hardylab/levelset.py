"""Level-set calculus for functions sampled on uniform 2D/3D grids.

All geometric quantities refer to the level sets of ``u``: the unit normal
``nu = grad u / |grad u|``, tangential derivatives
``delta_i phi = d_i phi - (grad phi . nu) nu_i``, the mean curvature
``H = div nu`` and the squared second fundamental form ``|A|^2``.  The last
two are evaluated from the Hessian through the projection
``P = I - nu nu^T``::

    H     = tr(P D2u P) / |grad u|
    |A|^2 = |P D2u P|_F^2 / |grad u|^2

which are the pointwise identities behind ``div nu`` and ``sum (delta_i nu_j)^2``.
Since ``P D2u P`` annihilates ``nu`` it has rank at most ``n - 1``, so
``H^2 <= (n-1)|A|^2`` holds node by node up to rounding.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from skimage import measure

from .errors import PreconditionError
from .reports import ROUNDING, InequalityReport, write_csv

BOUNDARY_TOL = 1e-6
ALIGN_TOL = 0.1
_MAGIC = b"SFLD"


def _cell_fraction(domain, axes, spacing, inside, band, sub):
    """Fraction of each band node's cell lying in the domain, by supersampling."""
    frac = inside.astype(float)
    idx = np.nonzero(band)
    if not idx[0].size:
        return frac
    offs = (np.arange(sub) + 0.5) / sub - 0.5
    grids = np.meshgrid(*([offs] * len(axes)), indexing="ij")
    centres = [ax[i] for ax, i in zip(axes, idx)]
    pts = [c[:, None] + h * g.ravel()[None, :] for c, h, g in zip(centres, spacing, grids)]
    frac[idx] = np.mean(domain(*pts), axis=1)
    return frac


@dataclass
class ScalarField:
    """Samples of a function on a uniform grid over a box.

    ``values[i, j(, k)]`` is the value at ``origin + (i, j, k) * spacing``.
    ``domain_fraction`` is the fraction of each node's cell inside Ω (1 for
    the whole box); quadrature weights combine it with the trapezoid rule
    on the box.  Nodes with zero weight never enter a quadrature.
    """

    values: np.ndarray
    spacing: tuple
    origin: tuple = None
    domain_fraction: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        dim = self.values.ndim
        if dim not in (2, 3):
            raise PreconditionError("grid fields must be 2D or 3D")
        if np.isscalar(self.spacing):
            self.spacing = (float(self.spacing),) * dim
        self.spacing = tuple(float(h) for h in self.spacing)
        if self.origin is None:
            self.origin = (0.0,) * dim
        self.origin = tuple(float(o) for o in self.origin)
        if len(self.spacing) != dim or len(self.origin) != dim:
            raise PreconditionError("spacing/origin length must match the grid dimension")
        if min(self.spacing) <= 0:
            raise PreconditionError("grid spacing must be positive")
        if min(self.values.shape) < 4:
            raise PreconditionError("need at least 4 grid points per axis")
        if self.domain_fraction is None:
            self.domain_fraction = np.ones(self.values.shape)
        else:
            self.domain_fraction = np.clip(np.asarray(self.domain_fraction, dtype=float), 0.0, 1.0)
            if self.domain_fraction.shape != self.values.shape:
                raise PreconditionError("domain mask shape mismatch")

    @classmethod
    def from_function(cls, fn, lo, hi, shape, domain=None, supersample=6):
        """Sample ``fn(x, y[, z])`` on the box [lo, hi] with ``shape`` nodes.

        ``domain(x, y[, z]) -> bool`` optionally restricts Ω; boundary cells
        get fractional weights by ``supersample``-fold subsampling.
        """
        lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)
        shape = tuple(int(s) for s in np.broadcast_to(shape, lo.shape))
        axes = [np.linspace(a, b, m) for a, b, m in zip(lo, hi, shape)]
        spacing = tuple((b - a) / (m - 1) for a, b, m in zip(lo, hi, shape))
        X = np.meshgrid(*axes, indexing="ij")
        frac = None
        if domain is not None:
            inside = np.asarray(domain(*X), dtype=bool)
            band = ndimage.binary_dilation(inside) & ~ndimage.binary_erosion(inside)
            frac = _cell_fraction(domain, axes, spacing, inside, band, supersample)
        return cls(fn(*X), spacing, tuple(lo), frac)

    # geometry of the grid
    @property
    def dim(self):
        return self.values.ndim

    @property
    def shape(self):
        return self.values.shape

    @property
    def h(self):
        return max(self.spacing)

    def axes(self):
        return [o + h * np.arange(m) for o, h, m in zip(self.origin, self.spacing, self.shape)]

    def coords(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    @property
    def mask(self):
        return self.domain_fraction > 0

    @property
    def weights(self):
        """Trapezoid weights on the box times the domain fraction."""
        w = self.domain_fraction * np.prod(self.spacing)
        for ax in range(self.dim):
            sl = [slice(None)] * self.dim
            for end in (0, -1):
                sl[ax] = end
                w[tuple(sl)] *= 0.5
        return w

    def same_grid(self, other):
        return (
            self.shape == other.shape
            and np.allclose(self.spacing, other.spacing, rtol=1e-12)
            and np.allclose(self.origin, other.origin, rtol=1e-12, atol=1e-12)
        )

    def like(self, values):
        """A field with new values on this grid and domain."""
        return ScalarField(values, self.spacing, self.origin, self.domain_fraction.copy())

    def sample(self, fn):
        return self.like(fn(*self.coords()))

    def coarsen(self):
        """Every other node: the same box sampled at spacing 2h."""
        sl = tuple(slice(None, None, 2) for _ in range(self.dim))
        return ScalarField(
            self.values[sl], tuple(2 * h for h in self.spacing), self.origin, self.domain_fraction[sl]
        )

    def boundary_nodes(self):
        """Nodes of Ω on its boundary: partial cells and nodes on box faces."""
        frac = self.domain_fraction
        b = (frac > 0) & (frac < 1)
        for ax in range(self.dim):
            sl = [slice(None)] * self.dim
            for end in (0, -1):
                sl[ax] = end
                b[tuple(sl)] |= frac[tuple(sl)] > 0
        return b

    def boundary_normals(self):
        """Approximate outward normals of Ω at its boundary nodes."""
        frac = ndimage.gaussian_filter(self.domain_fraction, 1.0, mode="nearest")
        g = np.stack(np.gradient(frac, *self.spacing))
        for ax in range(self.dim):
            for end, sign in ((0, 1.0), (-1, -1.0)):
                sl = [slice(None)] * self.dim
                sl[ax] = end
                g[(ax,) + tuple(sl)] += sign * 1e6
        nrm = np.sqrt(np.sum(g * g, axis=0))
        return -g / np.where(nrm > 0, nrm, 1.0)

    def interpolate(self, points, values=None):
        """Multilinear interpolation at physical ``points`` of shape (k, dim)."""
        v = self.values if values is None else values
        idx = (np.asarray(points) - np.asarray(self.origin)) / np.asarray(self.spacing)
        return ndimage.map_coordinates(v, idx.T, order=1, mode="nearest")

    def integrate(self, values=None, where=None):
        v = self.values if values is None else values
        w = self.weights
        if where is not None:
            w = w * where
        return float(np.sum(np.where(w > 0, v, 0.0) * w))

    # IO
    def to_csv(self, fh=None):
        """Text format: shape/spacing/origin header rows, then ``value,fraction`` per node (C order)."""
        out = fh or io.StringIO()
        out.write("# scalar field\n")
        out.write("shape," + ",".join(str(m) for m in self.shape) + "\n")
        out.write("spacing," + ",".join(repr(h) for h in self.spacing) + "\n")
        out.write("origin," + ",".join(repr(o) for o in self.origin) + "\n")
        rows = zip(self.values.ravel(), self.domain_fraction.ravel())
        write_csv(rows, ["value", "fraction"], out)
        return out.getvalue() if fh is None else None

    @classmethod
    def from_csv(cls, source):
        text = source.read() if hasattr(source, "read") else open(source).read()
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        head = {}
        for ln in lines[:3]:
            key, *vals = ln.split(",")
            head[key.strip()] = vals
        try:
            shape = tuple(int(v) for v in head["shape"])
            spacing = tuple(float(v) for v in head["spacing"])
            origin = tuple(float(v) for v in head["origin"])
        except KeyError as exc:
            raise PreconditionError(f"missing header row {exc}") from None
        data = np.loadtxt(io.StringIO("\n".join(lines[4:])), delimiter=",", ndmin=2)
        if data.shape[0] != int(np.prod(shape)):
            raise PreconditionError("number of values does not match the header shape")
        frac = data[:, 1].reshape(shape) if data.shape[1] > 1 else None
        return cls(data[:, 0].reshape(shape), spacing, origin, frac)

    def to_bytes(self):
        """Binary format: b'SFLD', version, dim, then shape (int64), spacing,
        origin (float64), values and domain fractions (float64, C order)."""
        head = _MAGIC + struct.pack("<BB", 1, self.dim)
        head += struct.pack(f"<{self.dim}q", *self.shape)
        head += struct.pack(f"<{2 * self.dim}d", *self.spacing, *self.origin)
        return head + self.values.astype("<f8").tobytes() + self.domain_fraction.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, buf):
        if buf[:4] != _MAGIC:
            raise PreconditionError("not a scalar-field file (bad magic)")
        version, dim = struct.unpack_from("<BB", buf, 4)
        if version != 1 or dim not in (2, 3):
            raise PreconditionError("unsupported scalar-field header")
        off = 6
        shape = struct.unpack_from(f"<{dim}q", buf, off)
        off += 8 * dim
        geo = struct.unpack_from(f"<{2 * dim}d", buf, off)
        off += 16 * dim
        size = int(np.prod(shape))
        arr = np.frombuffer(buf, dtype="<f8", count=2 * size, offset=off)
        return cls(arr[:size].reshape(shape).copy(), geo[:dim], geo[dim:], arr[size:].reshape(shape).copy())

    def save(self, path):
        if str(path).endswith(".csv"):
            with open(path, "w", newline="") as fh:
                self.to_csv(fh)
        else:
            with open(path, "wb") as fh:
                fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            buf = fh.read()
        if buf[:4] == _MAGIC:
            return cls.from_bytes(buf)
        return cls.from_csv(io.StringIO(buf.decode()))


def _as_field(template, obj):
    if isinstance(obj, ScalarField):
        if not template.same_grid(obj):
            raise PreconditionError("fields live on different grids")
        return obj
    if callable(obj):
        return template.sample(obj)
    arr = np.broadcast_to(np.asarray(obj, dtype=float), template.shape)
    return template.like(np.array(arr))


def derivative(values, h, axis, order=2):
    """Centred first derivative; order 4 in the interior, 2nd order near edges."""
    d = np.gradient(values, h, axis=axis, edge_order=2)
    if order == 4 and values.shape[axis] >= 5:
        v = np.moveaxis(values, axis, 0)
        dv = np.moveaxis(d, axis, 0)
        dv[2:-2] = (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * h)
    return d


def _second(values, h, axis, order):
    if order == 4 and values.shape[axis] >= 5:
        d2 = derivative(derivative(values, h, axis, 2), h, axis, 2)
        v = np.moveaxis(values, axis, 0)
        dv = np.moveaxis(d2, axis, 0)
        dv[2:-2] = (-v[4:] + 16 * v[3:-1] - 30 * v[2:-2] + 16 * v[1:-3] - v[:-4]) / (12 * h * h)
        return d2
    return derivative(derivative(values, h, axis, order), h, axis, order)


@dataclass
class GeometryFields:
    """Normals and curvatures of the level sets of a grid function."""

    gradient: np.ndarray  # (dim, *shape)
    grad_norm: np.ndarray
    normal: np.ndarray  # zero off the regular set
    mean_curvature: np.ndarray
    A2: np.ndarray
    regular: np.ndarray
    eps_reg: float
    spacing: tuple
    shape: tuple
    order: int = 2

    @property
    def dim(self):
        return len(self.shape)


def geometry_fields(field, eps_reg=None, order=2):
    """Gradient, unit normal, mean curvature and |A|^2 of the level sets.

    ``eps_reg`` defaults to ``1e-3 * max |grad u|`` over the domain; nodes
    below it (or outside the domain) are excluded from the regular set and
    carry zero normal and curvature.  ``order`` selects 2nd or 4th order
    centred differences.
    """
    u, hs, dim = field.values, field.spacing, field.dim
    grad = np.stack([derivative(u, hs[i], i, order) for i in range(dim)])
    gn = np.sqrt(np.sum(grad * grad, axis=0))
    if eps_reg is None:
        top = float(np.max(gn[field.mask])) if field.mask.any() else 0.0
        eps_reg = 1e-3 * top
    regular = field.mask & (gn > eps_reg)
    safe = np.where(regular, gn, 1.0)
    nu = np.where(regular, grad / safe, 0.0)

    hess = np.empty((dim, dim) + u.shape)
    for i in range(dim):
        hess[i, i] = _second(u, hs[i], i, order)
        for j in range(i):
            hess[i, j] = hess[j, i] = derivative(grad[j], hs[i], i, order)
    # P D2u P with P = I - nu nu^T
    Hn = np.einsum("ij...,j...->i...", hess, nu)
    nHn = np.einsum("i...,i...->...", nu, Hn)
    proj = hess - nu[:, None] * Hn[None, :] - Hn[:, None] * nu[None, :] + nu[:, None] * nu[None, :] * nHn
    trace = np.einsum("ii...->...", proj)
    frob = np.einsum("ij...,ij...->...", proj, proj)
    H = np.where(regular, trace / safe, 0.0)
    A2 = np.where(regular, frob / safe**2, 0.0)
    return GeometryFields(grad, gn, nu, H, A2, regular, float(eps_reg), hs, u.shape, order)


@dataclass
class TangentialGradient:
    delta: np.ndarray  # (dim, *shape), delta_i phi
    norm2: np.ndarray  # |grad phi|^2 - (grad phi . nu)^2
    regular: np.ndarray


def tangential_gradient(geom, phi):
    """Per-axis tangential derivatives of ``phi`` and |nabla_T phi|^2 on the regular set."""
    vals = phi.values if isinstance(phi, ScalarField) else np.asarray(phi, dtype=float)
    if vals.shape != geom.shape or (
        isinstance(phi, ScalarField) and not np.allclose(phi.spacing, geom.spacing, rtol=1e-12)
    ):
        raise PreconditionError("phi and the level-set geometry live on different grids")
    dphi = np.stack([derivative(vals, geom.spacing[i], i, geom.order) for i in range(geom.dim)])
    dn = np.sum(dphi * geom.normal, axis=0)
    delta = np.where(geom.regular, dphi - dn * geom.normal, 0.0)
    norm2 = np.where(geom.regular, np.maximum(np.sum(dphi * dphi, axis=0) - dn * dn, 0.0), 0.0)
    return TangentialGradient(delta, norm2, geom.regular)


def tangential_divergence(geom, components):
    """sum_i delta_i F_i for a vector field given as ``dim`` component arrays."""
    total = 0.0
    for i, comp in enumerate(components):
        total = total + tangential_gradient(geom, comp).delta[i]
    return total


def _boundary_term_negligible(field, geom, weight_fn, tol=BOUNDARY_TOL, align_tol=ALIGN_TOL):
    """Whether the boundary flux of the level-set integration by parts vanishes.

    At each boundary node of Ω either ``weight_fn`` (the function required to
    vanish) is below ``tol`` times its interior maximum, or Ω's boundary is
    locally a level set of u (normal of Ω parallel to nu within ``align_tol``).
    A node where u itself is ~0 also passes, since then the boundary is the
    zero level set.
    """
    b = field.boundary_nodes()
    if not b.any():
        return True
    top = float(np.max(np.abs(weight_fn[field.mask]))) if field.mask.any() else 0.0
    small = np.abs(weight_fn) <= tol * max(top, np.finfo(float).tiny)
    utop = float(np.max(np.abs(field.values[field.mask])))
    uzero = np.abs(field.values) <= tol * max(utop, np.finfo(float).tiny)
    nb = field.boundary_normals()
    dot = np.sum(nb * geom.normal, axis=0)
    aligned = geom.regular & (1.0 - dot * dot <= align_tol**2)
    critical = ~geom.regular  # |grad u| ~ 0 kills the boundary flux too
    ok = small | uzero | aligned | critical
    return bool(np.all(ok[b]))


def boundary_hypothesis(field, geom, phi_values):
    """u = 0 or phi = 0 on the boundary (or a level-set-aligned boundary)."""
    return _boundary_term_negligible(field, geom, phi_values)


def _ibp_integrals(field, phi, psi, axis, eps_reg, order):
    geom = geometry_fields(field, eps_reg, order)
    tphi = tangential_gradient(geom, phi)
    tpsi = tangential_gradient(geom, psi)
    g = geom.grad_norm
    reg = geom.regular
    i1 = field.integrate(g * tphi.delta[axis] * psi.values, reg)
    i2 = -field.integrate(g * phi.values * tpsi.delta[axis], reg)
    i3 = field.integrate(g * geom.mean_curvature * geom.normal[axis] * phi.values * psi.values, reg)
    return geom, (i1, i2, i3)


def ibp_defect(field, phi, psi, axis, eps_reg=None, order=2, check_hypothesis=True):
    """Integration by parts along the level sets, in the ``axis`` direction.

    Compares ``I1 = int |grad u| (delta_i phi) psi`` with
    ``I2 + I3 = -int |grad u| phi delta_i psi + int |grad u| H nu_i phi psi``
    over the regular set.  The reported ``eps_disc`` is the defect of the
    same computation on the 2h subgrid, so ``holds`` means the defect
    shrank under refinement (or is at rounding level).
    """
    phi, psi = _as_field(field, phi), _as_field(field, psi)
    if not 0 <= axis < field.dim:
        raise PreconditionError(f"axis must be in [0, {field.dim})")
    geom, (i1, i2, i3) = _ibp_integrals(field, phi, psi, axis, eps_reg, order)
    if check_hypothesis and not _boundary_term_negligible(field, geom, phi.values * psi.values):
        raise PreconditionError(
            "neither u nor phi*psi vanishes on the boundary, and the boundary is not a level set of u"
        )
    defect = abs(i1 - i2 - i3)
    scale = abs(i1) + abs(i2) + abs(i3)
    eps = ROUNDING * max(scale, 1.0) * field.values.size ** 0.5
    coarse_defect = None
    if min(field.shape) >= 8:
        c = field.coarsen()
        _, (c1, c2, c3) = _ibp_integrals(c, phi.coarsen(), psi.coarsen(), axis, geom.eps_reg, order)
        coarse_defect = abs(c1 - c2 - c3)
        eps += coarse_defect
    return InequalityReport(
        "integration_by_parts", lhs=i1, rhs=i2 + i3, eps_disc=eps, defect=defect,
        params={"axis": axis, "h": field.h, "eps_reg": geom.eps_reg, "order": order},
        extras={"I1": i1, "I2": i2, "I3": i3, "relative_defect": defect / scale if scale else 0.0,
                "coarse_defect": coarse_defect},
    )


# level sets -----------------------------------------------------------------

def level_set(field, level):
    """Pieces of ``{u = level}``: polylines (2D) or a triangle mesh (3D), in physical coordinates."""
    org, hs = np.asarray(field.origin), np.asarray(field.spacing)
    if field.dim == 2:
        return [org + c * hs for c in measure.find_contours(field.values, level)]
    try:
        verts, faces, _, _ = measure.marching_cubes(field.values, level, spacing=tuple(hs))
    except (ValueError, RuntimeError):
        return np.empty((0, 3)), np.empty((0, 3), dtype=int)
    return verts + org, faces


def polylines_csv(polylines, fh=None):
    rows = [(k, *p) for k, poly in enumerate(polylines) for p in poly]
    return write_csv(rows, ["contour", "x", "y"], fh)


def _level_integral(field, level, gvals):
    """(∫_{u=level} g dV, measure) with the domain fraction as a weight."""
    if field.dim == 2:
        total = meas = 0.0
        for poly in level_set(field, level):
            if len(poly) < 2:
                continue
            mid = 0.5 * (poly[1:] + poly[:-1])
            seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
            w = seg * field.interpolate(mid, field.domain_fraction)
            total += float(np.sum(w * field.interpolate(mid, gvals)))
            meas += float(np.sum(w))
        return total, meas
    verts, faces = level_set(field, level)
    if not len(faces):
        return 0.0, 0.0
    tri = verts[faces]
    area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    cen = tri.mean(axis=1)
    w = area * field.interpolate(cen, field.domain_fraction)
    return float(np.sum(w * field.interpolate(cen, gvals))), float(np.sum(w))


def coarea_check(field, g=1.0, levels=64, eps_reg=None, tol=0.02):
    """Volume integral of |grad u| g against the t-integral of level-set integrals.

    Levels are the midpoints of ``levels`` equal bins spanning the range
    of u over the domain; the level side uses polyline or triangle
    measure from marching squares/cubes.  ``holds`` when the relative gap
    is at most ``tol``.
    """
    g = _as_field(field, g)
    geom = geometry_fields(field, eps_reg)
    vol = field.integrate(geom.grad_norm * g.values)
    u = field.values[field.mask]
    lo, hi = float(u.min()), float(u.max())
    if hi <= lo:
        raise PreconditionError("u is constant on the domain: no level sets")
    dt = (hi - lo) / levels
    ts = lo + dt * (np.arange(levels) + 0.5)
    vals, meas = zip(*(_level_integral(field, t, g.values) for t in ts))
    if not any(m > 0 for m in meas):
        raise PreconditionError("level-set extraction produced no surfaces")
    surf = dt * float(np.sum(vals))
    gap = abs(vol - surf) / max(abs(vol), abs(surf), np.finfo(float).tiny)
    return InequalityReport(
        "coarea", lhs=vol, rhs=surf, eps_disc=tol * max(abs(vol), abs(surf)), defect=abs(vol - surf),
        params={"levels": levels, "h": field.h, "t_range": (lo, hi)},
        extras={"relative_gap": gap, "level_values": list(ts), "level_integrals": list(vals)},
    )


# analytic test fields --------------------------------------------------------------

def radial_field(dim, m, r_in=0.0, r_out=1.0, center=None, supersample=6):
    """u = |x - center| on the shell r_in <= |x - center| <= r_out.

    The box has m nodes per axis and two cells of padding around the shell.
    """
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)

    def dist(*X):
        return np.sqrt(sum((x - ci) ** 2 for x, ci in zip(X, c)))

    def domain(*X):
        d = dist(*X)
        return (d >= r_in) & (d <= r_out)

    half = r_out * (m - 1) / (m - 5)
    return ScalarField.from_function(dist, c - half, c + half, (m,) * dim, domain, supersample)


def annulus_example(m):
    """u = |x| on 1 <= |x| <= 2 in the plane with phi = x_1, psi = 1.

    Both sides of the integration-by-parts identity along axis 0 equal 3 pi / 2.
    """
    field = radial_field(2, m, 1.0, 2.0)
    X = field.coords()
    return field, field.like(X[0]), field.like(np.ones(field.shape))
