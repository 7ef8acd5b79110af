import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardylab.errors import PreconditionError
from hardylab.levelset import (
    ScalarField,
    annulus_example,
    coarea_check,
    geometry_fields,
    ibp_defect,
    level_set,
    polylines_csv,
    radial_field,
    tangential_divergence,
    tangential_gradient,
)
from conftest import rate


def _norm(*X):
    return np.sqrt(sum(x * x for x in X))


def test_shell_geometry_3d():
    f = radial_field(3, 61, 0.5, 1.0)
    g = geometry_fields(f, order=4)
    r = _norm(*f.coords())
    sel = g.regular & (np.abs(r - 0.5) < 0.06) & (f.domain_fraction == 1)
    assert np.allclose(g.mean_curvature[sel], 2 / r[sel], rtol=1e-3)
    assert np.allclose(g.A2[sel], 2 / r[sel] ** 2, rtol=2e-3)
    nu = np.stack(f.coords()) / np.where(r > 0, r, 1)
    assert np.allclose(g.normal[:, sel], nu[:, sel], atol=1e-4)
    # H^2 = (n-1)|A|^2 on spheres, and H^2 <= (n-1)|A|^2 always
    assert np.all(g.mean_curvature**2 <= 2 * g.A2 * (1 + 1e-12) + 1e-12)


def test_flat_foliation():
    f = ScalarField.from_function(lambda x, y, z: x + 0 * y + 0 * z, (-1,) * 3, (1,) * 3, 17)
    g = geometry_fields(f)
    assert np.max(np.abs(g.mean_curvature)) <= 1e-12 and np.max(g.A2) <= 1e-24


def test_circle_curvature_within_10h():
    for m in (41, 81):
        f = ScalarField.from_function(_norm, (-1, -1), (1, 1), m)
        g = geometry_fields(f)
        r = _norm(*f.coords())
        sel = np.abs(r - 0.5) <= f.h
        assert np.max(np.abs(g.mean_curvature[sel] - 1 / r[sel]) / (1 / r[sel])) <= 10 * f.h


def test_curvature_converges():
    errs, hs = [], []
    for m in (21, 41, 81):
        f = ScalarField.from_function(_norm, (-2, -2), (2, 2), m)
        g = geometry_fields(f)
        r = _norm(*f.coords())
        sel = (r > 0.8) & (r < 1.6)
        errs.append(np.max(np.abs(g.mean_curvature[sel] - 1 / r[sel])))
        hs.append(f.h)
    assert rate(errs, hs) >= 1.8


def test_tangential_gradient_constant_on_levels():
    f = ScalarField.from_function(_norm, (-1, -1, -1), (1, 1, 1), 21)
    g = geometry_fields(f, order=4)
    tg = tangential_gradient(g, f.values)
    r = _norm(*f.coords())
    sel = g.regular & (r > 0.3) & (r < 0.9)
    assert np.max(tg.norm2[sel]) <= 1e-10


def test_tangential_divergence_of_position():
    for dim in (2, 3):
        f = ScalarField.from_function(lambda *X: _norm(*X), (-1,) * dim, (1,) * dim, 15)
        g = geometry_fields(f)
        div = tangential_divergence(g, f.coords())
        assert np.allclose(div[g.regular], dim - 1, atol=1e-12)


def test_flat_tangential_derivatives():
    f = ScalarField.from_function(lambda x, y: x + 0 * y, (0, 0), (1, 1), 11)
    g = geometry_fields(f)
    tg = tangential_gradient(g, f.coords()[1])
    assert np.allclose(tg.delta[1][g.regular], 1.0) and np.allclose(tg.delta[0][g.regular], 0.0)
    assert np.allclose(tg.norm2[g.regular], 1.0)


def test_grid_mismatch():
    f = ScalarField.from_function(lambda x, y: x + y, (0, 0), (1, 1), 11)
    other = ScalarField.from_function(lambda x, y: x, (0, 0), (1, 1), 13)
    with pytest.raises(PreconditionError):
        tangential_gradient(geometry_fields(f), other)


def test_coarea_disk_and_ball():
    disk = radial_field(2, 101, 0.0, 1.0)
    rep = coarea_check(disk)
    assert rep.holds and rep.lhs == pytest.approx(np.pi, rel=0.02) and rep.rhs == pytest.approx(np.pi, rel=0.02)
    ball = radial_field(3, 61, 0.0, 1.0)
    rep = coarea_check(ball)
    assert rep.holds and rep.rhs == pytest.approx(4 * np.pi / 3, rel=0.02)


def test_coarea_fubini():
    f = ScalarField.from_function(lambda x, y: x + 0 * y, (0, 0), (1, 1), 41)
    rep = coarea_check(f, g=lambda x, y: y)
    assert rep.lhs == pytest.approx(0.5, rel=1e-12)
    assert rep.rhs == pytest.approx(0.5, rel=0.01)


def test_coarea_constant_field():
    f = ScalarField.from_function(lambda x, y: 1 + 0 * x, (0, 0), (1, 1), 11)
    with pytest.raises(PreconditionError):
        coarea_check(f)


def test_annulus_integrals():
    f, phi, psi = annulus_example(129)
    rep = ibp_defect(f, phi, psi, 0)
    assert rep.extras["I1"] == pytest.approx(1.5 * np.pi, rel=0.02)
    assert rep.extras["I3"] == pytest.approx(1.5 * np.pi, rel=0.02)
    assert abs(rep.extras["I2"]) <= 1e-12
    assert rep.holds


def test_ibp_zero_test_function():
    f, _, psi = annulus_example(33)
    rep = ibp_defect(f, 0.0, psi, 0)
    assert rep.lhs == 0 and rep.rhs == 0


def test_ibp_slab_bump():
    def bump(x, y):
        return np.where((y > 0.2) & (y < 0.8), (1 - ((y - 0.5) / 0.3) ** 2) ** 4, 0.0) + 0 * x

    for m in (33, 65, 129):
        f = ScalarField.from_function(lambda x, y: x + 0 * y, (0, 0), (1, 1), m)
        rep = ibp_defect(f, bump, bump, 1)
        assert abs(rep.extras["I3"]) <= 1e-12
        # the two sides are the same discrete sum up to rounding: defect <= h^2
        assert rep.defect <= f.h**2
        assert rep.extras["I1"] == pytest.approx(-rep.extras["I2"], abs=1e-12)


def test_ibp_hypothesis_violated():
    # u = x + y on the square: the boundary is not a level set and u, phi do not vanish
    f = ScalarField.from_function(lambda x, y: 1 + x + y, (0, 0), (1, 1), 21)
    with pytest.raises(PreconditionError):
        ibp_defect(f, 1.0, 1.0, 0)


def test_geometry_convergence_rates():
    ibp, co, hs = [], [], []
    for m in (33, 65, 129):
        f, phi, psi = annulus_example(m)
        ibp.append(ibp_defect(f, phi, psi, 0).defect)
        co.append(coarea_check(f).extras["relative_gap"])
        hs.append(f.h)
    assert rate(ibp, hs) >= 1.0 and rate(co, hs) >= 1.0


def test_level_set_polylines_csv():
    f = radial_field(2, 41, 0.0, 1.0)
    polys = level_set(f, 0.5)
    text = polylines_csv(polys)
    assert text.startswith("contour,x,y\n")
    pts = np.concatenate(polys)
    assert np.allclose(np.linalg.norm(pts, axis=1), 0.5, atol=f.h**2 * 4)


def test_field_io_roundtrip(tmp_path):
    f = radial_field(3, 11, 0.2, 1.0)
    g = ScalarField.from_bytes(f.to_bytes())
    assert np.array_equal(g.values, f.values) and np.array_equal(g.domain_fraction, f.domain_fraction)
    h = ScalarField.from_csv(io.StringIO(f.to_csv()))
    assert np.array_equal(h.values, f.values) and h.spacing == f.spacing
    for name in ("f.bin", "f.csv"):
        f.save(tmp_path / name)
        assert np.array_equal(ScalarField.load(tmp_path / name).values, f.values)
    with pytest.raises(PreconditionError):
        ScalarField.from_bytes(b"XXXX" + f.to_bytes()[4:])


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.2, 2.0))
def test_curvature_inequality_random_quadratic(a, b, c):
    # H^2 <= (n-1)|A|^2 holds algebraically for any field
    f = ScalarField.from_function(lambda x, y, z: a * x * x + b * y * y + c * z + x * y * z, (-1,) * 3, (1,) * 3, 9)
    g = geometry_fields(f)
    H2, A2 = g.mean_curvature**2, g.A2
    assert np.all(H2 <= 2 * A2 * (1 + 1e-10) + 1e-12)
    assert np.allclose(np.sum(g.normal**2, axis=0)[g.regular], 1.0)


@given(st.floats(0.2, 0.8), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_tangential_gradient_orthogonal_to_normal(r0, cx, cy):
    f = ScalarField.from_function(lambda x, y: np.hypot(x - cx, y - cy), (-1, -1), (1, 1), 21)
    g = geometry_fields(f)
    phi = f.coords()[0] ** 2 + r0 * f.coords()[1]
    tg = tangential_gradient(g, phi)
    assert np.max(np.abs(np.sum(tg.delta * g.normal, axis=0))) <= 1e-12
