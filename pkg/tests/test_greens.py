import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spothopf.greens import (Disk, GriddedDomain, HalfDisk, PerturbedDisk, Rectangle,
                             SourceTooCloseError)


def rect_helmholtz_series(mu, a, b, x, xi, modes=400):
    """Cosine series in x with the exact 1-D Green's function in y (needs y != eta)."""
    m = np.arange(modes)
    km = m * np.pi / a
    kap = np.sqrt(mu + km**2 + 0j)
    lo, hi = min(x[1], xi[1]), max(x[1], xi[1])
    # cosh(k lo) cosh(k (b - hi)) / (k sinh(k b)) with overflow-free exponentials
    phi = (0.5 * (np.exp(kap * (lo - hi)) + np.exp(-kap * (lo + hi)))
           * (1.0 + np.exp(-2.0 * kap * (b - hi))) / (1.0 - np.exp(-2.0 * kap * b)) / kap)
    phi = phi * np.exp(-kap * 0.0)
    c = np.where(m == 0, 1.0 / a, 2.0 / a)
    return np.sum(c * np.cos(km * x[0]) * np.cos(km * xi[0]) * phi)


def rect_neumann_series(a, b, x, xi, modes=400):
    """Zero-mean Neumann function of the rectangle by the same construction."""
    y, eta = x[1], xi[1]
    phi0 = y**2 / (2 * b) - max(y - eta, 0.0) + eta**2 / (2 * b) - eta + b / 3.0
    m = np.arange(1, modes)
    km = m * np.pi / a
    lo, hi = min(y, eta), max(y, eta)
    phi = (0.5 * (np.exp(km * (lo - hi)) + np.exp(-km * (lo + hi)))
           * (1.0 + np.exp(-2.0 * km * (b - hi))) / (1.0 - np.exp(-2.0 * km * b)) / km)
    return phi0 / a + np.sum(2.0 / a * np.cos(km * x[0]) * np.cos(km * xi[0]) * phi)


PAIRS = [((0.3, 0.2), (1.4, 0.7)), ((1.1, 0.45), (0.9, 0.6)), ((0.05, 0.9), (1.95, 0.1))]


# -- oracles ------------------------------------------------------------------

@pytest.mark.parametrize("x, xi", PAIRS)
@pytest.mark.parametrize("mu", [0.5, 3.0j, 10.0 + 4.0j])
def test_rectangle_helmholtz_matches_series(x, xi, mu):
    R = Rectangle(2.0, 1.0)
    ref = rect_helmholtz_series(mu, 2.0, 1.0, np.array(x), np.array(xi))
    assert abs(R.helmholtz_value(mu, x, xi) - ref) < 1e-10


@pytest.mark.parametrize("x, xi", PAIRS)
def test_rectangle_neumann_matches_series(x, xi):
    R = Rectangle(2.0, 1.0)
    ref = rect_neumann_series(2.0, 1.0, np.array(x), np.array(xi))
    assert R.neumann_value(x, xi) == pytest.approx(ref, abs=1e-10)


def _laplacian(f, x, h=1e-3):
    x = np.asarray(x, float)
    e = np.eye(2) * h
    return (f(x + e[0]) + f(x - e[0]) + f(x + e[1]) + f(x - e[1]) - 4 * f(x)) / h**2


@pytest.mark.parametrize("D, x, xi", [
    (Disk(), (0.5, -0.3), (-0.2, 0.1)),
    (HalfDisk(), (0.4, 0.6), (-0.1, 0.3)),
    (Rectangle(2.0, 1.0), (1.5, 0.8), (0.7, 0.3)),
    (PerturbedDisk(0.05, [0, 0, 1.0]), (0.3, 0.5), (-0.2, -0.1)),
])
def test_neumann_pde(D, x, xi):
    lap = _laplacian(lambda p: D.neumann_value(p, xi), x)
    assert lap == pytest.approx(1.0 / D.area, abs=1e-4)


@pytest.mark.parametrize("D, xi", [(Disk(), (0.3, 0.2)), (HalfDisk(), (0.2, 0.4))])
def test_neumann_no_flux(D, xi):
    th = np.linspace(0.1, 3.0, 7)
    for t in th:
        n = np.array([np.cos(t), np.sin(t)])
        grad = D.neumann_cross(0.999999 * n, xi).gradient
        assert abs(grad @ n) < 1e-4


def test_half_disk_flat_side_no_flux():
    D = HalfDisk()
    xi = (0.2, 0.4)
    for x1 in (-0.7, 0.1, 0.6):
        assert abs(D.neumann_cross((x1, 1e-9), xi).gradient[1]) < 1e-6
        assert abs(D.helmholtz_cross(3j, (x1, 1e-9), xi).grad_x[1]) < 1e-6


@pytest.mark.parametrize("mu", [1.0, 4.0j])
def test_helmholtz_pde(mu):
    D = Disk()
    xi = (0.2, -0.3)
    x = np.array([-0.4, 0.5])
    lap = _laplacian(lambda p: D.helmholtz_value(mu, p, xi), x)
    assert abs(lap - mu * D.helmholtz_value(mu, x, xi)) < 1e-4


def test_disk_centre_hessian():
    H = Disk().neumann_self([0.0, 0.0]).hessian
    np.testing.assert_allclose(H, np.eye(2) / (2 * np.pi), atol=1e-14)


# -- properties -------------------------------------------------------------------

coord = st.floats(0.05, 0.95)


@given(coord, coord, coord, coord)
def test_rectangle_reciprocity(a, b, c, d):
    R = Rectangle(2.0, 1.0)
    x, xi = np.array([2 * a, b]), np.array([2 * c, d])
    if np.hypot(*(x - xi)) < 1e-3:
        return
    assert abs(R.neumann_value(x, xi) - R.neumann_value(xi, x)) < 1e-9
    assert abs(R.helmholtz_value(2.5j, x, xi) - R.helmholtz_value(2.5j, xi, x)) < 1e-9


@given(st.floats(0.0, 0.8), st.floats(0, 2 * np.pi), st.floats(0.0, 0.8), st.floats(0, 2 * np.pi))
def test_disk_reciprocity(r1, t1, r2, t2):
    x = r1 * np.array([np.cos(t1), np.sin(t1)])
    xi = r2 * np.array([np.cos(t2), np.sin(t2)])
    if np.hypot(*(x - xi)) < 1e-3:
        return
    for D in (Disk(), PerturbedDisk(0.1, [0, 0.2, 0.5], [0, 0, 0.3])):
        assert abs(D.neumann_value(x, xi) - D.neumann_value(xi, x)) < 1e-9
        assert abs(D.helmholtz_value(1 + 2j, x, xi) - D.helmholtz_value(1 + 2j, xi, x)) < 1e-9


@pytest.mark.parametrize("D, xi", [(Disk(), (0.3, -0.2)), (HalfDisk(), (0.1, 0.5)),
                                   (Rectangle(2.0, 1.0), (0.6, 0.3)),
                                   (PerturbedDisk(0.1, [0, 0, 1.0]), (0.2, 0.1))])
def test_hessian_trace_is_inverse_area(D, xi):
    assert np.trace(D.neumann_self(xi).hessian) == pytest.approx(1.0 / D.area, abs=1e-10)


@pytest.mark.parametrize("D", [Disk(), Rectangle(2.0, 1.0)])
def test_self_gradient_matches_difference(D):
    xi = np.array([0.6, 0.35])
    s = D.helmholtz_self(3j, xi)
    h = 1e-5
    for l in range(2):
        e = np.eye(2)[l] * h
        fd = (D.helmholtz_self(3j, xi + e).grad_regular - D.helmholtz_self(3j, xi - e).grad_regular) / (2 * h)
        np.testing.assert_allclose(s.grad_source_of_grad[l], fd, atol=1e-6)


def test_source_outside_rejected():
    with pytest.raises(SourceTooCloseError):
        Disk().check_source([1.2, 0.0])


# -- gridded backend ----------------------------------------------------------------

@pytest.fixture(scope="module")
def gridded_rect():
    return GriddedDomain.rectangle(2.0, 1.0, h=0.02)


@pytest.mark.parametrize("xi", [(0.62, 0.41), (1.37, 0.58), (1.0, 0.5)])
def test_gridded_matches_rectangle(gridded_rect, xi):
    R = Rectangle(2.0, 1.0)
    g, r = gridded_rect.neumann_self(xi), R.neumann_self(xi)
    assert abs(g.regular_value - r.regular_value) < 2e-3
    assert np.max(np.abs(g.hessian - r.hessian)) < 2e-3
    gh, rh = gridded_rect.helmholtz_self(3j, xi), R.helmholtz_self(3j, xi)
    assert abs(gh.regular_value - rh.regular_value) < 2e-3
    assert np.max(np.abs(gh.grad_source_of_grad - rh.grad_source_of_grad)) < 2e-3


def test_gridded_reciprocity(gridded_rect):
    a, b = np.array([0.62, 0.41]), np.array([1.37, 0.58])
    assert abs(gridded_rect.neumann_value(a, b) - gridded_rect.neumann_value(b, a)) < 2e-3
    assert abs(gridded_rect.helmholtz_value(2j, a, b) - gridded_rect.helmholtz_value(2j, b, a)) < 2e-3


def test_gridded_disk_matches_series():
    th = 2 * np.pi * np.arange(512) / 512
    G = GriddedDomain(np.column_stack([np.cos(th), np.sin(th)]), h=0.02)
    xi = np.array([0.25, -0.1])
    assert np.max(np.abs(G.neumann_self(xi).hessian - Disk().neumann_self(xi).hessian)) < 2e-3


def test_gridded_hole_resolution_guard():
    with pytest.raises(ValueError):
        GriddedDomain.rectangle(2.0, 1.0, [((1.0, 0.5), 0.05)], h=0.02)


def test_gridded_describe_round_trip():
    spec = {"polygon": [[0, 0], [2, 0], [2, 1], [0, 1]], "holes": [{"center": [0.5, 0.5], "radius": 0.2}],
            "h": 0.02}
    G = GriddedDomain.from_dict(spec)
    assert G.area == pytest.approx(2.0 - np.pi * 0.04, rel=1e-3)
    assert G.describe()["holes"][0]["radius"] == 0.2
