import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spothopf.core import core_data
from spothopf.equilibrium import (SchnakenbergParams, SpotCollisionError, SpotConfiguration,
                                  equilibrium_residual, line_init, neumann_hessian_sum, ring_init,
                                  solve_equilibrium)
from spothopf.greens import Disk, HalfDisk, Rectangle, SourceTooCloseError

EPS = 0.01


def test_single_disk_spot_closed_form():
    D = Disk()
    p = SchnakenbergParams.from_strength(EPS, 4.0, 1, D.area)
    c = solve_equilibrium(D, p, ring_init(1, 0.0))
    assert c.converged
    np.testing.assert_allclose(c.locations, 0.0, atol=1e-12)
    assert c.strengths[0] == pytest.approx(4.0, abs=1e-12)
    # regular part of the unit-disk Neumann function at the centre is -3/(8 pi)
    ubar = 4.0 / p.nu + 2 * np.pi * 4.0 * (-3.0 / (8 * np.pi)) + core_data(4.0).chi
    assert c.ubar == pytest.approx(ubar, rel=1e-9)


def test_off_centre_start_returns_to_centre():
    D = Disk()
    p = SchnakenbergParams.from_strength(EPS, 4.0, 1, D.area)
    init = SpotConfiguration(np.array([[0.2, -0.15]]), np.ones(1))
    c = solve_equilibrium(D, p, init)
    assert c.converged
    np.testing.assert_allclose(c.locations, 0.0, atol=1e-8)


@pytest.mark.parametrize("N", [2, 3, 5, 7])
def test_ring_is_symmetric(N):
    D = Disk()
    p = SchnakenbergParams.from_strength(EPS, 4.0, N, D.area)
    c = solve_equilibrium(D, p, ring_init(N, 0.6))
    assert c.converged
    r = np.hypot(*c.locations.T)
    np.testing.assert_allclose(r, r[0], atol=1e-8)
    np.testing.assert_allclose(c.strengths, 4.0, atol=1e-8)
    ang = np.sort(np.arctan2(c.locations[:, 1], c.locations[:, 0]) % (2 * np.pi))
    np.testing.assert_allclose(np.diff(ang), 2 * np.pi / N, atol=1e-7)


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_rectangle_line_keeps_reflection_symmetry(N):
    R = Rectangle(N * 1.0, 1.0)
    p = SchnakenbergParams.from_strength(EPS, 4.0, N, R.area)
    c = solve_equilibrium(R, p, line_init(N, R.width, R.height))
    assert c.converged
    np.testing.assert_allclose(c.locations[:, 1], 0.5, atol=1e-9)
    np.testing.assert_allclose(np.sort(c.locations[:, 0]), np.arange(N) + 0.5, atol=1e-8)


def test_half_disk_spot_on_axis():
    D = HalfDisk()
    p = SchnakenbergParams.from_strength(EPS, 4.0, 1, D.area)
    init = SpotConfiguration(np.array([[0.1, 0.45]]), np.ones(1))
    c = solve_equilibrium(D, p, init)
    assert c.converged
    assert abs(c.locations[0, 0]) < 1e-8
    assert 0.0 < c.locations[0, 1] < 1.0


def test_residual_vanishes_at_solution():
    D = Disk()
    p = SchnakenbergParams.from_strength(EPS, 4.0, 3, D.area)
    c = solve_equilibrium(D, p, ring_init(3, 0.5))
    f = equilibrium_residual(D, p, c.locations, c.strengths)
    assert f.shape == (9,)
    assert np.max(np.abs(f)) < 1e-9


@given(st.floats(0.5, 4.0), st.integers(1, 4))
def test_solvability(S, N):
    D = Disk()
    p = SchnakenbergParams.from_strength(EPS, S, N, D.area)
    c = solve_equilibrium(D, p, ring_init(N, 0.55))
    assert 2 * np.pi * c.strengths.sum() == pytest.approx(p.feed * D.area, rel=1e-10)


def test_hessian_sum_single_spot():
    D = Disk()
    H = neumann_hessian_sum(D, [[0.0, 0.0]], [4.0])
    np.testing.assert_allclose(H[0], 4.0 * np.eye(2) / (2 * np.pi), atol=1e-12)


def test_collision_rejected():
    D = Disk()
    p = SchnakenbergParams.from_strength(EPS, 4.0, 2, D.area)
    init = SpotConfiguration(np.array([[0.0, 0.0], [0.05, 0.0]]), np.ones(2))
    with pytest.raises(SpotCollisionError):
        solve_equilibrium(D, p, init)


def test_source_outside_rejected():
    D = Disk()
    p = SchnakenbergParams.from_strength(EPS, 4.0, 1, D.area)
    with pytest.raises(SourceTooCloseError):
        solve_equilibrium(D, p, SpotConfiguration(np.array([[1.5, 0.0]]), np.ones(1)))


@pytest.mark.parametrize("eps, feed", [(0.0, 1.0), (0.3, 1.0), (0.01, -1.0)])
def test_params_validated(eps, feed):
    with pytest.raises(ValueError):
        SchnakenbergParams(eps, feed)


def test_to_dict_round_trip():
    c = ring_init(3, 0.5)
    d = c.to_dict()
    assert np.allclose(d["locations"], c.locations)
    assert d["strengths"] == [1.0, 1.0, 1.0]
