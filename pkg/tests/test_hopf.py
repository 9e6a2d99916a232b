import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spothopf.core import core_data
from spothopf.equilibrium import SchnakenbergParams, SpotConfiguration, ring_init, solve_equilibrium
from spothopf.greens import Disk, HalfDisk, Rectangle
from spothopf.hopf import (HopfRoot, Pencil, axis_subspace, classify_motion, find_roots,
                           one_spot_scalar, tau0_from_frequency, unit_disk_function,
                           universal_frequency)

EPS = 0.01


def _mp_ratio(z):
    z = mp.mpc(z)
    return mp.diff(lambda t: mp.besselk(1, t), z) / mp.diff(lambda t: mp.besseli(1, t), z)


def test_universal_frequency_oracle():
    def f(w):
        om = 1j * w
        z = mp.sqrt(om)
        return mp.re(2 + om * (mp.euler + mp.log(z / 2) - _mp_ratio(z)))
    ref = float(mp.findroot(f, 3.0))
    assert universal_frequency() == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("om", [0.5, 3j, 2 + 7j])
def test_unit_disk_function_oracle(om):
    z = mp.sqrt(mp.mpc(om))
    ref = 2 + om * (mp.log(mp.exp(mp.euler) * EPS * z / 2) - _mp_ratio(z))
    assert abs(unit_disk_function(om, EPS) - complex(ref)) < 1e-10 * abs(complex(ref))


@pytest.mark.parametrize("S", [2.0, 3.0, 4.0])
@pytest.mark.parametrize("eps", [0.01, 0.03])
def test_disk_frequency_is_universal(S, eps):
    p = SchnakenbergParams.from_strength(eps, S, 1, np.pi)
    root = one_spot_scalar(Disk(), S, p)[0][1][0]
    assert root.omega_im == pytest.approx(universal_frequency(), abs=1e-9)
    cd = core_data(S)
    tau = tau0_from_frequency(root.omega_im, S, eps, cd.k1, cd.k2)
    assert root.tau_hat == pytest.approx(tau, rel=1e-10)


@pytest.fixture(scope="module")
def disk_setup():
    D = Disk()
    p = SchnakenbergParams.from_strength(EPS, 4.0, 1, D.area)
    return D, p, solve_equilibrium(D, p, ring_init(1, 0.0))


def test_general_pencil_matches_closed_form(disk_setup):
    D, p, c = disk_setup
    roots = find_roots(D, c, p)
    closed = one_spot_scalar(D, 4.0, p)[0][1][0]
    assert roots[0].omega_im == pytest.approx(closed.omega_im, abs=1e-9)
    assert roots[0].tau_hat == pytest.approx(closed.tau_hat, rel=1e-8)
    assert roots[0].residual < 1e-10


def test_scalar_backend_matches_closed_form(disk_setup):
    D, p, _ = disk_setup
    closed = one_spot_scalar(D, 4.0, p)[0][1][0]
    for _, roots in one_spot_scalar(D, 4.0, p, method="greens"):
        assert roots[0].tau_hat == pytest.approx(closed.tau_hat, rel=1e-9)


def test_closed_form_rejects_off_centre(disk_setup):
    D, p, _ = disk_setup
    with pytest.raises(ValueError):
        one_spot_scalar(D, 4.0, p, location=[0.1, 0.0], method="closed_form")


@pytest.mark.parametrize("y", [0.3, 0.55])
def test_half_disk_scalar_matches_pencil(y):
    D = HalfDisk()
    p = SchnakenbergParams.from_strength(EPS, 4.0, 1, D.area)
    c = SpotConfiguration(np.array([[0.0, y]]), np.array([4.0]))
    general = find_roots(D, c, p)
    scalar = sorted(r.tau_hat for _, rr in one_spot_scalar(D, 4.0, p, location=[0.0, y]) for r in rr)
    assert len(general) == len(scalar)
    for g, s in zip(general, scalar):
        assert g.tau_hat == pytest.approx(s, rel=1e-8)


def test_half_disk_modes_are_axis_aligned():
    D = HalfDisk()
    p = SchnakenbergParams.from_strength(EPS, 4.0, 1, D.area)
    c = solve_equilibrium(D, p, SpotConfiguration(np.array([[0.0, 0.45]]), np.ones(1)))
    roots = find_roots(D, c, p)
    assert len(roots) == 2
    assert abs(roots[0].mode[1]) < 1e-8 and abs(roots[1].mode[0]) < 1e-8
    assert roots[0].tau_hat < roots[1].tau_hat
    for r in roots:
        assert classify_motion(r)[0]["kind"] == "line"


@given(st.floats(0.3, 8.0), st.floats(0.1, 40.0))
@settings(max_examples=15)
def test_conjugate_pairing(w, l):
    pen = _rect_pencil()
    assert abs(pen.det(-w, -l) - np.conj(pen.det(w, l))) <= 1e-9 * max(1.0, abs(pen.det(w, l)))


_PENCIL = {}


def _rect_pencil():
    if "rect" not in _PENCIL:
        D = Rectangle(2.0, 1.0)
        p = SchnakenbergParams.from_strength(EPS, 4.0, 1, D.area)
        c = SpotConfiguration(np.array([[0.8, 0.4]]), np.array([4.0]))
        _PENCIL["rect"] = Pencil(D, c, p)
    return _PENCIL["rect"]


def test_subspace_roots_are_subset():
    D = Rectangle(2.0, 1.0)
    p = SchnakenbergParams.from_strength(EPS, 4.0, 1, D.area)
    c = SpotConfiguration(np.array([[1.0, 0.5]]), np.array([4.0]))
    full = find_roots(D, c, p)
    sub = find_roots(D, c, p, subspace=axis_subspace(1, 0))
    assert len(sub) == 1
    assert any(abs(r.tau_hat - sub[0].tau_hat) < 1e-9 for r in full)


def test_root_mode_in_kernel(disk_setup):
    D, p, c = disk_setup
    r = find_roots(D, c, p)[0]
    pen = Pencil(D, c, p)
    M = pen.matrix(r.omega_im, r.lambda_im)
    assert np.linalg.norm(M @ r.mode) < 1e-10 * np.linalg.norm(pen.reduced(r.omega_im))
    assert np.linalg.norm(r.mode) == pytest.approx(1.0)


def test_axis_subspace_shape():
    Q = axis_subspace(3, 1)
    assert Q.shape == (6, 3)
    np.testing.assert_array_equal(Q.T @ Q, np.eye(3))
    assert Q[1, 0] == 1 and Q[3, 1] == 1 and Q[5, 2] == 1


@pytest.mark.parametrize("mode, kind", [([1.0, 0.5], "line"), ([1.0, 1.0j], "ellipse"),
                                        ([1j, -0.3j], "line")])
def test_classify_motion(mode, kind):
    mode = np.array(mode, complex)
    out = classify_motion(HopfRoot(1.0, 1.0, 1.0, mode, 0.0))[0]
    assert out["kind"] == kind
    if kind == "line":
        d = np.array(out["direction"])
        m = (mode * np.exp(-1j * np.angle(mode[0]))).real
        assert abs(abs(d @ m) - np.linalg.norm(m)) < 1e-12


def test_root_serialises(disk_setup):
    D, p, c = disk_setup
    d = find_roots(D, c, p)[0].to_dict()
    assert set(d) == {"omega_im", "lambda_im", "tau_hat", "mode", "residual"}
    assert len(d["mode"]) == 4
