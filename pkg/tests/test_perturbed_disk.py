import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spothopf.equilibrium import SchnakenbergParams, SpotConfiguration
from spothopf.greens import Disk, GriddedDomain
from spothopf.hopf import find_roots
from spothopf.perturbed_disk import (PerturbationSpec, fourier_mode2, perturbed_disk_corrections,
                                     predict, q_function, second_radial_derivative,
                                     slope_coefficient)

EPS = 0.01


def _antisym(m):
    return 0.5 * (m[0, 0] - m[1, 1])


@pytest.fixture(scope="module")
def gridded_ellipse():
    sig = 0.05
    th = 2 * np.pi * np.arange(512) / 512
    r = 1 + sig * np.cos(2 * th)
    return sig, GriddedDomain(np.column_stack([r * np.cos(th), r * np.sin(th)]), h=0.02)


def test_neumann_correction_matches_gridded(gridded_ellipse):
    sig, G = gridded_ellipse
    dH, _, _ = perturbed_disk_corrections(sig, 1.0, 0.0, 3j)
    diff = G.neumann_self([0, 0]).hessian - Disk().neumann_self([0, 0]).hessian
    assert _antisym(diff) == pytest.approx(_antisym(dH), rel=0.03)


@pytest.mark.parametrize("mu", [3j, 1.0 + 6j])
def test_helmholtz_corrections_match_gridded(gridded_ellipse, mu):
    sig, G = gridded_ellipse
    _, dF, dHm = perturbed_disk_corrections(sig, 1.0, 0.0, mu)
    g, d = G.helmholtz_self(mu, [0, 0]), Disk().helmholtz_self(mu, [0, 0])
    ref = _antisym(dF)
    assert abs(_antisym(g.grad_source_of_grad - d.grad_source_of_grad) - ref) < 0.03 * abs(ref)
    ref = _antisym(dHm)
    assert abs(_antisym(g.hessian - d.hessian) - ref) < 0.03 * abs(ref)


@pytest.mark.parametrize("k", [1.2, mp.sqrt(3j), mp.sqrt(2 + 9j)])
def test_slope_coefficient_oracle(k):
    k = mp.mpc(k)
    di = mp.diff(lambda t: mp.besseli(1, t), k)
    dk = mp.diff(lambda t: mp.besselk(1, t), k)
    F = lambda rho: mp.besselk(1, k * rho) - dk / di * mp.besseli(1, k * rho)
    two_forms = [(1 - k**2) / (8 * mp.pi * di**2),
                 k / (8 * mp.pi * di) * (2 * F(1) - mp.diff(F, 1, 2))]
    val = slope_coefficient(complex(k))
    for ref in two_forms:
        assert abs(val - complex(ref)) < 1e-10 * abs(complex(ref))


@pytest.mark.parametrize("n", [1, 2])
def test_second_radial_derivative_oracle(n):
    k = mp.sqrt(mp.mpc(4j))
    di = mp.diff(lambda t: mp.besseli(n, t), k)
    dk = mp.diff(lambda t: mp.besselk(n, t), k)
    F = lambda rho: mp.besselk(n, k * rho) - dk / di * mp.besseli(n, k * rho)
    assert abs(second_radial_derivative(n, complex(k)) - complex(mp.diff(F, 1, 2))) < 1e-9


def test_q_function_is_ratio_derivative():
    om = mp.mpc(3j)
    ratio = lambda w: (mp.diff(lambda t: mp.besselk(1, t), mp.sqrt(w))
                       / mp.diff(lambda t: mp.besseli(1, t), mp.sqrt(w)))
    ref = complex(mp.diff(ratio, om))
    assert abs(q_function(np.sqrt(3j)) - ref) < 1e-9 * abs(ref)


def test_backend_agrees_with_closed_forms():
    sig, mu = 1e-3, 3j
    P = PerturbationSpec(sig, [0, 0, 1.0], [0, 0, 0.5]).to_domain()
    dH, dF, dHm = perturbed_disk_corrections(sig, 1.0, 0.5, mu)
    np.testing.assert_allclose(P.neumann_self([0, 0]).hessian - Disk().neumann_self([0, 0]).hessian,
                               dH, atol=1e-10)
    h, d = P.helmholtz_self(mu, [0, 0]), Disk().helmholtz_self(mu, [0, 0])
    np.testing.assert_allclose(h.grad_source_of_grad - d.grad_source_of_grad, dF, atol=1e-10)
    np.testing.assert_allclose(h.hessian - d.hessian, dHm, atol=1e-10)


def test_prediction_matches_pipeline_slope():
    sig, S = 0.01, 4.0
    spec = PerturbationSpec(sig, [0, 0, 1.0])
    P = spec.to_domain()
    p = SchnakenbergParams.from_strength(EPS, S, 1, P.area)
    roots = find_roots(P, SpotConfiguration(np.zeros((1, 2)), np.array([S])), p)
    res = predict(spec, S, p)
    slopes = sorted((r.tau_hat - res.tau0_hat) / sig for r in roots)
    pred = sorted(b.tau1_hat for b in res.branches)
    np.testing.assert_allclose(slopes, pred, rtol=0.03)


@pytest.mark.parametrize("S", [2.0, 3.0, 4.0])
def test_constant_is_strength_free(S):
    p = SchnakenbergParams.from_strength(EPS, S, 1, np.pi)
    ref = predict(PerturbationSpec(0.1, [0, 0, 1.0]), 4.0, SchnakenbergParams.from_strength(EPS, 4.0, 1, np.pi))
    res = predict(PerturbationSpec(0.1, [0, 0, 1.0]), S, p)
    assert res.constant == pytest.approx(ref.constant, rel=1e-9)
    assert res.coefficient == pytest.approx(S * res.constant, rel=1e-12)


@given(st.floats(0, 2 * np.pi))
@settings(max_examples=10)
def test_rotation_covariance(phi):
    p = SchnakenbergParams.from_strength(EPS, 4.0, 1, np.pi)
    base = predict(PerturbationSpec(0.1, [0, 0, 1.0]), 4.0, p)
    res = predict(PerturbationSpec(0.1, [0, 0, np.cos(phi)], [0, 0, np.sin(phi)]), 4.0, p)
    assert res.dominant.tau1_hat == pytest.approx(base.dominant.tau1_hat, rel=1e-12)
    axis = res.branches[0].axis
    assert abs(abs(axis @ [np.cos(phi / 2), np.sin(phi / 2)]) - 1) < 1e-12


def test_without_mode_two_nothing_changes():
    p = SchnakenbergParams.from_strength(EPS, 4.0, 1, np.pi)
    res = predict(PerturbationSpec(0.1, [0, 0.5, 0, 0.3]), 4.0, p)
    assert res.leading_order_unchanged
    assert all(b.tau1_hat == 0 for b in res.branches)
    assert res.notes


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_fourier_mode2_recovers_coefficients(a2, b2):
    th = 2 * np.pi * np.arange(128) / 128
    f = 0.3 + 0.2 * np.cos(th) + a2 * np.cos(2 * th) + b2 * np.sin(2 * th) + 0.1 * np.sin(3 * th)
    a, b, phi = fourier_mode2(f)
    assert a == pytest.approx(a2, abs=1e-12) and b == pytest.approx(b2, abs=1e-12)
    if np.hypot(a2, b2) > 1e-10:
        assert np.cos(phi) == pytest.approx(a2 / np.hypot(a2, b2), abs=1e-9)


def test_fourier_mode2_edge_cases():
    th = 2 * np.pi * np.arange(64) / 64
    assert fourier_mode2(np.cos(3 * th))[2] is None
    with pytest.raises(ValueError):
        fourier_mode2(np.ones(10))


def test_from_function_round_trip():
    spec = PerturbationSpec.from_function(0.1, lambda t: np.cos(2 * t) - 0.5 * np.sin(2 * t))
    assert spec.a2 == pytest.approx(1.0) and spec.b2 == pytest.approx(-0.5)


def test_sigma_validated():
    with pytest.raises(ValueError):
        PerturbationSpec(0.0, [0, 0, 1])
