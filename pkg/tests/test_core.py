import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_bvp

from spothopf.core import (CoreTable, StrengthRangeError, compute_k_integrals, core_data,
                           solve_adjoint, solve_core)


def _bvp_chi(S, R, guess):
    """Independent collocation solve of the core problem; returns chi."""
    sing = np.diag([0.0, -1.0, 0.0, -1.0])

    def f(r, y):
        v, dv, u, du = y
        return np.vstack([dv, v - u * v * v, du, u * v * v])

    def bc(ya, yb):
        return np.array([ya[1], ya[3], yb[0], yb[3] - S / R])

    r = np.linspace(0.0, R, 801)
    y0 = np.vstack([np.interp(r, guess.grid, guess.v0), np.gradient(np.interp(r, guess.grid, guess.v0), r),
                    np.interp(r, guess.grid, guess.u0), np.gradient(np.interp(r, guess.grid, guess.u0), r)])
    sol = solve_bvp(f, bc, r, y0, S=sing, tol=1e-9, max_nodes=200000)
    assert sol.success
    return sol.sol(R)[2] - S * np.log(R)


# -- oracles ------------------------------------------------------------------

@pytest.mark.parametrize("S", [2.0, 3.0, 4.0])
def test_chi_matches_collocation(S):
    core = solve_core(S, R_max=25.0)
    chi_ref = _bvp_chi(S, 25.0, core)
    assert core.chi == pytest.approx(chi_ref, abs=2e-5)


def test_chi_prime_matches_difference_quotient():
    h = 1e-3
    fd = (solve_core(3.0 + h).chi - solve_core(3.0 - h).chi) / (2 * h)
    assert solve_core(3.0).chi_prime == pytest.approx(fd, abs=1e-5)


def test_truncation_radius_converged():
    assert abs(solve_core(3.0, R_max=25.0).chi - solve_core(3.0, R_max=40.0, n_points=8001).chi) < 1e-5


def test_k1_negative_at_four():
    assert core_data(4.0).k1 < 0


# -- invariants -----------------------------------------------------------------

@pytest.mark.parametrize("S", [0.5, 1.0, 2.0, 3.0, 4.0, 4.3])
def test_divergence_identity(S):
    assert solve_core(S).divergence_defect() < 1e-6


@pytest.mark.parametrize("S", [1.0, 3.0, 4.3])
def test_profile_invariants(S):
    core = solve_core(S)
    assert np.all(core.v0[:-1] > 0)
    assert core.v0[-1] < 1e-8 * core.v0.max()
    R = core.grid[-1]
    window = core.grid > 0.8 * R
    far = core.u0[window] - S * np.log(core.grid[window]) - core.chi
    assert np.max(np.abs(far)) < 1e-6


def test_amplitude_monotone_in_strength():
    peaks = [solve_core(S).v0.max() for S in (0.5, 1.0, 2.0)]
    assert peaks[0] < peaks[1] < peaks[2]


def test_adjoint_normalisation():
    adj = solve_adjoint(solve_core(3.0))
    assert adj.p1[0] == 0.0 and adj.p2[0] == 0.0
    assert abs(adj.grid[-1] * adj.p2[-1] - 1.0) < 1e-6


def test_mesh_refinement_profiles():
    a = solve_core(3.0, n_points=6001)
    b = solve_core(3.0, n_points=12001)
    assert np.max(np.abs(np.interp(a.grid, b.grid, b.v0) - a.v0)) < 1e-4


def test_quadrature_rules_agree():
    core = solve_core(3.0)
    adj = solve_adjoint(core)
    s = compute_k_integrals(core, adj, "simpson")
    t = compute_k_integrals(core, adj, "trap")
    assert t.k1 == pytest.approx(s.k1, rel=1e-5)
    assert t.k2 == pytest.approx(s.k2, rel=1e-5)


def test_continuity_in_strength():
    assert abs(core_data(3.0).k1 - core_data(3.01).k1) < 0.05


def test_table_interpolates(tmp_path, monkeypatch):
    monkeypatch.setenv("SPOTHOPF_CACHE", str(tmp_path))
    table = CoreTable(cache=False)
    for S in (1.3, 2.7, 3.9):
        assert float(table.chi(S)) == pytest.approx(core_data(S).chi, abs=1e-4)


@given(st.floats(-5.0, 0.0) | st.floats(4.31, 10.0))
def test_strength_range_rejected(S):
    with pytest.raises(StrengthRangeError):
        solve_core(S)
