import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spothopf.special import (BesselDomainError, bessel_i, bessel_i_seq, bessel_k, bessel_k_seq,
                              bessel_pair, i_derivs, k_derivs)

mpmath.mp.dps = 30

POINTS = [0.01, 0.3 + 0.2j, 1.0, 2.5 - 1.0j, 5.0 + 5.0j, 0.7 + 12.0j, 18.0 - 3.0j, 40.0 + 30.0j,
          np.sqrt(3.026j), 1e-3j + 0.5]


# -- oracle: mpmath ----------------------------------------------------------

@pytest.mark.parametrize("z", POINTS)
@pytest.mark.parametrize("n", [0, 1, 2, 5])
def test_i_matches_mpmath(n, z):
    ref = complex(mpmath.besseli(n, z))
    assert abs(bessel_i(n, z) - ref) <= 1e-13 * abs(ref)


@pytest.mark.parametrize("z", POINTS)
@pytest.mark.parametrize("n", [0, 1, 2, 5])
def test_k_matches_mpmath(n, z):
    ref = complex(mpmath.besselk(n, z))
    assert abs(bessel_k(n, z) - ref) <= 1e-13 * abs(ref)


@pytest.mark.parametrize("z", [0.4 + 0.3j, 2.0, 7.0 - 4.0j])
def test_derivatives_match_mpmath(z):
    fi, di, ddi = i_derivs(3, z)
    fk, dk, ddk = k_derivs(3, z)
    for n in range(4):
        assert abs(di[n] - complex(mpmath.besseli(n, z, derivative=1))) < 1e-12 * abs(di[n])
        assert abs(dk[n] - complex(mpmath.diff(lambda t: mpmath.besselk(n, t), z))) < 1e-10 * abs(dk[n])
        assert abs(ddi[n] - complex(mpmath.besseli(n, z, derivative=2))) < 1e-11 * abs(ddi[n])


def test_sequences_consistent():
    z = 3.0 + 1.0j
    i = bessel_i_seq(6, z)
    k = bessel_k_seq(6, z)
    for n in range(7):
        assert i[n] == pytest.approx(bessel_i(n, z), rel=1e-15)
        assert k[n] == pytest.approx(bessel_k(n, z), rel=1e-15)


# -- properties ---------------------------------------------------------------

@given(st.floats(0.02, 30.0), st.floats(-30.0, 30.0), st.integers(0, 6))
def test_wronskian(x, y, n):
    z = complex(x, y)
    b = bessel_pair(n, z)
    assert abs(b.wronskian() * z + 1.0) < 1e-12


@given(st.floats(0.05, 20.0), st.floats(-20.0, 20.0))
def test_recurrence(x, y):
    z = complex(x, y)
    i = bessel_i_seq(4, z)
    k = bessel_k_seq(4, z)
    for n in range(1, 4):
        assert abs(i[n - 1] - i[n + 1] - 2 * n / z * i[n]) <= 1e-12 * max(abs(i[n - 1]), 1e-300)
        assert abs(k[n + 1] - k[n - 1] - 2 * n / z * k[n]) <= 1e-12 * abs(k[n + 1])


@given(st.floats(0.05, 20.0), st.floats(-20.0, 20.0))
def test_conjugate_symmetry(x, y):
    z = complex(x, y)
    assert bessel_k(1, np.conj(z)) == pytest.approx(np.conj(bessel_k(1, z)), rel=1e-13)
    assert bessel_i(1, np.conj(z)) == pytest.approx(np.conj(bessel_i(1, z)), rel=1e-13)


def test_negative_real_axis_rejected():
    with pytest.raises(BesselDomainError):
        bessel_k(0, -1.0 + 0.0j)
