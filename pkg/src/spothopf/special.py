r"""Modified Bessel functions :math:`I_n(z)`, :math:`K_n(z)` of integer order
and complex argument in the right half plane.

Every Helmholtz Green's function in the package is built from these, with
arguments of the form :math:`\sqrt{\mu}\,r` where :math:`\mu = i\omega_I`.

Algorithms
----------
* :math:`K_0, K_1` -- ascending series (with the logarithm and Euler's
  constant) for :math:`|z| \le 2`; Steed's evaluation of Temme's continued
  fraction for :math:`2 < |z| \le 25`; Hankel asymptotic expansion beyond.
  Higher orders by upward recurrence, which is stable for :math:`K`.
* :math:`I_n` -- ratios :math:`I_n/I_0` by Miller's downward recurrence,
  normalised with :math:`I_0` from its power series for :math:`|z| \le 2`
  and from the Wronskian :math:`I_0K_1 + I_1K_0 = 1/z` otherwise.

All routines are vectorised over ``z`` and return complex arrays.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

EULER_GAMMA = 0.57721566490153286061

SERIES_RADIUS = 2.0
ASYMPTOTIC_RADIUS = 25.0
MAX_SERIES_TERMS = 200
SERIES_RTOL = 1e-17
DEFAULT_ARG_CAP = 700.0


class BesselDomainError(ValueError):
    """Argument outside the supported region (``Re z < 0`` or bad order)."""


class BesselUnderflowWarning(RuntimeWarning):
    """K_n flushed to zero because ``Re z`` exceeded the decay cap."""


def _as_complex(z):
    return np.asarray(z, dtype=complex)


def _check_args(z, cap):
    if np.any(z.real < 0):
        raise BesselDomainError("modified Bessel routines require Re z >= 0")
    if np.any(np.abs(z) > cap):
        raise OverflowError(f"|z| exceeds configured cap {cap}")


# ---------------------------------------------------------------------------
# K_0, K_1
# ---------------------------------------------------------------------------

def _k01_series(z):
    """Ascending series for K_0 and K_1 (A&S 9.6.13 / 9.6.11)."""
    q = 0.25 * z * z
    lg = np.log(0.5 * z)
    term0 = np.ones_like(z)          # (z^2/4)^k / (k!)^2
    term1 = 0.5 * z                  # (z/2) (z^2/4)^k / (k!(k+1)!)
    i0 = term0.copy()
    i1 = term1.copy()
    harm = 0.0                       # H_k
    s0 = np.zeros_like(z)            # sum H_k term0_k
    # psi(k+1) + psi(k+2) = 2 H_k + 1/(k+1) - 2 gamma
    s1 = (1.0 - 2.0 * EULER_GAMMA) * term1
    for k in range(1, MAX_SERIES_TERMS):
        term0 = term0 * q / (k * k)
        term1 = term1 * q / (k * (k + 1))
        harm += 1.0 / k
        i0 = i0 + term0
        i1 = i1 + term1
        s0 = s0 + harm * term0
        s1 = s1 + (2.0 * harm + 1.0 / (k + 1) - 2.0 * EULER_GAMMA) * term1
        if np.all(np.abs(term0) <= SERIES_RTOL * np.abs(i0)):
            break
    k0 = -(lg + EULER_GAMMA) * i0 + s0
    k1 = 1.0 / z + lg * i1 - 0.5 * s1
    return k0, k1


def _k01_steed(z, maxit=2000, eps=1e-16):
    """Temme's CF2 evaluated by Steed's algorithm (order 0 and 1)."""
    b = 2.0 * (1.0 + z)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(z)
    q2 = np.ones_like(z)
    a1 = 0.25
    q = np.full_like(z, a1)
    c = np.full_like(z, a1)
    a = -a1
    s = 1.0 + q * delh
    done = np.zeros(z.shape, dtype=bool)
    for i in range(2, maxit):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + np.where(done, 0.0, delh)
        dels = q * delh
        s = s + np.where(done, 0.0, dels)
        done |= np.abs(dels) < eps * np.abs(s)
        if done.all():
            break
    h = a1 * h
    k0 = np.sqrt(np.pi / (2.0 * z)) * np.exp(-z) / s
    k1 = k0 * (z + 0.5 - h) / z
    return k0, k1


def _hankel_coeffs(nu, kmax):
    """a_k(nu) of the Hankel expansions, k = 0..kmax."""
    m = 4.0 * nu * nu
    out = [1.0]
    for k in range(1, kmax + 1):
        out.append(out[-1] * (m - (2 * k - 1) ** 2) / (k * 8.0))
    return np.array(out)


def _k01_asymptotic(z, kmax=40):
    pre = np.sqrt(np.pi / (2.0 * z)) * np.exp(-z)
    res = []
    for nu in (0, 1):
        ak = _hankel_coeffs(nu, kmax)
        acc = np.zeros_like(z)
        zk = np.ones_like(z)
        prev = np.full(z.shape, np.inf)
        live = np.ones(z.shape, dtype=bool)
        for k in range(kmax + 1):
            t = ak[k] * zk
            # stop at the smallest term (optimal truncation)
            live &= np.abs(t) <= prev
            acc = acc + np.where(live, t, 0.0)
            prev = np.abs(t)
            zk = zk / z
        res.append(pre * acc)
    return res[0], res[1]


def _k01(z):
    k0 = np.empty_like(z)
    k1 = np.empty_like(z)
    az = np.abs(z)
    small = az <= SERIES_RADIUS
    large = az > ASYMPTOTIC_RADIUS
    mid = ~small & ~large
    if small.any():
        k0[small], k1[small] = _k01_series(z[small])
    if mid.any():
        k0[mid], k1[mid] = _k01_steed(z[mid])
    if large.any():
        k0[large], k1[large] = _k01_asymptotic(z[large])
    return k0, k1


# ---------------------------------------------------------------------------
# I_n
# ---------------------------------------------------------------------------

def _i0_series(z):
    q = 0.25 * z * z
    term = np.ones_like(z)
    acc = term.copy()
    for k in range(1, MAX_SERIES_TERMS):
        term = term * q / (k * k)
        acc = acc + term
        if np.all(np.abs(term) <= SERIES_RTOL * np.abs(acc)):
            break
    return acc


def _miller_ratios(z, nmax):
    """I_n(z)/I_0(z) for n = 0..max(nmax, 1) by downward recurrence."""
    top = max(nmax, 1)
    zmax = float(np.max(np.abs(z))) if z.size else 0.0
    start = int(max(top, zmax) + 30 + 6 * np.sqrt(max(top, zmax) + 1)) + 10
    out = np.zeros((top + 1,) + z.shape, dtype=complex)
    nxt = np.zeros_like(z)                 # I_{n+1}
    cur = np.full(z.shape, 1e-30, dtype=complex)   # I_n
    inv = 1.0 / z
    for n in range(start, 0, -1):
        prv = nxt + 2.0 * n * inv * cur   # I_{n-1}
        nxt, cur = cur, prv
        if n - 1 <= top:
            out[n - 1] = cur
        big = np.abs(cur) > 1e200
        if big.any():
            cur = np.where(big, cur * 1e-200, cur)
            nxt = np.where(big, nxt * 1e-200, nxt)
            out[:, big] *= 1e-200
    return out / out[0]


def _i_seq_nonzero(z, nmax, k01=None):
    ratios = _miller_ratios(z, nmax)
    i0 = np.empty_like(z)
    small = np.abs(z) <= SERIES_RADIUS
    if small.any():
        i0[small] = _i0_series(z[small])
    if (~small).any():
        zz = z[~small]
        if k01 is None:
            k0, k1 = _k01(zz)
        else:
            k0, k1 = k01[0][~small], k01[1][~small]
        i0[~small] = 1.0 / (zz * (k1 + ratios[1][~small] * k0))
    return ratios[: nmax + 1] * i0


def bessel_i_seq(nmax, z, cap=DEFAULT_ARG_CAP):
    """Return ``I_n(z)`` for ``n = 0..nmax``, shape ``(nmax+1,) + z.shape``."""
    if nmax < 0:
        raise BesselDomainError("order must be non-negative")
    z = _as_complex(z)
    _check_args(z, cap)
    shape = z.shape
    zf = z.ravel()
    out = np.zeros((nmax + 1, zf.size), dtype=complex)
    tiny = np.abs(zf) < 1e-8
    if tiny.any():
        # two-term power series; the downward recurrence overflows near zero
        h = 0.5 * zf[tiny]
        fact = 1.0
        for n in range(nmax + 1):
            fact *= max(n, 1)
            with np.errstate(under="ignore"):
                out[n, tiny] = h**n / fact * (1.0 + h * h / (n + 1))
    if (~tiny).any():
        out[:, ~tiny] = _i_seq_nonzero(zf[~tiny], nmax)
    return out.reshape((nmax + 1,) + shape)


def bessel_k_seq(nmax, z, cap=DEFAULT_ARG_CAP):
    """Return ``K_n(z)`` for ``n = 0..nmax``, shape ``(nmax+1,) + z.shape``."""
    if nmax < 0:
        raise BesselDomainError("order must be non-negative")
    z = _as_complex(z)
    _check_args(z, cap)
    if np.any(z == 0):
        raise BesselDomainError("K_n is singular at z = 0")
    shape = z.shape
    zf = z.ravel()
    out = np.zeros((max(nmax, 1) + 1, zf.size), dtype=complex)
    under = zf.real > cap
    if under.any():
        warnings.warn("K_n flushed to zero (Re z beyond decay cap)",
                      BesselUnderflowWarning, stacklevel=2)
    ok = ~under
    k0, k1 = _k01(zf[ok])
    out[0, ok] = k0
    out[1, ok] = k1
    inv = 1.0 / zf[ok]
    for n in range(1, nmax):
        out[n + 1, ok] = out[n - 1, ok] + 2.0 * n * inv * out[n, ok]
    return out[: nmax + 1].reshape((nmax + 1,) + shape)


def bessel_ik_seq(nmax, z, cap=DEFAULT_ARG_CAP):
    """Both sequences at once, sharing the K_0/K_1 evaluation."""
    z = _as_complex(z)
    _check_args(z, cap)
    kk = bessel_k_seq(nmax, z, cap)
    shape = z.shape
    zf = z.ravel()
    ii = _i_seq_nonzero(zf, nmax, (kk[0].ravel(), kk[1].ravel()))
    return ii.reshape((nmax + 1,) + shape), kk


def bessel_i(n, z, cap=DEFAULT_ARG_CAP):
    """Modified Bessel function of the first kind, integer order ``n``."""
    n = abs(int(n))
    return bessel_i_seq(n, z, cap)[n]


def bessel_k(n, z, cap=DEFAULT_ARG_CAP):
    """Modified Bessel function of the second kind, integer order ``n``."""
    n = abs(int(n))
    return bessel_k_seq(n, z, cap)[n]


def i_derivs(nmax, z):
    """``(I_n, I_n', I_n'')`` for n = 0..nmax."""
    z = _as_complex(z)
    ii = bessel_i_seq(nmax + 1, z)
    lower = np.concatenate([ii[1:2], ii[:nmax]])
    d1 = 0.5 * (lower + ii[1 : nmax + 2])
    f = ii[: nmax + 1]
    n2 = (np.arange(nmax + 1) ** 2).reshape((-1,) + (1,) * z.ndim)
    d2 = (1.0 + n2 / z**2) * f - d1 / z
    return f, d1, d2


def k_derivs(nmax, z):
    """``(K_n, K_n', K_n'')`` for n = 0..nmax."""
    z = _as_complex(z)
    kk = bessel_k_seq(nmax + 1, z)
    lower = np.concatenate([kk[1:2], kk[:nmax]])
    d1 = -0.5 * (lower + kk[1 : nmax + 2])
    f = kk[: nmax + 1]
    n2 = (np.arange(nmax + 1) ** 2).reshape((-1,) + (1,) * z.ndim)
    d2 = (1.0 + n2 / z**2) * f - d1 / z
    return f, d1, d2


@dataclass(frozen=True)
class BesselPair:
    order: int
    argument: complex
    i_val: complex
    k_val: complex
    i_deriv: complex
    k_deriv: complex

    def wronskian(self) -> complex:
        return self.i_val * self.k_deriv - self.i_deriv * self.k_val


def bessel_pair(n: int, z: complex) -> BesselPair:
    """Values and first derivatives of I_n and K_n at a single point."""
    fi, di, _ = i_derivs(n, z)
    fk, dk, _ = k_derivs(n, z)
    return BesselPair(n, complex(z), complex(fi[n]), complex(fk[n]),
                      complex(di[n]), complex(dk[n]))


def i_ratio_seq(nmax, z):
    """Ratios ``I_{m+1}(z)/I_m(z)`` for ``m = 0..nmax`` (zero at ``z = 0``).

    Evaluated by the backward continued-fraction recurrence, which never
    over- or underflows; used where individual I_n would leave double range.
    """
    z = _as_complex(z)
    shape = z.shape
    z = z.ravel()
    out = np.zeros((nmax + 1, z.size), dtype=complex)
    nz = np.abs(z) >= 1e-8
    if (~nz).any():
        h = 0.5 * z[~nz]
        m = np.arange(nmax + 1)[:, None] + 1.0
        out[:, ~nz] = h / m * (1.0 - h * h / (m * (m + 1.0)))
    if not nz.any():
        return out.reshape((nmax + 1,) + shape)
    zz = z[nz]
    start = int(nmax + 30 + 2 * np.max(np.abs(zz)) + 6 * np.sqrt(nmax + 1))
    r = np.zeros_like(zz)
    inv = 1.0 / zz
    for m in range(start, 0, -1):
        r = 1.0 / (2.0 * m * inv + r)      # r_{m-1}
        if m - 1 <= nmax:
            out[m - 1, nz] = r
    return out.reshape((nmax + 1,) + shape)


def k_ratio_seq(nmax, z):
    """Ratios ``K_{m+1}(z)/K_m(z)`` for ``m = 0..nmax`` (upward, stable)."""
    z = _as_complex(z)
    k0, k1 = _k01(z.ravel())
    q = (k1 / k0).reshape(z.shape)
    out = np.empty((nmax + 1,) + z.shape, dtype=complex)
    out[0] = q
    inv = 1.0 / z
    for m in range(1, nmax + 1):
        q = 1.0 / q + 2.0 * m * inv
        out[m] = q
    return out
