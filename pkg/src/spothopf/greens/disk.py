r"""Disk and half-disk backends.

Neumann: closed form on the disk of radius ``a``,

.. math::

    G = \frac{1}{2\pi}\Big[-\log|x-\xi| - \log\big|\,|\xi|x/a - a\xi/|\xi|\,\big|
        + \frac{|x|^2+|\xi|^2}{2a^2} - \frac34\Big] .

Helmholtz: the regular part has the separable expansion

.. math::

    W_\mu(x;\xi) = -\frac{1}{2\pi}\sum_{n\in\mathbb{Z}} \frac{K_n'(k)}{I_n'(k)}
        I_n(k\rho)e^{in\theta}\, I_n(k\rho_0)e^{-in\theta_0}, \qquad k=\sqrt{\mu},

and derivatives follow from :math:`(\partial_x \pm i\partial_y)\,I_n(k\rho)e^{in\theta}
= k\,I_{n\pm1}(k\rho)e^{i(n\pm1)\theta}`.  All Bessel factors are carried as
ratios so that no individual :math:`I_n` or :math:`K_n` leaves double range.
"""

from __future__ import annotations

import functools

import numpy as np

from ..special import bessel_i_seq, bessel_k_seq, i_ratio_seq, k_ratio_seq
from .base import (TWO_PI, GreensDomain, GreensError, free_helmholtz_many,
                   sqrt_mu)

SERIES_TOL = 1e-17
MAX_ORDER = 1500

# shift stencils of d/dx, d/dy, ... acting on the index of I_n e^{in theta}
# (coefficients are multiplied by k or k^2)
_OPS = {
    "": ({0: 1.0}, 0),
    "x": ({1: 0.5, -1: 0.5}, 1),
    "y": ({1: -0.5j, -1: 0.5j}, 1),
    "xx": ({2: 0.25, 0: 0.5, -2: 0.25}, 2),
    "yy": ({2: -0.25, 0: 0.5, -2: -0.25}, 2),
    "xy": ({2: -0.25j, -2: 0.25j}, 2),
}


@functools.lru_cache(maxsize=256)
def _radial_coefficients(mu: complex, order: int):
    """``beta_n = K_n'(k) I_n(k)^2 / I_n'(k)`` and ratios ``I_{n+1}(k)/I_n(k)``."""
    k = sqrt_mu(mu)
    top = order + 3
    r = i_ratio_seq(top, k)
    q = k_ratio_seq(top, k)
    p0 = complex(bessel_k_seq(0, k)[0] * bessel_i_seq(0, k)[0])
    p = np.empty(top + 1, dtype=complex)
    p[0] = p0
    for n in range(top):
        p[n + 1] = p[n] * q[n] * r[n]
    kap = np.empty(top, dtype=complex)
    iot = np.empty(top, dtype=complex)
    kap[0] = -q[0]
    iot[0] = r[0]
    n = np.arange(1, top)
    kap[1:] = -0.5 * (1.0 / q[n - 1] + q[n])
    iot[1:] = 0.5 * (1.0 / r[n - 1] + r[n])
    beta = p[:top] * kap / iot
    return beta, r


def _order_for(rr, order=None):
    if order is not None:
        return int(order)
    rr = float(rr)
    if rr <= 1e-12:
        return 8
    if rr >= 1.0:
        raise GreensError("disk series requires |x||xi| < a^2")
    m = int(np.ceil(np.log(SERIES_TOL) / np.log(rr))) + 6
    if m > MAX_ORDER:
        raise GreensError(f"disk series needs {m} terms (tail bound {rr ** MAX_ORDER:.2e})")
    return max(m, 12)


def _scaled_modes(k, pts, top):
    """``t_n(rho) = I_n(k rho)/I_n(k)`` for n = 0..top and the angles."""
    rho = np.hypot(pts[:, 0], pts[:, 1])
    th = np.arctan2(pts[:, 1], pts[:, 0])
    z = k * rho
    rz = i_ratio_seq(top, z)                     # (top+1, m)
    rk = i_ratio_seq(top, k)
    i0z = bessel_i_seq(0, z)[0]
    i0k = bessel_i_seq(0, k)[0]
    t = np.empty((top + 1, len(pts)), dtype=complex)
    t[0] = i0z / i0k
    for n in range(top):
        t[n + 1] = t[n] * rz[n] / rk[n]
    return t, th


def _adjacent_ratio(r, a, n):
    """``I_|a|(k) / I_|n|(k)`` for ``||a| - |n|| <= 2``."""
    aa, nn = np.abs(a), np.abs(n)
    d = aa - nn
    out = np.ones(a.shape, dtype=complex)
    up1 = d == 1
    up2 = d == 2
    dn1 = d == -1
    dn2 = d == -2
    out[up1] = r[nn[up1]]
    out[up2] = r[nn[up2]] * r[nn[up2] + 1]
    out[dn1] = 1.0 / r[nn[dn1] - 1]
    out[dn2] = 1.0 / (r[nn[dn2] - 1] * r[nn[dn2] - 2])
    return out


def _factor(op, k, t, th, r, nidx, sign):
    """``sum_s c_s I_|sn+s|/I_|n| t_|sn+s| e^{i(sn+s)theta}`` for each point and n."""
    stencil, power = _OPS[op]
    acc = np.zeros((t.shape[1], nidx.size), dtype=complex)
    for s, c in stencil.items():
        a = sign * nidx + s
        ratio = _adjacent_ratio(r, a, nidx)
        modes = t[np.abs(a)].T * np.exp(1j * np.outer(th, a))
        acc += c * ratio[None, :] * modes
    return acc * k**power


def disk_helmholtz_regular_pairs(mu, X, XI, order=None):
    """Regular part of ``G_mu`` on the unit disk for all pairs (see module doc)."""
    X = np.atleast_2d(np.asarray(X, float))
    XI = np.atleast_2d(np.asarray(XI, float))
    k = sqrt_mu(mu)
    rmax = np.max(np.hypot(X[:, 0], X[:, 1])) * np.max(np.hypot(XI[:, 0], XI[:, 1]))
    M = _order_for(rmax, order)
    beta, r = _radial_coefficients(complex(mu), M)
    nidx = np.arange(-M, M + 1)
    bn = beta[np.abs(nidx)] * (-1.0 / TWO_PI)
    tx, thx = _scaled_modes(k, X, M + 2)
    txi, thxi = _scaled_modes(k, XI, M + 2)
    fx = {op: _factor(op, k, tx, thx, r, nidx, 1) for op in ("", "x", "y", "xx", "xy", "yy")}
    fxi = {op: _factor(op, k, txi, thxi, r, nidx, -1) for op in ("", "x", "y")}

    def pair(a, b):
        return np.einsum("jn,in,n->ji", a, b, bn)

    m, n = len(X), len(XI)
    value = pair(fx[""], fxi[""])
    dx = np.stack([pair(fx["x"], fxi[""]), pair(fx["y"], fxi[""])], axis=-1)
    dxi = np.stack([pair(fx[""], fxi["x"]), pair(fx[""], fxi["y"])], axis=-1)
    dxx = np.empty((m, n, 2, 2), dtype=complex)
    dxx[..., 0, 0] = pair(fx["xx"], fxi[""])
    dxx[..., 1, 1] = pair(fx["yy"], fxi[""])
    dxx[..., 0, 1] = dxx[..., 1, 0] = pair(fx["xy"], fxi[""])
    dxidx = np.empty((m, n, 2, 2), dtype=complex)
    for l, ol in enumerate(("x", "y")):
        for kk, ok in enumerate(("x", "y")):
            dxidx[..., l, kk] = pair(fx[ok], fxi[ol])
    return value, dx, dxi, dxx, dxidx


def disk_neumann_regular_pairs(X, XI):
    """Closed-form regular part of the unit-disk Neumann function."""
    X = np.atleast_2d(np.asarray(X, float))
    XI = np.atleast_2d(np.asarray(XI, float))
    xi2 = np.sum(XI**2, axis=1)[None, :]                       # (1, n)
    x2 = np.sum(X**2, axis=1)[:, None]
    dot = X @ XI.T
    q = xi2 * x2 - 2.0 * dot + 1.0                              # (m, n)
    gq = 2.0 * xi2[..., None] * X[:, None, :] - 2.0 * XI[None, :, :]
    value = (-0.5 * np.log(q) + 0.5 * (x2 + xi2) - 0.75) / TWO_PI
    dx = (-gq / (2.0 * q[..., None]) + X[:, None, :]) / TWO_PI
    eye = np.eye(2)[None, None]
    dxx = (-(2.0 * xi2[..., None, None] * eye) / (2.0 * q[..., None, None])
           + gq[..., :, None] * gq[..., None, :] / (2.0 * q[..., None, None] ** 2)
           + eye) / TWO_PI
    return value, dx, dxx


class Disk(GreensDomain):
    """Disk of radius ``radius`` centred at the origin."""

    kind = "disk"

    def __init__(self, radius: float = 1.0, order: int | None = None):
        self.radius = float(radius)
        self.area = np.pi * self.radius**2
        self.order = order

    def contains(self, x):
        return float(np.hypot(*x)) < self.radius

    def boundary_distance(self, x):
        return self.radius - float(np.hypot(*x))

    def neumann_regular_pairs(self, X, XI):
        a = self.radius
        v, dx, dxx = disk_neumann_regular_pairs(np.asarray(X) / a, np.asarray(XI) / a)
        return v + np.log(a) / TWO_PI, dx / a, dxx / a**2

    def helmholtz_regular_pairs(self, mu, X, XI):
        a = self.radius
        v, dx, dxi, dxx, dxidx = disk_helmholtz_regular_pairs(
            complex(mu) * a * a, np.asarray(X) / a, np.asarray(XI) / a, self.order)
        return v, dx / a, dxi / a, dxx / a**2, dxidx / a**2

    def describe(self):
        return {"kind": self.kind, "radius": self.radius, "area": self.area}


class ReflectedDomain(GreensDomain):
    """Domain cut from ``base`` by a symmetry line, handled by one image.

    ``G(x; xi) = G_base(x; xi) + G_base(x; P xi)`` with ``P`` the reflection
    across the cutting line through the origin.
    """

    def __init__(self, base: GreensDomain, reflection: np.ndarray, side, area: float):
        self.base = base
        self.P = np.asarray(reflection, float)
        self._side = side
        self.area = area

    def contains(self, x):
        return self.base.contains(x) and self._side(np.asarray(x, float)) > 0

    def boundary_distance(self, x):
        return min(self.base.boundary_distance(x), self._side(np.asarray(x, float)))

    def neumann_regular_pairs(self, X, XI):
        X = np.atleast_2d(np.asarray(X, float))
        XI = np.atleast_2d(np.asarray(XI, float))
        v, dx, dxx = self.base.neumann_regular_pairs(X, XI)
        img = XI @ self.P.T
        vi, dxi_, dxxi = self.base.neumann_regular_pairs(X, img)
        d = X[:, None, :] - img[None, :, :]
        r2 = np.sum(d**2, axis=-1)
        fv = -0.5 * np.log(r2) / TWO_PI
        fg = -d / (TWO_PI * r2[..., None])
        eye = np.eye(2)[None, None]
        fh = -(eye / r2[..., None, None] - 2.0 * d[..., :, None] * d[..., None, :] / r2[..., None, None] ** 2) / TWO_PI
        return v + vi + fv, dx + dxi_ + fg, dxx + dxxi + fh

    def helmholtz_regular_pairs(self, mu, X, XI):
        X = np.atleast_2d(np.asarray(X, float))
        XI = np.atleast_2d(np.asarray(XI, float))
        w = self.base.helmholtz_regular_pairs(mu, X, XI)
        img = XI @ self.P.T
        v, dx, dxi, dxx, dxidx = self.base.helmholtz_regular_pairs(mu, X, img)
        m, n = len(X), len(XI)
        d = (X[:, None, :] - img[None, :, :]).reshape(-1, 2)
        fv, fg, fh = free_helmholtz_many(mu, d)
        fv = fv.reshape(m, n)
        fg = fg.reshape(m, n, 2)
        fh = fh.reshape(m, n, 2, 2)
        P = self.P
        gv = v + fv
        gdx = dx + fg
        gdxx = dxx + fh
        # derivatives with respect to the image source, then chain rule xi' = P xi
        gdxi = np.einsum("lm,jim->jil", P, dxi - fg)
        gdxidx = np.einsum("lm,jimk->jilk", P, dxidx - fh)
        return (w[0] + gv, w[1] + gdx, w[2] + gdxi, w[3] + gdxx, w[4] + gdxidx)


class HalfDisk(ReflectedDomain):
    """Upper half of the disk of radius ``radius``: ``{|x| < a, x_2 > 0}``."""

    kind = "half_disk"

    def __init__(self, radius: float = 1.0, order: int | None = None):
        super().__init__(Disk(radius, order), np.diag([1.0, -1.0]),
                         lambda x: float(x[1]), 0.5 * np.pi * radius**2)
        self.radius = float(radius)

    def describe(self):
        return {"kind": self.kind, "radius": self.radius, "area": self.area}
