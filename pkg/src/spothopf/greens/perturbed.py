r"""Perturbed unit disk ``r < 1 + sigma f(theta)`` to first order in sigma.

With ``f = sum_p f_p e^{ip theta}`` the no-flux condition transferred to
``rho = 1`` gives the correction ``G = G_0 + sigma G_1`` with

.. math::

    \partial_\rho G_1 = -f\,\partial_{\rho\rho}G_0 + f'\,\partial_\theta G_0
                      = -\mu f G_0 + \partial_\theta(f\,\partial_\theta G_0)
    \quad (\rho = 1),

using ``G_rr = mu G - G_thth`` on the unperturbed boundary.  On ``rho = 1``
the disk function is ``G_0 = (1/2pi) sum_n I_n(k rho_0) e^{in(theta-theta_0)}
/ (k I_n'(k))``, which yields the bilinear Helmholtz correction

.. math::

    G_1 = -\sum_{m,n} f_{m-n}\,\frac{\mu + mn}{2\pi k^2 I_m'(k) I_n'(k)}\,
          I_m(k\rho)e^{im\theta}\, I_n(k\rho_0)e^{-in\theta_0}.

The Neumann analogue (``mu = 0``, forcing ``1/|Omega|``, zero mean) is

.. math::

    G_1 = h(x) + h(\xi) + \frac{f_0}{2\pi}
          - \sum_{m,n\ne0} \frac{f_{m-n}\,\mathrm{sgn}(mn)}{2\pi}
            \rho^{|m|}e^{im\theta}\rho_0^{|n|}e^{-in\theta_0},
    \qquad h = -\frac{f_0\rho^2}{2\pi} - \sum_{m\ne0}\frac{f_m}{\pi|m|}\rho^{|m|}e^{im\theta}.
"""

from __future__ import annotations

import numpy as np

from .base import TWO_PI, GreensDomain, sqrt_mu, warn_large_sigma
from .disk import (_factor, _order_for, _radial_coefficients, _scaled_modes,
                   disk_helmholtz_regular_pairs, disk_neumann_regular_pairs)


def complex_fourier(cos_coef, sin_coef):
    """``f_p`` for ``p = -M..M`` from ``f = sum a_m cos m theta + b_m sin m theta``.

    ``a_0`` is the mean; ``b_0`` is ignored.
    """
    a = np.asarray(cos_coef, float)
    b = np.zeros_like(a) if sin_coef is None else np.asarray(sin_coef, float)
    M = len(a) - 1
    fp = np.zeros(2 * M + 1, complex)
    fp[M] = a[0]
    for m in range(1, M + 1):
        fp[M + m] = 0.5 * (a[m] - 1j * b[m])
        fp[M - m] = 0.5 * (a[m] + 1j * b[m])
    return fp


def _harmonics(pts, orders, sign):
    """``z^m`` (m > 0) or ``conj(z)^|m|`` (m < 0), with x-gradient and Hessian.

    ``sign = -1`` conjugates the angular factor (``e^{-im theta}``).
    Returns arrays of shape (points, modes), (points, modes, 2), (points, modes, 2, 2).
    """
    z = pts[:, 0] + 1j * pts[:, 1]
    m = sign * np.asarray(orders)
    am = np.abs(m)
    w = np.where(m[None, :] >= 0, z[:, None], np.conj(z)[:, None])
    dy_fac = np.where(m >= 0, 1j, -1j)[None, :]

    def pw(p):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(p[None, :] >= 0, w ** np.maximum(p, 0)[None, :], 0.0)
        return out

    v = pw(am)
    d1 = am[None, :] * pw(am - 1)
    d2 = (am * (am - 1))[None, :] * pw(am - 2)
    g = np.stack([d1, dy_fac * d1], axis=-1)
    h = np.empty(v.shape + (2, 2), complex)
    h[..., 0, 0] = d2
    h[..., 0, 1] = h[..., 1, 0] = dy_fac * d2
    h[..., 1, 1] = dy_fac**2 * d2
    return v, g, h


class PerturbedDisk(GreensDomain):
    """``r < 1 + sigma f(theta)``, Green's functions correct to O(sigma).

    Parameters
    ----------
    sigma : float
    fourier_cos, fourier_sin : array_like
        ``f = sum_m a_m cos(m theta) + b_m sin(m theta)``.
    order : int, optional
        Fixed disk-series truncation.
    """

    kind = "perturbed_disk"

    def __init__(self, sigma: float, fourier_cos, fourier_sin=None, order: int | None = None):
        if sigma < 0:
            raise ValueError("sigma must be non-negative")
        warn_large_sigma(sigma)
        self.sigma = float(sigma)
        self.fourier_cos = np.asarray(fourier_cos, float)
        self.fourier_sin = (np.zeros_like(self.fourier_cos) if fourier_sin is None
                            else np.asarray(fourier_sin, float))
        self.fp = complex_fourier(self.fourier_cos, self.fourier_sin)
        self.M = len(self.fourier_cos) - 1
        self.order = order
        self.area = np.pi + 2.0 * np.pi * self.sigma * self.fourier_cos[0]

    def radius(self, theta):
        m = np.arange(self.M + 1)
        th = np.asarray(theta, float)[..., None]
        f = np.sum(self.fourier_cos * np.cos(m * th) + self.fourier_sin * np.sin(m * th), axis=-1)
        return 1.0 + self.sigma * f

    def contains(self, x):
        x = np.asarray(x, float)
        return float(np.hypot(*x)) < float(self.radius(np.arctan2(x[1], x[0])))

    def boundary_distance(self, x):
        x = np.asarray(x, float)
        return float(self.radius(np.arctan2(x[1], x[0]))) - float(np.hypot(*x))

    def _f(self, p):
        p = np.asarray(p)
        out = np.zeros(p.shape, complex)
        ok = np.abs(p) <= self.M
        out[ok] = self.fp[p[ok] + self.M]
        return out

    def describe(self):
        return {"kind": self.kind, "area": self.area, "sigma": self.sigma,
                "fourier_cos": self.fourier_cos.tolist(), "fourier_sin": self.fourier_sin.tolist()}

    # -- Neumann ----------------------------------------------------------

    def neumann_correction_pairs(self, X, XI):
        """First-order term ``G_1`` with x-derivatives, for all pairs."""
        X = np.atleast_2d(np.asarray(X, float))
        XI = np.atleast_2d(np.asarray(XI, float))
        rr = np.max(np.hypot(X[:, 0], X[:, 1])) * np.max(np.hypot(XI[:, 0], XI[:, 1]))
        L = _order_for(rr, self.order) + self.M
        idx = np.concatenate([np.arange(-L, 0), np.arange(1, L + 1)])
        vx, gx, hx = _harmonics(X, idx, 1)
        vxi, _, _ = _harmonics(XI, idx, -1)
        C = -self._f(idx[:, None] - idx[None, :]) * np.sign(idx[:, None] * idx[None, :]) / TWO_PI
        v = np.einsum("jm,mn,in->ji", vx, C, vxi)
        dx = np.einsum("jmk,mn,in->jik", gx, C, vxi)
        dxx = np.einsum("jmkl,mn,in->jikl", hx, C, vxi)
        # h(x) + h(xi) + f0/(2 pi)
        f0 = self.fp[self.M].real
        mm = np.concatenate([np.arange(-self.M, 0), np.arange(1, self.M + 1)])
        cm = -self._f(mm) / (np.pi * np.abs(mm))
        hv, hg, hh = _harmonics(X, mm, 1)
        hxi, _, _ = _harmonics(XI, mm, 1)
        r2x = np.sum(X**2, axis=1)
        r2xi = np.sum(XI**2, axis=1)
        hX = hv @ cm - f0 * r2x / TWO_PI
        hXI = hxi @ cm - f0 * r2xi / TWO_PI
        v = v + hX[:, None] + hXI[None, :] + f0 / TWO_PI
        dx = dx + (np.einsum("jmk,m->jk", hg, cm) - f0 * X / np.pi)[:, None, :]
        dxx = dxx + (np.einsum("jmkl,m->jkl", hh, cm) - f0 * np.eye(2) / np.pi)[:, None, :, :]
        return v.real, dx.real, dxx.real

    def neumann_regular_pairs(self, X, XI):
        v0, dx0, dxx0 = disk_neumann_regular_pairs(X, XI)
        if self.sigma == 0.0:
            return v0, dx0, dxx0
        v1, dx1, dxx1 = self.neumann_correction_pairs(X, XI)
        s = self.sigma
        return v0 + s * v1, dx0 + s * dx1, dxx0 + s * dxx1

    # -- Helmholtz --------------------------------------------------------

    def helmholtz_correction_pairs(self, mu, X, XI):
        """First-order term ``G_1`` of ``G_mu`` with (x, xi) derivatives."""
        X = np.atleast_2d(np.asarray(X, float))
        XI = np.atleast_2d(np.asarray(XI, float))
        mu = complex(mu)
        k = sqrt_mu(mu)
        rr = np.max(np.hypot(X[:, 0], X[:, 1])) * np.max(np.hypot(XI[:, 0], XI[:, 1]))
        L = _order_for(rr, self.order) + self.M
        _, r = _radial_coefficients(mu, L + 2)
        ip_over_i = np.empty(L + 1, complex)       # I_n'(k) / I_n(k)
        ip_over_i[0] = r[0]
        n = np.arange(1, L + 1)
        ip_over_i[1:] = 0.5 * (1.0 / r[n - 1] + r[n])
        nidx = np.arange(-L, L + 1)
        ratio = 1.0 / ip_over_i[np.abs(nidx)]
        D = (-self._f(nidx[:, None] - nidx[None, :]) * (mu + np.outer(nidx, nidx))
             / (TWO_PI * mu) * np.outer(ratio, ratio))
        tx, thx = _scaled_modes(k, X, L + 2)
        txi, thxi = _scaled_modes(k, XI, L + 2)
        fx = {op: _factor(op, k, tx, thx, r, nidx, 1) for op in ("", "x", "y", "xx", "xy", "yy")}
        fxi = {op: _factor(op, k, txi, thxi, r, nidx, -1) for op in ("", "x", "y")}

        def pair(a, b):
            return np.einsum("jm,mn,in->ji", a, D, b)

        m, nn = len(X), len(XI)
        value = pair(fx[""], fxi[""])
        dx = np.stack([pair(fx["x"], fxi[""]), pair(fx["y"], fxi[""])], axis=-1)
        dxi = np.stack([pair(fx[""], fxi["x"]), pair(fx[""], fxi["y"])], axis=-1)
        dxx = np.empty((m, nn, 2, 2), complex)
        dxx[..., 0, 0] = pair(fx["xx"], fxi[""])
        dxx[..., 1, 1] = pair(fx["yy"], fxi[""])
        dxx[..., 0, 1] = dxx[..., 1, 0] = pair(fx["xy"], fxi[""])
        dxidx = np.empty((m, nn, 2, 2), complex)
        for l, ol in enumerate(("x", "y")):
            for kk, ok in enumerate(("x", "y")):
                dxidx[..., l, kk] = pair(fx[ok], fxi[ol])
        return value, dx, dxi, dxx, dxidx

    def helmholtz_regular_pairs(self, mu, X, XI):
        w0 = disk_helmholtz_regular_pairs(mu, X, XI, self.order)
        if self.sigma == 0.0:
            return w0
        w1 = self.helmholtz_correction_pairs(mu, X, XI)
        return tuple(a + self.sigma * b for a, b in zip(w0, w1))
