r"""Rectangle ``[0, L] x [0, H]`` by reflections of a doubly periodic kernel.

Neumann: the four reflected sources ``(+-xi_1, +-xi_2)`` of the torus Green's
function with periods ``a = 2L``, ``b = 2H``,

.. math::

    G_{per}(z) = -\frac{1}{2\pi}\Big[\log|\sin w|
        + \sum_{n\ge1}\log|1 - q^{2n}e^{2iw}| + \log|1 - q^{2n}e^{-2iw}|\Big]
        + \frac{y^2}{2ab} + \frac{b}{12a} - \frac{\log 2}{2\pi},

with ``w = pi z / a`` and ``q = exp(-pi b / a)``, after reducing ``y`` to
``[-b/2, b/2]``.  The constant makes the torus kernel integrate to zero.

Helmholtz: image sum of ``K0(sqrt(mu) r)/(2 pi)`` over the four reflections
and the lattice ``(2mL, 2nH)``, truncated once ``|K0| < 1e-14``.
"""

from __future__ import annotations

import numpy as np

from scipy.special import kv

from .base import TWO_PI, GreensDomain, sqrt_mu

_REFLECTIONS = np.array([[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]])
IMAGE_TOL = 1e-14


def _accumulate(index, values, size):
    """Sum complex ``values`` (k, ...) into ``size`` bins by ``index``."""
    flat = values.reshape(len(values), -1)
    out = np.empty((size, flat.shape[1]), complex)
    for c in range(flat.shape[1]):
        out[:, c] = (np.bincount(index, flat[:, c].real, size)
                     + 1j * np.bincount(index, flat[:, c].imag, size))
    return out


class Rectangle(GreensDomain):
    """Rectangle ``[0, width] x [0, height]``.

    Parameters
    ----------
    width, height : float
    image_tol : float
        Truncation threshold for the Helmholtz image sum.
    """

    kind = "rectangle"

    def __init__(self, width: float = 2.0, height: float = 1.0, image_tol: float = IMAGE_TOL):
        if width <= 0 or height <= 0:
            raise ValueError("rectangle sides must be positive")
        self.width = float(width)
        self.height = float(height)
        self.area = self.width * self.height
        self.image_tol = image_tol
        self.a = 2.0 * self.width
        self.b = 2.0 * self.height
        self.q = np.exp(-np.pi * self.b / self.a)
        # q^(2n-1) < 1e-17 bounds every product term
        self.n_theta = int(np.ceil((np.log(1e-17) / np.log(self.q) + 1) / 2)) + 1

    def contains(self, x) -> bool:
        x = np.asarray(x, float)
        return bool(0 < x[0] < self.width and 0 < x[1] < self.height)

    def boundary_distance(self, x) -> float:
        x = np.asarray(x, float)
        return float(min(x[0], self.width - x[0], x[1], self.height - x[1]))

    def describe(self):
        return {"kind": self.kind, "area": self.area, "width": self.width, "height": self.height}

    # -- Neumann ----------------------------------------------------------

    def _torus(self, z, regular):
        """Torus kernel, gradient and Hessian at complex displacements ``z``.

        With ``regular`` the ``-(1/2pi) log|z|`` singularity is removed.
        """
        a, b = self.a, self.b
        y = z.imag - b * np.round(z.imag / b)
        z = z.real + 1j * y
        w = np.pi * z / a
        c = np.pi / a
        val = np.empty(z.shape)
        h1 = np.empty(z.shape, complex)
        h2 = np.empty(z.shape, complex)
        if regular:
            small = np.abs(w) < 0.05
            ws = w[small]
            w2 = ws * ws
            val[small] = (-w2 / 6 - w2**2 / 180 - w2**3 / 2835).real + np.log(c)
            h1[small] = c * (-ws / 3 - ws * w2 / 45 - 2 * ws * w2**2 / 945)
            h2[small] = c * c * (-1.0 / 3 - w2 / 15 - 2 * w2**2 / 189)
            big = ~small
            wb = w[big]
            val[big] = np.log(np.abs(np.sin(wb) / wb)) + np.log(c)
            h1[big] = c * (1.0 / np.tan(wb) - 1.0 / wb)
            h2[big] = c * c * (-1.0 / np.sin(wb) ** 2 + 1.0 / wb**2)
        else:
            val[...] = np.log(np.abs(np.sin(w)))
            h1[...] = c / np.tan(w)
            h2[...] = -c * c / np.sin(w) ** 2
        for n in range(1, self.n_theta + 1):
            qn = self.q ** (2 * n)
            for beta in (2 * np.pi / a, -2 * np.pi / a):
                e = qn * np.exp(1j * beta * z)
                one = 1.0 - e
                val += np.log(np.abs(one))
                h1 += -1j * beta * e / one
                h2 += beta * beta * e / one**2
        v = -val / TWO_PI + y * y / (2 * a * b) + b / (12 * a) - np.log(2.0) / TWO_PI
        g = np.stack([h1.real, -h1.imag], axis=-1) * (-1.0 / TWO_PI)
        g[..., 1] += y / (a * b)
        hxx = -h2.real / TWO_PI
        hxy = h2.imag / TWO_PI
        hyy = h2.real / TWO_PI + 1.0 / (a * b)
        H = np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)
        return v, g, H

    def neumann_regular_pairs(self, X, XI):
        X = np.atleast_2d(np.asarray(X, float))
        XI = np.atleast_2d(np.asarray(XI, float))
        v = np.zeros((len(X), len(XI)))
        g = np.zeros((len(X), len(XI), 2))
        H = np.zeros((len(X), len(XI), 2, 2))
        for k, P in enumerate(_REFLECTIONS):
            d = X[:, None, :] - (XI * P)[None, :, :]
            z = d[..., 0] + 1j * d[..., 1]
            vk, gk, Hk = self._torus(z, regular=(k == 0))
            v += vk
            g += gk
            H += Hk
        return v, g, H

    # -- Helmholtz --------------------------------------------------------

    def _lattice(self, mu):
        k = sqrt_mu(mu)
        kr = max(k.real, 1e-12)
        # sqrt(pi/(2|k|r)) exp(-Re k r) < tol
        r = 1.0
        for _ in range(60):
            r_new = (np.log(1.0 / self.image_tol) + 0.5 * np.log(np.pi / (2 * abs(k) * r))) / kr
            r_new = max(r_new, 1e-3)
            if abs(r_new - r) < 1e-6 * r:
                break
            r = r_new
        r_max = r + np.hypot(self.width, self.height)
        mx = int(np.ceil(r_max / self.a))
        my = int(np.ceil(r_max / self.b))
        i, j = np.meshgrid(np.arange(-mx, mx + 1), np.arange(-my, my + 1), indexing="ij")
        t = np.column_stack([i.ravel() * self.a, j.ravel() * self.b])
        t = t[np.hypot(t[:, 0], t[:, 1]) <= r_max + np.hypot(self.a, self.b)]
        return t, r

    def helmholtz_regular_pairs(self, mu, X, XI):
        X = np.atleast_2d(np.asarray(X, float))
        XI = np.atleast_2d(np.asarray(XI, float))
        m, n = len(X), len(XI)
        k = sqrt_mu(mu)
        t, r_cut = self._lattice(mu)
        v = np.zeros((m, n), complex)
        dx = np.zeros((m, n, 2), complex)
        dxi = np.zeros((m, n, 2), complex)
        dxx = np.zeros((m, n, 2, 2), complex)
        dxidx = np.zeros((m, n, 2, 2), complex)
        origin = np.all(t == 0, axis=1)
        for p, P in enumerate(_REFLECTIONS):
            tt = t[~origin] if p == 0 else t
            # d[j, i, s] = x_j - (P xi_i + t_s)
            d = X[:, None, None, :] - (XI * P)[None, :, None, :] - tt[None, None, :, :]
            r = np.hypot(d[..., 0], d[..., 1])
            keep = r <= r_cut
            jj, ii, ss = np.nonzero(keep)
            if len(jj) == 0:
                continue
            rk = r[keep]
            e = d[keep] / rk[:, None]
            k0, k1 = kv(0, k * rk), kv(1, k * rk)
            f0 = k0 / TWO_PI
            f1 = -k * k1 / TWO_PI
            f2 = k * k * (k0 + k1 / (k * rk)) / TWO_PI
            ee = e[:, :, None] * e[:, None, :]
            hess = f2[:, None, None] * ee + (f1 / rk)[:, None, None] * (np.eye(2)[None] - ee)
            grad = f1[:, None] * e
            flat = jj * n + ii
            v += _accumulate(flat, f0, m * n).reshape(m, n)
            dx += _accumulate(flat, grad, m * n).reshape(m, n, 2)
            dxx += _accumulate(flat, hess, m * n).reshape(m, n, 2, 2)
            dxi -= _accumulate(flat, grad * P, m * n).reshape(m, n, 2)
            dxidx -= _accumulate(flat, hess * P[None, :, None], m * n).reshape(m, n, 2, 2)
        return v, dx, dxi, dxx, dxidx
