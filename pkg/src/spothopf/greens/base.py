r"""Common layer for Neumann and Helmholtz Green's functions.

Every backend supplies the *regular remainder* of each Green's function,

.. math::

    W_N(x;\xi) = G(x;\xi) + \tfrac{1}{2\pi}\log|x-\xi|, \qquad
    W_\mu(x;\xi) = G_\mu(x;\xi) - \tfrac{1}{2\pi}K_0(\sqrt{\mu}\,|x-\xi|),

together with its first and second derivatives.  The free-space parts are
added back here analytically, so self data (regular parts at the source)
and cross data (values between distinct spots) come from one code path.
"""

from __future__ import annotations

import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from ..special import EULER_GAMMA, bessel_k_seq

TWO_PI = 2.0 * np.pi


class GreensError(RuntimeError):
    """Backend failure (unsupported query, non-convergence, bad source)."""


class SourceTooCloseError(GreensError):
    pass


@dataclass
class NeumannRegular:
    value: float
    dx: np.ndarray          # gradient in x
    dxx: np.ndarray         # Hessian in x


@dataclass
class HelmholtzRegular:
    value: complex
    dx: np.ndarray          # d/dx_k
    dxi: np.ndarray         # d/dxi_l
    dxx: np.ndarray         # d2/dx_k dx_m
    dxidx: np.ndarray       # [l, k] = d2/dxi_l dx_k

    def __add__(self, other):
        return HelmholtzRegular(self.value + other.value, self.dx + other.dx,
                                self.dxi + other.dxi, self.dxx + other.dxx,
                                self.dxidx + other.dxidx)


@dataclass
class NeumannLocalData:
    """Self data of the Neumann Green's function at a source."""

    source: np.ndarray
    regular_value: float
    gradient: np.ndarray
    hessian: np.ndarray


@dataclass
class NeumannCrossData:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


@dataclass
class HelmholtzLocalData:
    """Self data of ``G_mu`` at a source.

    ``grad_source_of_grad[l, k]`` is ``d F_k / d xi_l``.
    """

    parameter: complex
    source: np.ndarray
    regular_value: complex
    grad_regular: np.ndarray
    grad_source_of_grad: np.ndarray
    hessian: np.ndarray


@dataclass
class HelmholtzCrossData:
    """``G_mu(x_j; x_i)`` with ``E = grad_xi G`` and ``calE[l,k] = d_xi_l d_x_k G``."""

    value: complex
    grad_x: np.ndarray
    grad_source: np.ndarray
    grad_source_grad: np.ndarray
    hessian: np.ndarray


def sqrt_mu(mu):
    """Principal branch, ``Re sqrt(mu) >= 0``."""
    return np.sqrt(complex(mu))


def free_helmholtz(mu, d):
    """``(1/2pi) K0(k r)`` with x-gradient and x-Hessian at separation ``d``."""
    k = sqrt_mu(mu)
    r = float(np.hypot(d[0], d[1]))
    kk = bessel_k_seq(1, k * r)
    k0, k1 = kk[0], kk[1]
    f1 = -k * k1 / TWO_PI
    f2 = k * k * (k0 + k1 / (k * r)) / TWO_PI
    e = d / r
    ee = np.outer(e, e)
    return k0 / TWO_PI, f1 * e, f2 * ee + (f1 / r) * (np.eye(2) - ee)


def free_helmholtz_many(mu, d):
    """Vectorised :func:`free_helmholtz` over separations ``d`` of shape (m, 2).

    Returns value (m,), gradient (m, 2), Hessian (m, 2, 2).
    """
    k = sqrt_mu(mu)
    r = np.hypot(d[:, 0], d[:, 1])
    kk = bessel_k_seq(1, k * r)
    k0, k1 = kk[0], kk[1]
    f1 = -k * k1 / TWO_PI
    f2 = k * k * (k0 + k1 / (k * r)) / TWO_PI
    e = d / r[:, None]
    ee = e[:, :, None] * e[:, None, :]
    hess = f2[:, None, None] * ee + (f1 / r)[:, None, None] * (np.eye(2)[None] - ee)
    return k0 / TWO_PI, f1[:, None] * e, hess


def free_neumann(d):
    """``-(1/2pi) log r`` with gradient and Hessian."""
    r2 = float(d @ d)
    grad = -d / (TWO_PI * r2)
    hess = -(np.eye(2) / r2 - 2.0 * np.outer(d, d) / r2**2) / TWO_PI
    return -0.5 * np.log(r2) / TWO_PI, grad, hess


def helmholtz_log_constant(mu):
    """``-(1/2pi)(log(sqrt(mu)/2) + gamma)``: constant of ``K0`` at the source."""
    return -(np.log(sqrt_mu(mu) / 2.0) + EULER_GAMMA) / TWO_PI


def helmholtz_quadratic_constant(mu):
    """Coefficient ``(mu/4pi)(1 - gamma - log(sqrt(mu)/2))`` of the free-space Hessian."""
    return complex(mu) / (4.0 * np.pi) * (1.0 - EULER_GAMMA - np.log(sqrt_mu(mu) / 2.0))


class GreensDomain(ABC):
    """A planar domain with Neumann and Helmholtz Green's function backends."""

    kind: str = "abstract"
    area: float
    # smallest equilibrium residual the backend can resolve
    residual_floor: float = 0.0

    @abstractmethod
    def contains(self, x) -> bool:
        ...

    @abstractmethod
    def boundary_distance(self, x) -> float:
        ...

    @abstractmethod
    def neumann_regular_pairs(self, X, XI):
        """``W_N`` for targets ``X`` (m, 2) and sources ``XI`` (n, 2).

        Returns ``(value (m,n), dx (m,n,2), dxx (m,n,2,2))``.
        """

    @abstractmethod
    def helmholtz_regular_pairs(self, mu, X, XI):
        """``W_mu`` for all target/source pairs.

        Returns ``(value, dx, dxi, dxx, dxidx)`` with leading shape (m, n).
        """

    def neumann_regular(self, x, xi) -> NeumannRegular:
        v, dx, dxx = self.neumann_regular_pairs(np.atleast_2d(x), np.atleast_2d(xi))
        return NeumannRegular(float(v[0, 0]), dx[0, 0], dxx[0, 0])

    def helmholtz_regular(self, mu, x, xi) -> HelmholtzRegular:
        out = self.helmholtz_regular_pairs(mu, np.atleast_2d(x), np.atleast_2d(xi))
        return HelmholtzRegular(*(a[0, 0] for a in out))

    # --- assembled quantities -------------------------------------------

    def check_source(self, xi, margin=0.0):
        xi = np.asarray(xi, dtype=float)
        if not self.contains(xi):
            raise SourceTooCloseError(f"source {xi} outside domain")
        if self.boundary_distance(xi) <= margin:
            raise SourceTooCloseError(f"source {xi} within {margin} of boundary")
        return xi

    def neumann_self(self, xi) -> NeumannLocalData:
        xi = np.asarray(xi, dtype=float)
        w = self.neumann_regular(xi, xi)
        return NeumannLocalData(xi, float(w.value), np.asarray(w.dx, float), np.asarray(w.dxx, float))

    def neumann_cross(self, x, xi) -> NeumannCrossData:
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        w = self.neumann_regular(x, xi)
        v, g, h = free_neumann(x - xi)
        return NeumannCrossData(float(w.value + v), w.dx + g, w.dxx + h)

    def neumann_value(self, x, xi) -> float:
        return self.neumann_cross(x, xi).value

    def helmholtz_self(self, mu, xi) -> HelmholtzLocalData:
        xi = np.asarray(xi, dtype=float)
        w = self.helmholtz_regular(mu, xi, xi)
        c = helmholtz_quadratic_constant(mu)
        return HelmholtzLocalData(
            parameter=complex(mu), source=xi,
            regular_value=complex(w.value + helmholtz_log_constant(mu)),
            grad_regular=np.asarray(w.dx, complex),
            grad_source_of_grad=np.asarray(w.dxx + w.dxidx, complex),
            hessian=np.asarray(w.dxx + c * np.eye(2), complex),
        )

    def helmholtz_cross(self, mu, x, xi) -> HelmholtzCrossData:
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        w = self.helmholtz_regular(mu, x, xi)
        v, g, h = free_helmholtz(mu, x - xi)
        return HelmholtzCrossData(
            value=complex(w.value + v), grad_x=w.dx + g, grad_source=w.dxi - g,
            grad_source_grad=w.dxidx - h, hessian=w.dxx + h,
        )

    def helmholtz_value(self, mu, x, xi) -> complex:
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if np.allclose(x, xi, rtol=0, atol=1e-14):
            raise GreensError("helmholtz_value requires x != x0")
        return self.helmholtz_cross(mu, x, xi).value

    def describe(self) -> dict:
        return {"kind": self.kind, "area": self.area}


def neumann_local(domain: GreensDomain, sources):
    """Self and cross Neumann data for every ordered pair of sources.

    Returns a list of lists: entry ``[j][i]`` is :class:`NeumannLocalData`
    when ``i == j`` and :class:`NeumannCrossData` for ``G(x_j; x_i)`` otherwise.
    """
    pts = [domain.check_source(s) for s in sources]
    out = []
    for j, xj in enumerate(pts):
        row = []
        for i, xi in enumerate(pts):
            row.append(domain.neumann_self(xi) if i == j else domain.neumann_cross(xj, xi))
        out.append(row)
    return out


def helmholtz_local(domain: GreensDomain, mu, sources):
    """Helmholtz analogue of :func:`neumann_local`."""
    pts = [domain.check_source(s) for s in sources]
    out = []
    for j, xj in enumerate(pts):
        row = []
        for i, xi in enumerate(pts):
            row.append(domain.helmholtz_self(mu, xi) if i == j else domain.helmholtz_cross(mu, xj, xi))
        out.append(row)
    return out


def helmholtz_value(domain: GreensDomain, mu, x, x0) -> complex:
    return domain.helmholtz_value(mu, x, x0)


def warn_large_sigma(sigma):
    if sigma > 0.3:
        warnings.warn(f"perturbation amplitude sigma={sigma} is not small", RuntimeWarning, stacklevel=3)
