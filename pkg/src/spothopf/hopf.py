r"""Hopf thresholds of slow translational instabilities.

For an equilibrium with spots :math:`x_j` and strengths :math:`S_j`, the
small eigenvalues :math:`\lambda_0` satisfy the nonlinear matrix problem

.. math::

    \mathcal{K}_1^{-1}\,[B(\omega) - M(\omega)]\,a = \lambda_0 a, \qquad
    \omega = \lambda_0\tau_0,

    B(\omega) = \omega[(1-1/\nu)\mathcal{S} + \mathcal{K}_2] + 4\pi\mathcal{H}
        + 4\pi(\nabla^2\mathcal{G}_\omega)\mathcal{S},

    M(\omega) = 8\pi^2(\nabla_1\mathcal{G}_\omega)^T
        [\nu^{-1}I + \chi' + 2\pi\mathcal{G}_\omega]^{-1}(\nabla_2\mathcal{G}_\omega)\mathcal{S}.

A Hopf point is a pair :math:`(\hat\omega_I, \hat\lambda_I)` with
:math:`\det(B - M - i\hat\lambda_I\mathcal{K}_1) = 0` at :math:`\omega = i\hat\omega_I`;
the threshold is :math:`\hat\tau = \hat\omega_I/\hat\lambda_I`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment

from .core import core_data
from .equilibrium import SchnakenbergParams, SpotConfiguration, neumann_hessian_sum
from .greens.base import (GreensDomain, free_helmholtz_many, helmholtz_log_constant,
                          helmholtz_quadratic_constant)
from .special import EULER_GAMMA, i_derivs, k_derivs

log = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi
TWO_PI = 2.0 * np.pi
DEFAULT_SEED_GRID = [(w, l) for w in (0.5, 1, 2, 3, 4, 6, 9) for l in (5, 10, 20, 40, 80, 160)]


class HopfError(RuntimeError):
    pass


@dataclass
class PencilAssembly:
    omega: complex
    b_matrix: np.ndarray
    m_matrix: np.ndarray
    g_matrix: np.ndarray
    grad1: np.ndarray
    grad2: np.ndarray
    grad2_sq: np.ndarray
    s_diag: np.ndarray
    h_block: np.ndarray
    k1_diag: np.ndarray
    k2_diag: np.ndarray
    kappa_map: np.ndarray


@dataclass
class HopfRoot:
    omega_im: float
    lambda_im: float
    tau_hat: float
    mode: np.ndarray
    residual: float
    info: dict = field(default_factory=dict)

    def spot_modes(self):
        return self.mode.reshape(-1, 2)

    def to_dict(self):
        m = np.column_stack([self.mode.real, self.mode.imag]).ravel()
        return {"omega_im": self.omega_im, "lambda_im": self.lambda_im,
                "tau_hat": self.tau_hat, "mode": m.tolist(), "residual": self.residual}


class Pencil:
    """Matrix pencil of one equilibrium; omega-independent data cached.

    Parameters
    ----------
    domain : GreensDomain
    config : SpotConfiguration
    params : SchnakenbergParams
    subspace : ndarray, optional
        Real ``2N x k`` matrix with orthonormal columns spanning an invariant
        subspace (for instance all horizontal components when every spot sits
        on a symmetry line).  Eigenvalues and roots are then restricted to it.
    """

    def __init__(self, domain: GreensDomain, config: SpotConfiguration, params: SchnakenbergParams,
                 subspace=None):
        self.domain = domain
        self.X = np.asarray(config.locations, float).reshape(-1, 2)
        self.S = np.asarray(config.strengths, float)
        self.N = len(self.S)
        self.params = params
        self.nu = params.nu
        data = {}
        for s in self.S:
            key = round(float(s), 10)
            if key not in data:
                data[key] = core_data(key)
        cd = [data[round(float(s), 10)] for s in self.S]
        self.chi_prime = np.array([c.chi_prime for c in cd])
        self.k1 = np.array([c.k1 for c in cd])
        self.k2 = np.array([c.k2 for c in cd])
        self.s_diag = np.diag(np.repeat(self.S, 2))
        self.k1_diag = np.diag(np.repeat(self.k1, 2))
        self.k2_diag = np.diag(np.repeat(self.k2, 2))
        hsum = neumann_hessian_sum(domain, self.X, self.S)
        self.h_block = np.zeros((2 * self.N, 2 * self.N))
        for j in range(self.N):
            self.h_block[2 * j:2 * j + 2, 2 * j:2 * j + 2] = hsum[j]
        self.Q = None if subspace is None else np.asarray(subspace, float)
        self.k1_sub = self.k1_diag if self.Q is None else self.Q.T @ self.k1_diag @ self.Q
        self._cache = {}

    # -- assembly ---------------------------------------------------------

    def assemble(self, omega) -> PencilAssembly:
        omega = complex(omega)
        N, X, S = self.N, self.X, self.S
        v, dx, dxi, dxx, dxidx = self.domain.helmholtz_regular_pairs(omega, X, X)
        off = ~np.eye(N, dtype=bool)
        d = (X[:, None, :] - X[None, :, :])
        G = np.array(v, dtype=complex)
        gx = np.array(dx, dtype=complex)        # grad_x G(x_j; x_i) at [j, i]
        gxi = np.array(dxi, dtype=complex)      # grad_xi G(x_j; x_i)
        gxix = np.array(dxidx, dtype=complex)   # [l, k] = d_xi_l d_x_k
        if N > 1:
            fv, fg, fh = free_helmholtz_many(omega, d[off])
            G[off] += fv
            gx[off] += fg
            gxi[off] -= fg
            gxix[off] -= fh
        c = helmholtz_quadratic_constant(omega)
        for j in range(N):
            G[j, j] += helmholtz_log_constant(omega)
            gxix[j, j] = dxidx[j, j] - c * np.eye(2)    # calF_j - H_j
        grad2 = np.zeros((N, 2 * N), dtype=complex)
        grad1 = np.zeros((N, 2 * N), dtype=complex)
        g2 = np.zeros((2 * N, 2 * N), dtype=complex)
        for j in range(N):
            for i in range(N):
                grad2[j, 2 * i:2 * i + 2] = gxi[j, i] if i != j else gx[j, j]
                grad1[i, 2 * j:2 * j + 2] = gx[j, i]
                g2[2 * j:2 * j + 2, 2 * i:2 * i + 2] = gxix[j, i].T
        Sd = self.s_diag
        lhs = np.eye(N) / self.nu + np.diag(self.chi_prime) + 2.0 * np.pi * G
        kappa = 2.0 * np.pi * np.linalg.solve(lhs, grad2 @ Sd)
        B = omega * ((1.0 - 1.0 / self.nu) * Sd + self.k2_diag) + FOUR_PI * self.h_block + FOUR_PI * g2 @ Sd
        M = 4.0 * np.pi * grad1.T @ kappa
        return PencilAssembly(omega, B, M, G, grad1, grad2, g2, Sd, self.h_block,
                              self.k1_diag, self.k2_diag, kappa)

    def reduced(self, omega_im):
        """``B - M`` at ``omega = i omega_im`` (cached)."""
        key = float(omega_im)
        out = self._cache.get(key)
        if out is None:
            a = self.assemble(1j * key)
            out = a.b_matrix - a.m_matrix
            if self.Q is not None:
                out = self.Q.T @ out @ self.Q
            if len(self._cache) > 4096:
                self._cache.clear()
            self._cache[key] = out
        return out

    def matrix(self, omega_im, lambda_im):
        return self.reduced(omega_im) - 1j * lambda_im * self.k1_sub

    def full_matrix(self, omega_im, lambda_im):
        a = self.assemble(1j * omega_im)
        return a.b_matrix - a.m_matrix - 1j * lambda_im * self.k1_diag

    def det(self, omega_im, lambda_im) -> complex:
        # scaled by K1^{-1} so that the determinant is the characteristic
        # polynomial of the eigenvalue problem
        return complex(np.linalg.det(np.linalg.solve(self.k1_sub, self.matrix(omega_im, lambda_im))))

    def eigenvalues(self, omega_im):
        return np.linalg.eigvals(np.linalg.solve(self.k1_sub, self.reduced(omega_im)))

    # -- internal consistency -------------------------------------------

    def intermediate_form_defect(self, omega) -> float:
        """N=1 check that the expanded coupling form equals the final pencil.

        Rebuilds ``B - M`` as ``omega(S/2 + k2) + 4 pi calH + 4 pi Q^T`` with
        ``Q = M_1 - calK^T (grad_1 G)_1`` and the ``omega (1 - 2/nu)/(8 pi)``
        diagonal term carried inside ``M_1``.
        """
        if self.N != 1:
            raise ValueError("defined for a single spot")
        a = self.assemble(omega)
        S = self.S[0]
        nu = self.nu
        m1 = S * (a.grad2_sq.T + omega / (8.0 * np.pi) * (1.0 - 2.0 / nu) * np.eye(2))
        q = m1 - a.kappa_map.T @ a.grad1
        alt = omega * (0.5 * S + self.k2[0]) * np.eye(2) + FOUR_PI * self.h_block + FOUR_PI * q.T
        ref = a.b_matrix - a.m_matrix
        return float(np.max(np.abs(alt - ref)) / max(1.0, np.max(np.abs(ref))))


# ---------------------------------------------------------------------------
# root finding
# ---------------------------------------------------------------------------

def _normalize_mode(v):
    v = np.asarray(v, complex)
    v = v / np.linalg.norm(v)
    big = np.abs(v) > 1e-8 * np.max(np.abs(v))
    first = np.argmax(big)
    return v * np.exp(-1j * np.angle(v[first]))


def _newton(pencil: Pencil, w, l, tol=1e-12, maxit=40):
    """2-D Newton on Re/Im det with a finite-difference Jacobian."""
    def F(p):
        d = pencil.det(p[0], p[1])
        return np.array([d.real, d.imag])

    p = np.array([w, l], float)
    f = F(p)
    for _ in range(maxit):
        h = 1e-7 * np.maximum(1.0, np.abs(p))
        J = np.empty((2, 2))
        for c in range(2):
            e = np.zeros(2)
            e[c] = h[c]
            J[:, c] = (F(p + e) - F(p - e)) / (2 * h[c])
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        nf = np.linalg.norm(f)
        for _ in range(20):
            pt = p + lam * step
            if pt[0] > 0:
                ft = F(pt)
                if np.linalg.norm(ft) < nf or lam < 1e-4:
                    break
            lam *= 0.5
        else:
            return None
        p, f = pt, ft
        if np.all(np.abs(lam * step) <= tol * np.maximum(1.0, np.abs(p))):
            return p
    return p if np.all(np.abs(step) < 1e-8 * np.maximum(1.0, np.abs(p))) else None


def _root_from_point(pencil, p):
    w, l = float(p[0]), float(p[1])
    P = pencil.matrix(w, l)
    _, sv, vh = np.linalg.svd(P)
    mode = vh[-1].conj()
    if pencil.Q is not None:
        mode = pencil.Q @ mode
    mode = _normalize_mode(mode)
    res = float(np.linalg.norm(pencil.full_matrix(w, l) @ mode))
    return HopfRoot(w, l, w / l, mode, res, {"sigma_min": float(sv[-1]), "sigma_ratio": float(sv[-1] / sv[0])})


def _branch_crossings(pencil: Pencil, w_min=0.3, w_max=30.0, n=48):
    """Hopf points as zeros of Re(lambda) along tracked eigenvalue branches.

    Eigenvalues of ``K1^{-1}(B - M)(i w)`` are matched between grid points by
    minimal total distance; every sign change of a real part is refined by
    Brent's method on the branch, identified by proximity to the linear
    interpolant between the bracketing samples.
    """
    grid = np.geomspace(w_min, w_max, n)
    prev = pencil.eigenvalues(grid[0])
    found = []
    for w0, w1 in zip(grid[:-1], grid[1:]):
        cur = pencil.eigenvalues(w1)
        _, col = linear_sum_assignment(np.abs(prev[:, None] - cur[None, :]))
        cur = cur[col]
        for a, b in zip(prev, cur):
            if np.sign(a.real) == np.sign(b.real):
                continue

            def branch(w, a=a, b=b, w0=w0, w1=w1):
                t = (w - w0) / (w1 - w0)
                guess = a + t * (b - a)
                ev = pencil.eigenvalues(w)
                return ev[np.argmin(np.abs(ev - guess))]

            try:
                w = brentq(lambda x: branch(x).real, w0, w1, xtol=1e-13, rtol=1e-14)
            except ValueError:
                t = a.real / (a.real - b.real)
                found.append(("seed", w0 + t * (w1 - w0), a.imag + t * (b.imag - a.imag)))
                continue
            found.append(("root", w, branch(w).imag))
        prev = cur
    return found


def axis_subspace(n_spots: int, axis: int):
    """Columns selecting component ``axis`` (0 = x, 1 = y) of every spot."""
    Q = np.zeros((2 * n_spots, n_spots))
    Q[2 * np.arange(n_spots) + axis, np.arange(n_spots)] = 1.0
    return Q


def find_roots(domain: GreensDomain, config: SpotConfiguration, params: SchnakenbergParams,
               seed_grid=None, scan: bool = True, pencil: Pencil | None = None,
               dedup_tol: float = 1e-6, subspace=None):
    """All Hopf roots reachable from the seeds.

    Roots come from an eigenvalue-branch scan in ``omega_I`` (default) and,
    if given, from determinant Newton runs seeded at ``seed_grid`` pairs
    ``(omega_I, lambda_I)`` (also rescaled by ``S/|k1|``).  Only roots with
    ``omega_I > 0`` and ``lambda_I > 0`` are kept, deduplicated by proximity.
    """
    pencil = pencil or Pencil(domain, config, params, subspace=subspace)
    points = []
    seeds = []
    if scan:
        for kind, w, l in _branch_crossings(pencil):
            (points if kind == "root" else seeds).append((w, l))
    if seed_grid is not None:
        scale = np.mean(pencil.S / np.abs(pencil.k1))
        seeds += [(w, l) for (w, l) in seed_grid] + [(w, l * scale) for (w, l) in seed_grid]
    for w, l in seeds:
        if w > 0:
            p = _newton(pencil, w, abs(l) if l != 0 else 1.0)
            if p is not None:
                points.append(tuple(p))
    roots = []
    for p in points:
        if p[0] <= 0 or p[1] <= 0:
            continue
        if any(abs(p[0] - r.omega_im) <= dedup_tol * max(1, p[0]) and
               abs(p[1] - r.lambda_im) <= dedup_tol * max(1, p[1]) for r in roots):
            continue
        roots.append(_root_from_point(pencil, p))
    roots.sort(key=lambda r: r.tau_hat)
    log.info("found %d Hopf roots (of at most %d)", len(roots), 2 * pencil.N)
    return roots


def threshold(domain, config, params, **kw):
    """Minimal threshold and its root; raises if no root was found."""
    roots = find_roots(domain, config, params, **kw)
    if not roots:
        raise HopfError("no Hopf root found")
    return roots[0].tau_hat, roots[0]


def classify_motion(root: HopfRoot, tol: float = 1e-6):
    """Per-spot onset motion: line along a direction or an ellipse.

    Uses the real 2x2 matrix ``(Re a_j, -Im a_j)``; its singular values are
    the semi-axes and the leading left singular vector the major axis.
    """
    out = []
    for a in root.spot_modes():
        # remove the phase that makes a_j as real as possible
        phi = 0.5 * np.angle(np.sum(a * a))
        b = a * np.exp(-1j * phi)
        m = np.column_stack([b.real, -b.imag])
        u, s, _ = np.linalg.svd(m)
        kind = "line" if s[1] <= tol * max(s[0], 1e-300) else "ellipse"
        out.append({"kind": kind, "direction": u[:, 0].tolist(),
                    "axes": s.tolist(), "amplitude": float(np.linalg.norm(a))})
    return out


# ---------------------------------------------------------------------------
# one-spot scalar reductions
# ---------------------------------------------------------------------------

def _k1i1_ratio(z):
    _, di, _ = i_derivs(1, z)
    _, dk, _ = k_derivs(1, z)
    return dk[1] / di[1]


def unit_disk_function(omega, eps):
    """``2 + omega [log(e^gamma eps sqrt(omega)/2) - K1'/I1'(sqrt(omega))]``."""
    z = np.sqrt(complex(omega))
    return 2.0 + omega * (np.log(np.exp(EULER_GAMMA) * eps * z / 2.0) - _k1i1_ratio(z))


def universal_frequency(bracket=(1.0, 6.0)) -> float:
    """Root of ``Re{2 + i w [gamma + log(sqrt(i w)/2) - K1'/I1'(sqrt(i w))]} = 0``."""
    def f(w):
        om = 1j * w
        z = np.sqrt(om)
        return (2.0 + om * (EULER_GAMMA + np.log(z / 2.0) - _k1i1_ratio(z))).real
    return brentq(f, *bracket, xtol=1e-14, rtol=1e-15)


def _scalar_roots(g, k1, w_min=0.05, w_max=30.0, n=400):
    """Roots of ``g(i w) = k1 i lambda`` with ``k1`` real: Re g = 0 then lambda."""
    grid = np.geomspace(w_min, w_max, n)
    vals = np.array([g(1j * w).real for w in grid])
    out = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if np.sign(fa) != np.sign(fb):
            w = brentq(lambda t: g(1j * t).real, a, b, xtol=1e-14, rtol=1e-15)
            lam = g(1j * w).imag / k1
            if lam > 0:
                out.append((w, lam))
    return out


def one_spot_scalar(domain: GreensDomain, S: float, params: SchnakenbergParams,
                    location=None, method: str = "auto"):
    """Scalar threshold equations of a single spot, one per Hessian axis.

    With ``method='closed_form'`` (default for a centred spot in the unit
    disk) the Bessel form of the equation is used, independent of the
    Green's function backends.  Otherwise the decoupled axis equations are
    built from the backend's self data in the principal frame of ``H``,
    including the rank-one term carried by the regular gradient.  They agree
    with the general pencil when that gradient is an eigenvector of ``H``
    (for instance a spot on a symmetry line).

    Returns a list of ``(axis_vector, [HopfRoot, ...])``.
    """
    from .greens.disk import Disk

    loc = np.zeros(2) if location is None else np.asarray(location, float)
    cd = core_data(round(float(S), 10))
    eps = params.epsilon
    centred_disk = isinstance(domain, Disk) and domain.radius == 1.0 and np.allclose(loc, 0)
    if method == "auto":
        method = "closed_form" if centred_disk else "greens"
    if method == "closed_form":
        if not centred_disk:
            raise ValueError("closed form applies to a centred spot in the unit disk")

        def g(om):
            return S * unit_disk_function(om, eps) + om * cd.k2

        roots = []
        for w, lam in _scalar_roots(g, cd.k1):
            roots.append(HopfRoot(w, lam, w / lam, np.array([1.0, 0.0], complex), 0.0,
                                  {"method": "closed_form"}))
        return [(np.array([1.0, 0.0]), roots), (np.array([0.0, 1.0]), roots)]

    nu = params.nu
    H = domain.neumann_self(loc).hessian
    _, vecs = np.linalg.eigh(H)
    out = []
    for a in range(2):
        e = vecs[:, a]

        def g(om, e=e):
            h = domain.helmholtz_self(om, loc)
            blk = H + h.grad_source_of_grad.T - h.hessian
            # rank-one coupling through the regular gradient at the spot
            lhs = 1.0 / nu + cd.chi_prime + TWO_PI * h.regular_value
            m = 2.0 * FOUR_PI * np.pi * S * (e @ h.grad_regular) ** 2 / lhs
            return om * ((1.0 - 1.0 / nu) * S + cd.k2) + FOUR_PI * S * (e @ blk @ e) - m

        roots = [HopfRoot(w, lam, w / lam, e.astype(complex), 0.0, {"method": "greens"})
                 for w, lam in _scalar_roots(g, cd.k1, n=100)]
        out.append((e, roots))
    return out


def tau0_from_frequency(omega_im, S, eps, k1, k2):
    """Threshold from ``Re{log(e^g eps/2) + log(w)/2 - K1'/I1' + k2/S} = k1/(S tau)``."""
    om = 1j * omega_im
    z = np.sqrt(om)
    val = (np.log(np.exp(EULER_GAMMA) * eps / 2.0) + 0.5 * np.log(om) - _k1i1_ratio(z) + k2 / S).real
    return k1 / (S * val)
