r"""Radially symmetric core problem of a single spot.

Solves

.. math::

    \Delta_\rho V - V + UV^2 = 0,\qquad \Delta_\rho U - UV^2 = 0,

with :math:`V\to 0`, :math:`U \sim S\log\rho + \chi(S)` as :math:`\rho\to\infty`,
its derivative with respect to :math:`S`, and the mode-1 adjoint problem whose
solution defines the integrals :math:`k_1(S)`, :math:`k_2(S)`.

The discretisation is a conservative cell-centred finite-volume scheme on a
uniform mesh :math:`\rho_i = ih`.  Because the flux form is exact at the
discrete level, the divergence identity :math:`2\pi S = \int UV^2\,dA`
holds to rounding with the finite-volume quadrature weights.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import simpson, trapezoid
from scipy.interpolate import CubicSpline

log = logging.getLogger(__name__)

S_MAX = 4.3
DEFAULT_R_MAX = 30.0
DEFAULT_POINTS = 6001
NEWTON_TOL = 1e-10
NEWTON_MAXIT = 40


class CoreConvergenceError(RuntimeError):
    """Newton iteration for the core problem did not converge."""


class StrengthRangeError(ValueError):
    """Requested spot strength lies outside (0, 4.3]."""


@dataclass
class CoreSolution:
    """Converged core profiles for strength ``S``."""

    strength: float
    grid: np.ndarray
    v0: np.ndarray
    u0: np.ndarray
    chi: float
    dv0_dS: np.ndarray
    du0_dS: np.ndarray
    chi_prime: float
    residual: float = 0.0
    weights: np.ndarray = field(repr=False, default=None)

    def divergence_defect(self) -> float:
        """Relative defect of ``2 pi S = int U V^2 dA`` (finite-volume weights)."""
        integral = 2 * np.pi * np.sum(self.weights * self.u0 * self.v0**2)
        return abs(integral - 2 * np.pi * self.strength) / (2 * np.pi * self.strength)


@dataclass
class AdjointSolution:
    strength: float
    grid: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    residual: float = 0.0


@dataclass(frozen=True)
class CoreIntegrals:
    strength: float
    k1: float
    k2: float


def _mesh(R_max, n_points):
    rho = np.linspace(0.0, R_max, n_points)
    h = rho[1] - rho[0]
    faces = np.concatenate([[0.0], rho[:-1] + 0.5 * h, [R_max]])
    # volume of cell i in the rho-weighted measure: int rho d rho
    vol = 0.5 * (faces[1:] ** 2 - faces[:-1] ** 2)
    return rho, h, faces, vol


def _laplacian(faces, h, n):
    """Flux-form radial Laplacian times cell volume, zero flux at both ends."""
    inner = faces[1:-1] / h           # face i+1/2 coefficient, i = 0..n-2
    main = np.zeros(n)
    main[:-1] -= inner
    main[1:] -= inner
    return sp.diags([inner, main, inner], [-1, 0, 1], format="csr")


def _initial_guess(rho, S):
    # small-S asymptotics: U ~ b/S, V ~ S w / b with w the 2-D ground state
    w = 4.8 * (1.0 / np.cosh(0.55 * rho)) ** 2
    b = 4.93
    v = S * w / b
    u = b / S + S * np.log1p(rho)
    return v, u


class _CoreSystem:
    def __init__(self, R_max, n_points):
        self.rho, self.h, self.faces, self.vol = _mesh(R_max, n_points)
        self.n = n_points
        self.R = R_max
        self.lap = _laplacian(self.faces, self.h, n_points)

    def residual(self, v, u, S):
        vol = self.vol
        fv = self.lap @ v + vol * (-v + u * v * v)
        fu = self.lap @ u - vol * u * v * v
        fu[-1] += S                       # R U'(R) = S
        return np.concatenate([fv, fu])

    def jacobian(self, v, u):
        vol = self.vol
        lap = self.lap
        jvv = lap + sp.diags(vol * (-1.0 + 2.0 * u * v))
        jvu = sp.diags(vol * v * v)
        juv = sp.diags(-2.0 * vol * u * v)
        juu = lap - sp.diags(vol * v * v)
        return sp.bmat([[jvv, jvu], [juv, juu]], format="csc")

    def newton(self, v, u, S, tol=NEWTON_TOL, maxit=NEWTON_MAXIT):
        n = self.n
        for it in range(maxit):
            f = self.residual(v, u, S)
            res = np.max(np.abs(f))
            if res < tol:
                return v, u, res, it
            step = spla.spsolve(self.jacobian(v, u), -f)
            lam = 1.0
            for _ in range(12):
                vt = v + lam * step[:n]
                ut = u + lam * step[n:]
                if np.max(np.abs(self.residual(vt, ut, S))) < (1 - 0.25 * lam) * res or lam < 1e-3:
                    break
                lam *= 0.5
            v, u = vt, ut
        f = self.residual(v, u, S)
        res = np.max(np.abs(f))
        if res < tol:
            return v, u, res, maxit
        raise CoreConvergenceError(f"core Newton failed at S={S}: residual {res:.3e}")


def _check_strength(S):
    if not (0.0 < S <= S_MAX):
        raise StrengthRangeError(f"S={S} outside admissible range (0, {S_MAX}]")


def solve_core(S: float, R_max: float = DEFAULT_R_MAX, n_points: int = DEFAULT_POINTS) -> CoreSolution:
    """Solve the core problem and its S-derivative.

    Parameters
    ----------
    S : float
        Spot strength, ``0 < S <= 4.3``.
    R_max : float
        Truncation radius (``>= 20``).
    n_points : int
        Number of mesh nodes on ``[0, R_max]``.

    Returns
    -------
    CoreSolution
    """
    _check_strength(S)
    if R_max < 20:
        raise ValueError("R_max must be at least 20")
    # continuation from small S on a coarse mesh, then refine
    coarse = _CoreSystem(R_max, min(n_points, 1201))
    s_path = [S] if S <= 0.6 else list(np.arange(0.5, S, 0.35)) + [S]
    v, u = _initial_guess(coarse.rho, s_path[0])
    for s in s_path:
        v, u, res, _ = coarse.newton(v, u, s, tol=1e-8)
    sysm = _CoreSystem(R_max, n_points)
    v = np.interp(sysm.rho, coarse.rho, v)
    u = np.interp(sysm.rho, coarse.rho, u)
    v, u, res, _ = sysm.newton(v, u, S)
    jac = sysm.jacobian(v, u)
    rhs = np.zeros(2 * n_points)
    rhs[-1] = -1.0
    d = spla.spsolve(jac, rhs)
    dv, du = d[:n_points], d[n_points:]
    logR = np.log(R_max)
    return CoreSolution(
        strength=S, grid=sysm.rho, v0=v, u0=u,
        chi=float(u[-1] - S * logR),
        dv0_dS=dv, du0_dS=du,
        chi_prime=float(du[-1] - logR),
        residual=float(res), weights=sysm.vol,
    )


def solve_adjoint(core: CoreSolution) -> AdjointSolution:
    """Mode-1 adjoint solution normalised by ``rho * p2 -> 1``.

    The far-field behaviour is imposed by Dirichlet data ``p1(R) = 0``,
    ``p2(R) = 1/R``; the growing homogeneous solution is excluded because the
    decaying null vector satisfies these to exponential accuracy.
    """
    rho = core.grid
    n = rho.size
    h = rho[1] - rho[0]
    R = rho[-1]
    v, u = core.v0, core.u0
    # interior nodes 1..n-2 in finite-volume form, divided through by rho_i h
    idx = np.arange(1, n - 1)
    ri = rho[idx]
    lo = (ri - 0.5 * h) / (ri * h * h)
    hi = (ri + 0.5 * h) / (ri * h * h)
    mid = -(lo + hi) - 1.0 / ri**2
    m = n - 2

    def block(diag_extra):
        return sp.diags([lo[1:], mid + diag_extra, hi[:-1]], [-1, 0, 1], shape=(m, m))

    a11 = block(-1.0 + 2.0 * u[idx] * v[idx])
    a12 = sp.diags(-2.0 * u[idx] * v[idx])
    a21 = sp.diags(v[idx] ** 2)
    a22 = block(-v[idx] ** 2)
    mat = sp.bmat([[a11, a12], [a21, a22]], format="csc")
    rhs = np.zeros(2 * m)
    # boundary values p(0) = 0, p1(R) = 0, p2(R) = 1/R
    rhs[2 * m - 1] -= hi[-1] * (1.0 / R)
    sol = spla.spsolve(mat, rhs)
    res = np.max(np.abs(mat @ sol - rhs))
    p1 = np.concatenate([[0.0], sol[:m], [0.0]])
    p2 = np.concatenate([[0.0], sol[m:], [1.0 / R]])
    return AdjointSolution(strength=core.strength, grid=rho, p1=p1, p2=p2, residual=float(res))


def compute_k_integrals(core: CoreSolution, adj: AdjointSolution, rule: str = "simpson") -> CoreIntegrals:
    """``k1 = int V0' P1 rho`` and ``k2 = int (U0 - chi)(rho P2)'``.

    Both integrands decay exponentially (``rho P2`` is constant in the far
    field), so no tail correction beyond ``R_max`` is needed.
    """
    if core.strength != adj.strength:
        raise ValueError("core and adjoint solutions have different strengths")
    rho = core.grid
    h = rho[1] - rho[0]
    dv = np.gradient(core.v0, h, edge_order=2)
    drp = np.gradient(rho * adj.p2, h, edge_order=2)
    integ = simpson if rule == "simpson" else trapezoid
    k1 = integ(dv * adj.p1 * rho, x=rho)
    k2 = integ((core.u0 - core.chi) * drp, x=rho)
    return CoreIntegrals(core.strength, float(k1), float(k2))


@dataclass(frozen=True)
class CoreData:
    """Scalar core quantities for one strength."""

    strength: float
    chi: float
    chi_prime: float
    k1: float
    k2: float


def _raw_data(S, R_max, n_points):
    core = solve_core(S, R_max, n_points)
    ints = compute_k_integrals(core, solve_adjoint(core))
    return np.array([core.chi, core.chi_prime, ints.k1, ints.k2])


@functools.lru_cache(maxsize=512)
def core_data(S: float, R_max: float = DEFAULT_R_MAX, n_points: int = DEFAULT_POINTS,
              extrapolate: bool = True) -> CoreData:
    """Cached ``(chi, chi', k1, k2)`` at strength ``S``.

    With ``extrapolate`` the values from meshes with ``n_points`` and
    ``(n_points + 1) // 2`` nodes are combined by Richardson extrapolation,
    which removes the O(h^2) error of the scheme.
    """
    S = float(S)
    fine = _raw_data(S, R_max, n_points)
    if extrapolate:
        coarse = _raw_data(S, R_max, (n_points + 1) // 2)
        fine = (4.0 * fine - coarse) / 3.0
    return CoreData(S, *map(float, fine))


class CoreTable:
    """Cubic-spline interpolant of the core quantities on ``[s_min, 4.3]``.

    Used where many nearby strengths are needed (Newton Jacobians).  Nodes
    are graded towards small ``S`` where ``chi ~ 1/S`` varies fastest.
    """

    def __init__(self, s_min: float = 0.5, s_max: float = S_MAX, n: int = 36, cache: bool = True):
        self.s = np.unique(np.concatenate([np.geomspace(s_min, 1.0, n // 3),
                                           np.linspace(1.0, s_max, n - n // 3)]))
        path = _cache_path(self.s)
        data = None
        if cache and path.exists():
            try:
                data = np.load(path)["data"]
            except (OSError, ValueError, KeyError):
                data = None
        if data is None:
            data = np.array([[getattr(core_data(float(s)), f) for f in ("chi", "chi_prime", "k1", "k2")]
                             for s in self.s])
            if cache:
                try:
                    path.parent.mkdir(parents=True, exist_ok=True)
                    np.savez(path, data=data, s=self.s)
                except OSError:
                    log.debug("could not write core table cache %s", path)
        self.data = data
        self._chi = CubicSpline(self.s, data[:, 0])
        self._chip = CubicSpline(self.s, data[:, 1])
        self._k1 = CubicSpline(self.s, data[:, 2])
        self._k2 = CubicSpline(self.s, data[:, 3])

    def chi(self, S):
        return self._chi(S)

    def chi_prime(self, S):
        return self._chip(S)

    def k1(self, S):
        return self._k1(S)

    def k2(self, S):
        return self._k2(S)


def _cache_path(nodes):
    import hashlib
    import os
    from pathlib import Path
    key = hashlib.sha1(np.asarray(nodes).tobytes() + f"{DEFAULT_R_MAX}-{DEFAULT_POINTS}".encode()).hexdigest()[:12]
    root = Path(os.environ.get("SPOTHOPF_CACHE", Path.home() / ".cache" / "spothopf"))
    return root / f"core_table_{key}.npz"


@functools.lru_cache(maxsize=1)
def default_table() -> CoreTable:
    return CoreTable()
