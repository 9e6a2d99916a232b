"""N-spot equilibria: strengths, locations and the inhibitor mean.

Unknowns are the spot locations and strengths; the constant ``ubar`` is
eliminated by differencing the matching conditions and recovered after
convergence.  The system is

* force balance ``S_j grad R_jj + sum_{i != j} S_i grad G_ji = 0`` (2N rows),
* matching ``S_j + nu (2 pi (calG s)_j + chi(S_j)) = nu ubar`` (N - 1 differences),
* solvability ``2 pi sum S_j = A |Omega|`` (1 row).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import S_MAX, default_table
from .greens.base import TWO_PI, GreensDomain

log = logging.getLogger(__name__)


class EquilibriumError(RuntimeError):
    pass


class SpotCollisionError(EquilibriumError):
    pass


@dataclass(frozen=True)
class SchnakenbergParams:
    """Scaled model parameters.

    ``nu = -1/log(epsilon)``.
    """

    epsilon: float
    feed: float

    def __post_init__(self):
        if not (0.0 < self.epsilon < 0.2):
            raise ValueError("epsilon must lie in (0, 0.2)")
        if self.feed <= 0:
            raise ValueError("feed rate must be positive")

    @property
    def nu(self) -> float:
        return -1.0 / np.log(self.epsilon)

    @classmethod
    def from_strength(cls, epsilon, strength, n_spots, area):
        """Feed rate giving common strength ``strength`` to ``n_spots`` spots."""
        return cls(epsilon, TWO_PI * n_spots * strength / area)


@dataclass
class SpotConfiguration:
    locations: np.ndarray
    strengths: np.ndarray
    ubar: float = float("nan")
    residual: float = float("inf")
    converged: bool = False
    info: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.strengths)

    def to_dict(self):
        return {
            "locations": self.locations.tolist(),
            "strengths": self.strengths.tolist(),
            "ubar": self.ubar,
            "residual": self.residual,
            "converged": self.converged,
        }


def ring_init(N: int, radius: float, strength: float = 1.0, phase: float = 0.0) -> SpotConfiguration:
    """``N`` equally spaced spots on a circle of given radius."""
    if N < 1:
        raise ValueError("N must be positive")
    if N == 1:
        locs = np.zeros((1, 2))
    else:
        ang = phase + 2.0 * np.pi * np.arange(N) / N
        locs = radius * np.column_stack([np.cos(ang), np.sin(ang)])
    return SpotConfiguration(locs, np.full(N, float(strength)))


def line_init(N: int, width: float, height: float, strength: float = 1.0) -> SpotConfiguration:
    """Spots at ``((k - 1/2) width / N, height / 2)``, ``k = 1..N``."""
    if N < 1:
        raise ValueError("N must be positive")
    xs = (np.arange(1, N + 1) - 0.5) * width / N
    locs = np.column_stack([xs, np.full(N, 0.5 * height)])
    return SpotConfiguration(locs, np.full(N, float(strength)))


def _interaction(domain, X):
    """Neumann matrix calG (regular parts on the diagonal) and gradients grad G(x_j; x_i)."""
    v, dx, dxx = domain.neumann_regular_pairs(X, X)
    N = len(X)
    d = X[:, None, :] - X[None, :, :]
    r2 = np.sum(d**2, axis=-1)
    np.fill_diagonal(r2, 1.0)
    off = ~np.eye(N, dtype=bool)
    G = v.copy()
    G[off] += (-0.5 * np.log(r2) / TWO_PI)[off]
    grad = dx.copy()
    grad[off] += (-d / (TWO_PI * r2[..., None]))[off]
    eye = np.eye(2)[None, None]
    hfree = -(eye / r2[..., None, None] - 2.0 * d[..., :, None] * d[..., None, :] / r2[..., None, None] ** 2) / TWO_PI
    hess = dxx.copy()
    hess[off] += hfree[off]
    return G, grad, hess


def equilibrium_residual(domain: GreensDomain, params: SchnakenbergParams, X, S, chi=None):
    """Residual vector of the reduced 3N system (see module docstring)."""
    N = len(S)
    G, grad, _ = _interaction(domain, X)
    force = np.einsum("jik,i->jk", grad, S).ravel()
    rows = [force]
    if N > 1:
        nu = params.nu
        chis = chi(S) if chi is not None else default_table().chi(S)
        match = S + nu * (TWO_PI * G @ S + chis)
        rows.append(match[1:] - match[0])
    rows.append([(TWO_PI * np.sum(S) - params.feed * domain.area) / TWO_PI])
    return np.concatenate(rows)


def solve_equilibrium(domain: GreensDomain, params: SchnakenbergParams, init: SpotConfiguration,
                      tol: float = 1e-10, maxit: int = 50, fd_step: float = 1e-6,
                      chi=None) -> SpotConfiguration:
    """Damped Newton solve for an N-spot equilibrium.

    Parameters
    ----------
    domain : GreensDomain
    params : SchnakenbergParams
    init : SpotConfiguration
        Initial guess; its strengths are rescaled to satisfy solvability.
    tol : float
        Residual infinity-norm target (raised to the backend's ``residual_floor``).
    chi : callable, optional
        ``S -> chi(S)``; defaults to the tabulated core solution.

    Returns
    -------
    SpotConfiguration
        ``converged`` is False (with the best iterate) if Newton stalls.
    """
    tol = max(tol, domain.residual_floor)
    N = init.n
    X = np.array(init.locations, float).reshape(N, 2)
    S0 = np.asarray(init.strengths, float)
    S = S0 * params.feed * domain.area / (TWO_PI * np.sum(S0))
    for x in X:
        domain.check_source(x)
    _check_separation(X, params.epsilon)
    if N > 1 and chi is None:
        table = default_table()
        chi = table.chi

    def F(z):
        return equilibrium_residual(domain, params, z[: 2 * N].reshape(N, 2), z[2 * N:], chi)

    z = np.concatenate([X.ravel(), S])
    f = F(z)
    res = np.max(np.abs(f))
    it = 0
    for it in range(maxit):
        if res < tol:
            break
        J = np.empty((3 * N, 3 * N))
        for c in range(3 * N):
            e = np.zeros(3 * N)
            e[c] = fd_step
            J[:, c] = (F(z + e) - F(z - e)) / (2 * fd_step)
        step = np.linalg.lstsq(J, -f, rcond=None)[0]
        lam = 1.0
        for _ in range(9):
            zt = z + lam * step
            Xt = zt[: 2 * N].reshape(N, 2)
            ok = all(domain.contains(x) for x in Xt) and np.all(zt[2 * N:] > 0)
            if ok:
                ft = F(zt)
                rt = np.max(np.abs(ft))
                if rt < res or lam < 2e-3:
                    break
            lam *= 0.5
        else:
            break
        z, f, res = zt, ft, rt
        _check_separation(z[: 2 * N].reshape(N, 2), params.epsilon)
    X = z[: 2 * N].reshape(N, 2)
    S = z[2 * N:]
    G, _, _ = _interaction(domain, X)
    nu = params.nu
    chis = chi(S) if N > 1 else _chi_scalar(S)
    ubar = float(np.mean(S / nu + TWO_PI * G @ S + chis))
    if np.any(S > S_MAX):
        log.warning("strength above self-replication bound: %s", S)
    return SpotConfiguration(X, S, ubar, float(res), bool(res < tol), {"iterations": it})


def _chi_scalar(S):
    from .core import core_data
    return np.array([core_data(float(s)).chi for s in S])


def _check_separation(X, eps):
    N = len(X)
    if N < 2:
        return
    d = np.hypot(*(X[:, None, :] - X[None, :, :]).transpose(2, 0, 1))
    d[np.eye(N, dtype=bool)] = np.inf
    if d.min() < 10 * eps:
        raise SpotCollisionError(f"spot separation {d.min():.3g} below 10*eps")


def neumann_hessian_sum(domain: GreensDomain, X, S):
    """``calH_j = sum_i S_i H_ji`` (regular-part Hessian on the diagonal)."""
    _, _, hess = _interaction(domain, np.asarray(X, float))
    return np.einsum("jikl,i->jkl", hess, np.asarray(S, float))
