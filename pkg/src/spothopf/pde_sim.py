r"""Direct simulation of the Schnakenberg system on a cut-cell grid.

.. math::

    v_t = \varepsilon^2\Delta v - v + uv^2,\qquad
    \tau u_t = \Delta u + A - \varepsilon^{-2}uv^2,\qquad
    \partial_n u = \partial_n v = 0.

Space: cell-centred finite volumes on a Cartesian grid with the boundary
embedded through cut-cell face apertures (the geometry of
:class:`~spothopf.greens.GriddedDomain`).  Time: second-order Strang splitting
of a pointwise trapezoidal reaction step and a Crank-Nicolson diffusion step
with cached sparse factorizations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.ndimage import maximum_filter
from scipy.optimize import least_squares

from .core import solve_core
from .equilibrium import SchnakenbergParams, SpotConfiguration
from .greens import Disk, GreensDomain, GriddedDomain, HalfDisk, PerturbedDisk, Rectangle

log = logging.getLogger(__name__)

CLASSES = ("decaying", "growing", "saturated")


class SimulationError(RuntimeError):
    """Blow-up or loss of positivity."""


class ThresholdError(ValueError):
    """Bracket ends share a classification."""


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

def sim_grid(domain: GreensDomain, h: float, segments: int | None = None) -> GriddedDomain:
    """Cut-cell grid of spacing ``h`` covering ``domain``."""
    if isinstance(domain, GriddedDomain):
        if abs(domain.h - h) < 1e-14:
            return domain
        return GriddedDomain(domain.vertices, domain.holes, h)
    if isinstance(domain, Rectangle):
        return GriddedDomain.rectangle(domain.width, domain.height, h=h)
    n = segments or max(256, int(np.ceil(8.0 * np.pi / h)))
    th = 2.0 * np.pi * np.arange(n) / n
    if isinstance(domain, HalfDisk):
        th = np.pi * np.arange(n + 1) / n
        r = domain.radius
        return GriddedDomain(np.column_stack([r * np.cos(th), r * np.sin(th)]), h=h)
    if isinstance(domain, PerturbedDisk):
        r = domain.radius(th)
    elif isinstance(domain, Disk):
        r = np.full(n, domain.radius)
    else:
        raise TypeError(f"no simulation grid for {type(domain).__name__}")
    return GriddedDomain(np.column_stack([r * np.cos(th), r * np.sin(th)]), h=h)


# ---------------------------------------------------------------------------
# state and trajectory
# ---------------------------------------------------------------------------

@dataclass
class SimState:
    """Fields on the active cells of ``grid`` at ``time``.

    ``tau`` is the unscaled reaction time constant.
    """

    grid: GriddedDomain
    v: np.ndarray
    u: np.ndarray
    time: float
    params: SchnakenbergParams
    tau: float = float("nan")

    def copy(self):
        return SimState(self.grid, self.v.copy(), self.u.copy(), self.time, self.params, self.tau)

    def to_array(self, values):
        """Values on the ``(nx, ny)`` grid, zero on inactive cells."""
        out = np.zeros((self.grid.nx, self.grid.ny))
        out[self.grid.active] = values
        return out

    def balance_defect(self) -> float:
        """Relative defect of ``A|Omega| = eps^-2 int u v^2``."""
        eps, A = self.params.epsilon, self.params.feed
        vol = self.grid.volumes
        lhs = A * np.sum(vol)
        return abs(lhs - np.sum(vol * self.u * self.v**2) / eps**2) / lhs


@dataclass
class SimTrajectory:
    """Tracked spot centres.

    ``envelope_rate`` and ``fit_r2`` have shape ``(N, 2)``: one fit of
    ``c0 + c1 t + e^{rt}(a cos wt + b sin wt)`` per spot coordinate.
    """

    times: np.ndarray
    centers: np.ndarray
    envelope_rate: np.ndarray
    frequency: np.ndarray
    fit_r2: np.ndarray
    classification: str
    tau: float
    aborted: str | None = None
    final: SimState | None = field(default=None, repr=False)

    @property
    def rate(self) -> float:
        """Rate of the dominant fitted component."""
        return float(self._dominant()[0])

    def _dominant(self):
        # components that have died down to tracking noise carry meaningless fits
        tail = self.centers[2 * len(self.times) // 3:]
        amp = np.ptp(tail, axis=0)
        keep = amp >= 0.05 * amp.max()
        rates = np.where(keep, self.envelope_rate, -np.inf)
        j, c = np.unravel_index(np.argmax(rates), rates.shape)
        return self.envelope_rate[j, c], (j, c)

    def principal_direction(self, t_min: float = 0.0, spot: int = 0):
        """Leading principal axis of the detrended trajectory of one spot."""
        m = self.times >= t_min
        t = self.times[m]
        x = self.centers[m, spot, :]
        basis = np.column_stack([np.ones_like(t), t])
        resid = x - basis @ np.linalg.lstsq(basis, x, rcond=None)[0]
        _, s, vt = np.linalg.svd(resid, full_matrices=False)
        d = vt[0]
        return d * np.sign(d[np.argmax(np.abs(d))]), s

    def to_dict(self):
        return {"tau": self.tau, "classification": self.classification,
                "envelope_rate": self.envelope_rate.tolist(),
                "frequency": self.frequency.tolist(), "fit_r2": self.fit_r2.tolist(),
                "aborted": self.aborted, "n_frames": int(len(self.times))}


# ---------------------------------------------------------------------------
# initial data and steady states
# ---------------------------------------------------------------------------

def asymptotic_state(domain: GreensDomain, grid: GriddedDomain, params: SchnakenbergParams,
                     config: SpotConfiguration) -> SimState:
    """Composite equilibrium: core profiles near each spot, Green's function outside.

    ``u = ubar + sum_j [U_j(rho_j) - chi_j + S_j log eps - 2 pi S_j W(x; x_j)]``
    with ``W`` the regular part of the Neumann function.
    """
    eps = params.epsilon
    X = np.asarray(config.locations, float).reshape(-1, 2)
    c = grid.centers
    W, _, _ = domain.neumann_regular_pairs(c, X)
    u = np.full(len(c), config.ubar)
    v = np.zeros(len(c))
    for j, (x, S) in enumerate(zip(X, config.strengths)):
        core = solve_core(float(S))
        rho = np.hypot(*(c - x).T) / eps
        far = S * np.log(np.maximum(rho, 1e-300)) + core.chi
        inner = np.where(rho <= core.grid[-1], np.interp(rho, core.grid, core.u0), far)
        u += inner - core.chi + S * np.log(eps) - 2.0 * np.pi * S * W[:, j]
        v += np.interp(rho, core.grid, core.v0, right=0.0)
    return SimState(grid, np.maximum(v, 1e-12), np.maximum(u, 1e-12), 0.0, params)


def _residual(grid, params, v, u):
    eps, A = params.epsilon, params.feed
    L, vol = grid.laplacian, grid.volumes
    fv = eps**2 * (L @ v) + vol * (-v + u * v * v)
    fu = L @ u + vol * (A - u * v * v / eps**2)
    return fv, fu


def steady_state(state: SimState, tol: float = 1e-10, maxit: int = 30) -> SimState:
    """Newton solve of the discrete steady equations, which do not involve ``tau``.

    The residual is the cell-volume weighted defect scaled by ``A |Omega|``.
    """
    grid, params = state.grid, state.params
    eps = params.epsilon
    L, vol = grid.laplacian, grid.volumes
    n = grid.n_active
    scale = params.feed * np.sum(vol)
    v, u = state.v.copy(), state.u.copy()
    res = np.inf
    for _ in range(maxit):
        fv, fu = _residual(grid, params, v, u)
        res = max(np.max(np.abs(fv)), np.max(np.abs(fu))) / scale
        if res < tol:
            break
        J = sp.bmat([[eps**2 * L + sp.diags(vol * (-1.0 + 2.0 * u * v)), sp.diags(vol * v * v)],
                     [sp.diags(-vol * 2.0 * u * v / eps**2), L - sp.diags(vol * v * v / eps**2)]],
                    format="csc")
        d = spla.spsolve(J, -np.concatenate([fv, fu]))
        lam = 1.0
        while lam > 1e-3:
            vt, ut = v + lam * d[:n], u + lam * d[n:]
            if np.all(vt > 0) and np.all(ut > 0):
                break
            lam *= 0.5
        v, u = vt, ut
    else:
        fv, fu = _residual(grid, params, v, u)
        res = max(np.max(np.abs(fv)), np.max(np.abs(fu))) / scale
    if not res < tol:
        raise SimulationError(f"steady-state Newton stalled at residual {res:.3g}")
    out = SimState(grid, v, u, state.time, params, state.tau)
    return out


def kick(state: SimState, delta) -> SimState:
    """Translate ``v`` by the small vector ``delta`` (first-order Taylor shift)."""
    delta = np.asarray(delta, float)
    arr = state.to_array(state.v)
    gx, gy = np.gradient(arr, state.grid.h)
    grad = np.column_stack([gx[state.grid.active], gy[state.grid.active]])
    out = state.copy()
    out.v = np.maximum(state.v - grad @ delta, 1e-12)
    return out


# ---------------------------------------------------------------------------
# spot tracking
# ---------------------------------------------------------------------------

def _quadratic_peak(grid, v, x0, radius, iterations=3):
    """Peak of a weighted least-squares quadratic fit of ``log v`` around ``x0``.

    The weights ``(1 - r^2/R^2)^2`` vanish smoothly at the window edge, so the
    estimate moves continuously as the spot crosses cell boundaries.
    """
    h = grid.h
    for _ in range(iterations):
        d = grid.centers - x0
        r = np.hypot(d[:, 0], d[:, 1])
        m = r < radius
        w = (1.0 - (r[m] / radius) ** 2) ** 2
        p, q = d[m, 0] / h, d[m, 1] / h
        M = np.column_stack([np.ones_like(p), p, q, p * p, p * q, q * q])
        c = np.linalg.lstsq(M * w[:, None], np.log(v[m]) * w, rcond=None)[0]
        Hm = np.array([[2.0 * c[3], c[4]], [c[4], 2.0 * c[5]]])
        off = np.linalg.solve(Hm, -c[1:3])
        if not np.all(np.isfinite(off)) or np.max(np.abs(off)) > 2.0:
            break
        x0 = x0 + h * off
    return x0


def locate_spots(state: SimState, rel_height: float = 0.25, radius: float = 3.5):
    """Spot centres: local maxima of ``v`` refined by a quadratic fit of ``log v``.

    ``radius`` is the fit window in grid spacings.
    """
    grid = state.grid
    arr = state.to_array(state.v)
    peak = maximum_filter(arr, size=5, mode="constant")
    cand = (arr == peak) & (arr > rel_height * arr.max()) & grid.active
    out = []
    for i, j in zip(*np.nonzero(cand)):
        x0 = grid.centers[grid.index[i, j]]
        out.append(_quadratic_peak(grid, state.v, x0, radius * grid.h))
    out = np.array(out).reshape(-1, 2)
    # plateaus give several maxima per spot
    keep = []
    for x in out:
        if all(np.linalg.norm(x - y) > 2.0 * grid.h for y in keep):
            keep.append(x)
    return np.array(keep).reshape(-1, 2)


def _match(prev, new):
    """Reorder ``new`` to follow ``prev`` (nearest neighbour)."""
    d = np.linalg.norm(prev[:, None, :] - new[None, :, :], axis=-1)
    return new[np.argmin(d, axis=1)]


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------

class _Stepper:
    """Strang splitting: half reaction, Crank-Nicolson diffusion, half reaction.

    The pointwise reaction substep is the trapezoidal rule, solved by Newton
    from a semi-implicit Euler guess, so the whole step is second order.
    """

    def __init__(self, state: SimState, tau: float):
        self.grid = state.grid
        self.eps = state.params.epsilon
        self.A = state.params.feed
        self.tau = tau
        self._lu = {}

    def _solvers(self, dt):
        key = round(dt, 14)
        if key not in self._lu:
            L, vol = self.grid.laplacian, sp.diags(self.grid.volumes)
            a, b = 0.5 * dt * self.eps**2, 0.5 * dt / self.tau
            self._lu[key] = (spla.factorized((vol - a * L).tocsc()), (vol + a * L).tocsr(),
                             spla.factorized((vol - b * L).tocsc()), (vol + b * L).tocsr())
        return self._lu[key]

    def _rates(self, v, u):
        uvv = u * v * v
        return -v + uvv, (self.A - uvv / self.eps**2) / self.tau

    def react(self, v, u, h, newton=3):
        e2t = self.eps**2 * self.tau
        fv0, fu0 = self._rates(v, u)
        v1 = v * (1.0 + h * u * v) / (1.0 + h)
        u1 = (u + h * self.A / self.tau) / (1.0 + h * v1 * v1 / e2t)
        for _ in range(newton):
            fv, fu = self._rates(v1, u1)
            rv = v1 - v - 0.5 * h * (fv0 + fv)
            ru = u1 - u - 0.5 * h * (fu0 + fu)
            a = 1.0 - 0.5 * h * (-1.0 + 2.0 * u1 * v1)
            b = -0.5 * h * v1 * v1
            c = h * u1 * v1 / e2t
            d = 1.0 + 0.5 * h * v1 * v1 / e2t
            det = a * d - b * c
            v1 = v1 - (d * rv - b * ru) / det
            u1 = u1 - (a * ru - c * rv) / det
        return v1, u1

    def step(self, v, u, dt):
        v, u = self.react(v, u, 0.5 * dt)
        sv, mv, su, mu = self._solvers(dt)
        return self.react(sv(mv @ v), su(mu @ u), 0.5 * dt)


def _fit_envelope(t, x, omega_hint=None):
    """Fit ``c0 + c1 t + e^{r t}(a cos wt + b sin wt)``; returns ``(r, w, R^2)``."""
    t0 = t[0]
    s = t - t0
    base = np.column_stack([np.ones_like(s), s])
    resid = x - base @ np.linalg.lstsq(base, x, rcond=None)[0]
    sst = np.sum((x - x.mean()) ** 2)
    if sst == 0.0 or np.ptp(resid) == 0.0:
        return 0.0, 0.0, 0.0
    if omega_hint is None:
        dt = np.median(np.diff(t))
        spec = np.abs(np.fft.rfft(resid * np.hanning(len(resid))))
        freqs = 2.0 * np.pi * np.fft.rfftfreq(len(resid), dt)
        omega_hint = freqs[1 + np.argmax(spec[1:])]

    def design(p):
        r, w = p
        e = np.exp(r * s)
        return np.column_stack([base, e * np.cos(w * s), e * np.sin(w * s)])

    def fun(p):
        D = design(p)
        c = np.linalg.lstsq(D, x, rcond=None)[0]
        return D @ c - x

    span = s[-1]
    best = None
    for w0 in (omega_hint, 0.8 * omega_hint, 1.25 * omega_hint):
        sol = least_squares(fun, [0.0, w0], bounds=([-20.0 / span, 0.2 * w0], [20.0 / span, 5.0 * w0]))
        if best is None or sol.cost < best.cost:
            best = sol
    r2 = 1.0 - 2.0 * best.cost / sst
    return float(best.x[0]), float(best.x[1]), float(r2)


def _classify(t, x, rate, rate_tol):
    if rate > rate_tol:
        # growth that stops in the last third counts as saturated
        n = len(t)
        a = np.ptp(x[n // 3: 2 * n // 3])
        b = np.ptp(x[2 * n // 3:])
        grown = np.exp(rate * (t[-1] - t[2 * n // 3]))
        if b < 1.1 * a and grown > 1.5:
            return "saturated"
        return "growing"
    return "decaying"


def simulate(domain: GreensDomain, params: SchnakenbergParams, tau_unscaled: float, t_end: float,
             init, h: float | None = None, dt_max: float = 0.02, kick_vector=(1e-3, 0.0),
             record_every: float = 0.5, t_skip: float | None = None, omega_hint=None,
             rate_tol: float = 0.0, reaction_cfl: float = 0.2, max_blowup: float = 1e6,
             grid: GriddedDomain | None = None) -> SimTrajectory:
    """Evolve from ``init`` and fit the growth of the spot oscillations.

    Parameters
    ----------
    domain : GreensDomain
        Geometry and Green's data for the asymptotic initial state.
    params : SchnakenbergParams
    tau_unscaled : float
        ``tau = tau_hat / eps^2``.
    t_end : float
    init : SimState or SpotConfiguration
        A configuration is turned into the composite asymptotic state, polished
        to the discrete steady state and kicked by ``kick_vector``.  A state is
        used as given.
    h : float, optional
        Grid spacing, default ``eps / 3``.
    dt_max : float
        Largest time step; the step is halved while ``dt max(uv) > reaction_cfl``.
    t_skip : float, optional
        Transient excluded from the envelope fit (default ``t_end / 6``).
    rate_tol : float
        Rates above this count as growth.

    Returns
    -------
    SimTrajectory
    """
    eps = params.epsilon
    if eps < 0.03:
        raise ValueError("desk-scale simulation needs eps >= 0.03")
    if tau_unscaled <= 0:
        raise ValueError("tau must be positive")
    h = h or eps / 3.0
    if h > eps / 3.0 + 1e-12:
        raise ValueError("grid spacing must satisfy h <= eps/3")
    if isinstance(init, SimState):
        state = init.copy()
    else:
        grid = grid or sim_grid(domain, h)
        state = steady_state(asymptotic_state(domain, grid, params, init))
        state = kick(state, kick_vector)
    state.tau = tau_unscaled
    stepper = _Stepper(state, tau_unscaled)
    v, u = state.v, state.u
    centers = [locate_spots(state)]
    n_spots = len(centers[0])
    times = [0.0]
    t = 0.0
    next_rec = record_every
    aborted = None
    while t < t_end - 1e-12:
        dt = min(dt_max, next_rec - t)
        stiff = float(np.max(u * v))
        while dt * stiff > reaction_cfl and dt > 1e-6:
            dt *= 0.5
        v, u = stepper.step(v, u, dt)
        t += dt
        if t >= next_rec - 1e-12:
            if not (np.all(np.isfinite(v)) and v.max() < max_blowup and u.max() < max_blowup):
                raise SimulationError(f"blow-up at t={t:.4g}")
            snap = SimState(state.grid, v, u, t, params, tau_unscaled)
            found = locate_spots(snap)
            if len(found) != n_spots:
                aborted = f"spot count changed from {n_spots} to {len(found)} at t={t:.4g}"
                log.warning(aborted)
                break
            centers.append(_match(centers[-1], found))
            times.append(t)
            next_rec += record_every
    times = np.array(times)
    centers = np.array(centers)
    final = SimState(state.grid, v, u, t, params, tau_unscaled)
    t_skip = t_end / 6.0 if t_skip is None else t_skip
    m = times >= t_skip
    rates = np.zeros((n_spots, 2))
    freqs = np.zeros((n_spots, 2))
    r2 = np.zeros((n_spots, 2))
    if m.sum() >= 16:
        for j in range(n_spots):
            for c in range(2):
                rates[j, c], freqs[j, c], r2[j, c] = _fit_envelope(times[m], centers[m, j, c], omega_hint)
    traj = SimTrajectory(times, centers, rates, freqs, r2, "decaying", tau_unscaled, aborted, final)
    if m.sum() >= 16:
        rate, (j, c) = traj._dominant()
        traj.classification = _classify(times[m], centers[m, j, c], rate, rate_tol)
    return traj


# ---------------------------------------------------------------------------
# threshold detection
# ---------------------------------------------------------------------------

def detect_threshold(domain: GreensDomain, params: SchnakenbergParams, bracket, tol: float = 0.005,
                     runner=None, history: list | None = None, **sim_kw) -> float:
    """Bisection in the scaled ``tau_hat = eps^2 tau`` on the simulated classification.

    Parameters
    ----------
    bracket : (float, float)
        Scaled values ``(tau_lo, tau_hi)`` with different classifications.
    tol : float
        Final bracket width in ``tau_hat``.
    runner : callable, optional
        ``tau_hat -> SimTrajectory``; default runs :func:`simulate` with ``sim_kw``
        (``t_end`` and ``init`` are required there).
    history : list, optional
        Receives ``(tau_hat, classification, rate)`` of every run.

    Returns
    -------
    float
        Midpoint of the final bracket.
    """
    eps = params.epsilon
    if runner is None:
        def runner(th):
            return simulate(domain, params, th / eps**2, **sim_kw)
    history = [] if history is None else history

    def unstable(th):
        tr = runner(th)
        history.append((th, tr.classification, tr.rate))
        return tr.classification != "decaying"

    lo, hi = sorted(map(float, bracket))
    at_lo, at_hi = unstable(lo), unstable(hi)
    if at_lo == at_hi:
        raise ThresholdError(f"classification agrees at both ends of {bracket}")
    if at_lo:
        raise ThresholdError("growth below, decay above: bracket inverted")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if unstable(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
