r"""First-order threshold corrections for a spot in a perturbed unit disk.

For ``r = 1 + sigma f(theta)`` only the mode-2 content
``a2 cos 2theta + b2 sin 2theta = c cos 2(theta - phi/2)`` changes the local
Green's data of a centred spot at O(sigma).  In the frame rotated by
``phi/2`` the corrections are diagonal:

.. math::

    \delta H = \frac{c}{\pi}\,\mathrm{diag}(-1, 1),\qquad
    \delta(\mathcal F_\mu - H_\mu) = c\,T(k)\,\mathrm{diag}(1,-1),\qquad
    T(k) = \frac{1-k^2}{8\pi I_1'(k)^2} = \frac{k}{8\pi I_1'(k)}\big(2F_1(1) - F_1''(1)\big),

with ``k = sqrt(mu)`` and ``F_n(rho) = K_n(k rho) - K_n'(k) I_n(k rho)/I_n'(k)``.
Each axis then obeys the one-spot scalar equation
``g(omega) = i k1 lambda`` with ``g`` shifted by ``4 pi S sigma delta_a``.
Linearising about the unit-disk root ``omega_0 = i w_0`` gives

.. math::

    \tilde\omega_1 = \frac{\mathrm{Re}\,\delta g}{\mathrm{Im}\,g'},\qquad
    \lambda_{I1} = \frac{\mathrm{Re}\,g'\,\tilde\omega_1 + \mathrm{Im}\,\delta g}{k_1},\qquad
    \hat\tau_1 = \frac{\tilde\omega_1 - \hat\tau_0\lambda_{I1}}{\lambda_{I0}},

where ``g'/S = log(e^gamma eps/2) + log(omega_0)/2 + 1/2 - K_1'/I_1' - omega_0 Q + k2/S``
and ``Q(z) = d/d omega [K_1'(z)/I_1'(z)]``, ``z = sqrt(omega)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import core_data
from .equilibrium import SchnakenbergParams
from .hopf import FOUR_PI, tau0_from_frequency, universal_frequency
from .special import EULER_GAMMA, bessel_i_seq, bessel_k_seq, i_derivs, k_derivs


@dataclass
class PerturbationSpec:
    """Boundary ``r = 1 + sigma f(theta)``, ``f = sum a_m cos m theta + b_m sin m theta``."""

    sigma: float
    fourier_cos: np.ndarray
    fourier_sin: np.ndarray = None

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        self.fourier_cos = np.asarray(self.fourier_cos, float)
        if self.fourier_sin is None:
            self.fourier_sin = np.zeros_like(self.fourier_cos)
        self.fourier_sin = np.asarray(self.fourier_sin, float)
        if self.fourier_sin.shape != self.fourier_cos.shape:
            raise ValueError("fourier_cos and fourier_sin must have equal length")

    def _mode(self, arr, m):
        return float(arr[m]) if len(arr) > m else 0.0

    @property
    def a2(self) -> float:
        return self._mode(self.fourier_cos, 2)

    @property
    def b2(self) -> float:
        return self._mode(self.fourier_sin, 2)

    @property
    def phi(self):
        """Angle with ``cos phi = a2/sqrt(a2^2 + b2^2)``; ``None`` without mode 2."""
        return _angle(self.a2, self.b2)

    @classmethod
    def from_function(cls, sigma, f, n_samples: int = 256, max_mode: int = 8):
        th = 2.0 * np.pi * np.arange(n_samples) / n_samples
        c = np.fft.rfft(f(th)) / n_samples
        a = 2.0 * c.real[: max_mode + 1]
        b = -2.0 * c.imag[: max_mode + 1]
        a[0] *= 0.5
        b[0] = 0.0
        return cls(sigma, a, b)

    def to_domain(self, **kw):
        from .greens.perturbed import PerturbedDisk
        return PerturbedDisk(self.sigma, self.fourier_cos, self.fourier_sin, **kw)


@dataclass
class BranchCorrection:
    axis: np.ndarray
    omega_tilde_1: float
    lambda_I1: float
    tau1_hat: float

    def to_dict(self):
        return {"axis": self.axis.tolist(), "omega_tilde_1": self.omega_tilde_1,
                "lambda_I1": self.lambda_I1, "tau1_hat": self.tau1_hat}


@dataclass
class CorrectionResult:
    """O(sigma) corrections.  ``branches[0]`` is the (1,0)-type mode of the rotated frame.

    ``constant`` is the S-free number ``C`` in
    ``tau1_hat = -/+ C S c2 tau0_hat / (|k1| lambda_I0)`` with ``c2 = sqrt(a2^2 + b2^2)``;
    ``coefficient = S C``.
    """

    tau0_hat: float
    lambda_I0: float
    omega0: float
    branches: list
    dominant_angle: float
    constant: float
    coefficient: float
    leading_order_unchanged: bool = False
    notes: list = field(default_factory=list)

    @property
    def dominant(self) -> BranchCorrection:
        return min(self.branches, key=lambda b: b.tau1_hat)

    def threshold(self, sigma) -> float:
        return self.tau0_hat + sigma * self.dominant.tau1_hat

    def to_dict(self):
        return {"tau0_hat": self.tau0_hat, "lambda_I0": self.lambda_I0, "omega0": self.omega0,
                "branches": [b.to_dict() for b in self.branches],
                "dominant_angle": self.dominant_angle, "constant": self.constant,
                "coefficient": self.coefficient,
                "leading_order_unchanged": self.leading_order_unchanged, "notes": self.notes}


def _angle(a2, b2):
    if np.hypot(a2, b2) < 1e-14:
        return None
    return float(np.arctan2(b2, a2) % (2.0 * np.pi))


def fourier_mode2(samples):
    """``(a2, b2, phi)`` of uniformly spaced samples of ``f`` on ``[0, 2pi)``.

    ``phi`` is ``None`` when the mode-2 content vanishes.
    """
    samples = np.asarray(samples, float)
    n = len(samples)
    if n < 64:
        raise ValueError("need at least 64 samples")
    c = np.fft.rfft(samples)[2] / n
    a2, b2 = 2.0 * c.real, -2.0 * c.imag
    a2 = 0.0 if abs(a2) < 1e-14 else float(a2)
    b2 = 0.0 if abs(b2) < 1e-14 else float(b2)
    return a2, b2, _angle(a2, b2)


def q_function(z):
    r"""``Q(z) = (z^2+1)[K_1 I_0 + K_0 I_1] / (2z (z I_0 - I_1)^2)``."""
    i = bessel_i_seq(1, z)
    k = bessel_k_seq(1, z)
    return (z * z + 1.0) * (k[1] * i[0] + k[0] * i[1]) / (2.0 * z * (z * i[0] - i[1]) ** 2)


def slope_coefficient(k):
    """``T(k) = (1 - k^2) / (8 pi I_1'(k)^2)``."""
    _, di, _ = i_derivs(1, k)
    return (1.0 - k * k) / (8.0 * np.pi * di[1] ** 2)


def second_radial_derivative(n, k):
    """``F_n''(1) = k^2 [K_n''(k) - K_n'(k) I_n''(k)/I_n'(k)]``."""
    _, di, ddi = i_derivs(n, k)
    _, dk, ddk = k_derivs(n, k)
    return k * k * (ddk[n] - dk[n] * ddi[n] / di[n])


def _rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def perturbed_disk_corrections(sigma, a2, b2, mu):
    """O(sigma) changes of ``H``, ``calF_mu`` and ``H_mu`` at the centre.

    Returns ``(dH_neumann, dcalF_mu, dH_mu)`` in the laboratory frame.
    """
    amp = float(np.hypot(a2, b2))
    if amp == 0.0:
        return np.zeros((2, 2)), np.zeros((2, 2), complex), np.zeros((2, 2), complex)
    k = np.sqrt(complex(mu))
    i1 = bessel_i_seq(1, k)[1]
    _, di, _ = i_derivs(2, k)
    d = np.diag([-1.0, 1.0])
    dh_mu = (k * k / (8.0 * np.pi * i1 * di[2])) * d
    dcalf = dh_mu - slope_coefficient(k) * d
    dh = d / np.pi
    R = _rotation(0.5 * _angle(a2, b2))
    scale = sigma * amp
    return (scale * (R @ dh @ R.T), scale * (R @ dcalf @ R.T), scale * (R @ dh_mu @ R.T))


def predict(spec: PerturbationSpec, S: float, params: SchnakenbergParams) -> CorrectionResult:
    """First-order Hopf threshold and frequency shifts of a centred spot."""
    eps = params.epsilon
    cd = core_data(round(float(S), 10))
    w0 = universal_frequency()
    om0 = 1j * w0
    tau0 = tau0_from_frequency(w0, S, eps, cd.k1, cd.k2)
    lam0 = w0 / tau0
    z = np.sqrt(om0)
    _, di, _ = i_derivs(1, z)
    _, dk, _ = k_derivs(1, z)
    gprime = S * (np.log(np.exp(EULER_GAMMA) * eps / 2.0) + 0.5 * np.log(om0) + 0.5
                  - dk[1] / di[1] - om0 * q_function(z)) + cd.k2
    T = slope_coefficient(z)
    amp = float(np.hypot(spec.a2, spec.b2))
    phi = spec.phi
    angle = 0.0 if phi is None else 0.5 * phi
    R = _rotation(angle)
    notes = []
    if len(spec.fourier_cos) > 1 and (spec.fourier_cos[1] or spec.fourier_sin[1]):
        notes.append("mode-1 content is a translation; its effect is O(sigma^2)")
    def shift(delta):
        dg = FOUR_PI * S * delta
        w1 = dg.real / gprime.imag
        l1 = (gprime.real * w1 + dg.imag) / cd.k1
        return w1, l1, (w1 - tau0 * l1) / lam0

    branches = []
    for a, sign in enumerate((1.0, -1.0)):
        w1, l1, t1 = shift(sign * amp * (-1.0 / np.pi + T))
        branches.append(BranchCorrection(R[:, a].copy(), float(w1), float(l1), float(t1)))
    const = -shift(-1.0 / np.pi + T)[2] * abs(cd.k1) * lam0 / (tau0 * S)
    return CorrectionResult(float(tau0), float(lam0), float(w0), branches, float(angle),
                            float(const), float(const * S), leading_order_unchanged=(amp == 0.0),
                            notes=notes)
