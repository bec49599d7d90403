"""Closed-form reduced model: symplectic transfer matrices, gain formulas,
spectral corrections, dark-state-polariton transform, and scan fitting.

The degenerate probe transfer matrix acts on the pair (Omega_p, Omega_p*)::

    M(mu) = [[(1+i mu) e^{i mu},  i mu e^{i mu}],
             [ -i mu e^{-i mu},  (1-i mu) e^{-i mu}]]

with mu = 4 eta L / (3 Delta).  It is symplectic (det = 1) and gives the
phase-dependent gain G(theta) = |(1+i mu) e^{i theta} + i mu e^{-i theta}|^2
with extrema G_MAX = 1 + 2 mu (mu + sqrt(1+mu^2)) = 1/G_MIN at
theta_MAX = arctan(1/mu)/2 and theta_MIN = theta_MAX - pi/2.

The DSP matrix (see :func:`dsp_transfer_matrix`) carries the opposite
off-diagonal signs, as printed in the source derivation; the two matrices are
unitarily equivalent (equal singular values), so every gain prediction
coincides.  Output phases are always reported relative to the propagated
coupling phase, i.e. the global e^{+-i mu} factors cancel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.optimize import least_squares

from .atomic import MediumParams
from .errors import FitFailureError


def mu_from_medium(params: MediumParams) -> float:
    """Accumulated nonlinear phase mu = 4 eta L / (3 Delta)."""
    return 4.0 * params.eta * params.length / (3.0 * params.delta)


def transfer_matrix(mu: float) -> np.ndarray:
    """Degenerate symplectic probe transfer matrix on (Omega_p, Omega_p*)."""
    if not math.isfinite(mu):
        raise ValueError("mu must be finite")
    phase = np.exp(1j * mu)
    return np.array(
        [
            [(1 + 1j * mu) * phase, 1j * mu * phase],
            [-1j * mu / phase, (1 - 1j * mu) / phase],
        ]
    )


def is_psa_transfer_matrix(m: np.ndarray, tol: float = 1e-12) -> bool:
    """Unit determinant and conjugation symmetry m[1,1] = m[0,0]*, m[1,0] = m[0,1]*."""
    det_ok = abs(np.linalg.det(m) - 1.0) <= tol
    sym_ok = (
        abs(m[1, 1] - np.conj(m[0, 0])) <= tol
        and abs(m[1, 0] - np.conj(m[0, 1])) <= tol
    )
    return bool(det_ok and sym_ok)


@dataclass(frozen=True)
class GainExtrema:
    g_max: float
    theta_max: float
    g_min: float
    theta_min: float

    @property
    def g_max_db(self) -> float:
        return 10.0 * math.log10(self.g_max)


def gain_extrema(mu: float) -> GainExtrema:
    """Closed-form gain extrema and the input phases where they occur.

    theta_max = arctan(1/mu)/2 (pi/4 at mu=0), theta_min = theta_max - pi/2;
    G_MAX * G_MIN = 1 identically.
    """
    if mu < 0:
        raise ValueError("mu must be >= 0")
    root = math.sqrt(1.0 + mu * mu)
    g_max = 1.0 + 2.0 * mu * (mu + root)
    theta_max = 0.5 * math.atan2(1.0, mu)
    return GainExtrema(
        g_max=g_max,
        theta_max=theta_max,
        g_min=1.0 / g_max,
        theta_min=theta_max - 0.5 * math.pi,
    )


def gain(theta, mu: float):
    """Phase-dependent gain G(theta) = |(1+i mu) e^{i theta} + i mu e^{-i theta}|^2.

    Accepts scalars or arrays; 2*pi-periodic and in fact pi-periodic in theta.
    """
    theta = np.asarray(theta, dtype=float)
    amp = (1 + 1j * mu) * np.exp(1j * theta) + 1j * mu * np.exp(-1j * theta)
    out = np.abs(amp) ** 2
    return out if out.ndim else float(out)


def output_phase(theta, mu: float):
    """Output probe phase relative to the output coupling phase."""
    theta = np.asarray(theta, dtype=float)
    amp = (1 + 1j * mu) * np.exp(1j * theta) + 1j * mu * np.exp(-1j * theta)
    out = np.angle(amp)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class MuFit:
    mu: float
    theta_offset: float
    phase_offset: float
    residual_rms: float


def _wrap(angle):
    return (np.asarray(angle) + np.pi) % (2 * np.pi) - np.pi


def fit_mu(
    thetas,
    gains,
    thetas_out=None,
    residual_tol: float | None = None,
    phase_weight: float = 1.0,
) -> MuFit:
    """Least-squares fit of the transfer-matrix gain (and phase) curves.

    Fits mu >= 0 together with a phase-origin nuisance parameter for the
    input phase axis (and, when output phases are given, an additive offset
    for the phase curve).  Gains enter in linear units with unit weights;
    phase residuals are wrapped to (-pi, pi] and weighted by
    ``phase_weight`` (rad^-1).

    Raises :class:`FitFailureError` when ``residual_tol`` is given and the
    RMS residual exceeds it (non-transfer-matrix-like data).
    """
    thetas = np.asarray(thetas, dtype=float)
    gains = np.asarray(gains, dtype=float)
    if thetas.shape != gains.shape or thetas.size < 5:
        raise ValueError("need >= 5 (theta, gain) samples of equal length")
    if np.unique(np.round(thetas, 12)).size < 5:
        raise ValueError("need >= 5 distinct theta values")

    mean_gain = float(np.mean(gains))
    mu0 = math.sqrt(max(mean_gain - 1.0, 0.0) / 2.0)
    ext0 = gain_extrema(mu0) if mu0 > 0 else gain_extrema(0.0)
    theta0 = float(thetas[np.argmax(gains)] - ext0.theta_max)

    use_phase = thetas_out is not None
    if use_phase:
        thetas_out = np.asarray(thetas_out, dtype=float)
        if thetas_out.shape != thetas.shape:
            raise ValueError("thetas_out must match thetas in shape")

    def residuals(p):
        mu, th0, ph0 = p
        res = gain(thetas - th0, mu) - gains
        if use_phase:
            model = output_phase(thetas - th0, mu) + ph0
            res = np.concatenate([res, phase_weight * _wrap(model - thetas_out)])
        return res

    start_phase = 0.0
    if use_phase:
        start_phase = float(
            np.angle(np.mean(np.exp(1j * (thetas_out - output_phase(thetas - theta0, mu0)))))
        )
    best = None
    # The theta origin is only identifiable mod pi/2 from gain data alone;
    # try the candidate origins and keep the lowest-residual fit.
    for shift in (0.0, 0.5 * np.pi, -0.5 * np.pi, np.pi):
        sol = least_squares(
            residuals,
            x0=[max(mu0, 1e-6), theta0 + shift, start_phase],
            bounds=([0.0, -2 * np.pi, -2 * np.pi], [np.inf, 2 * np.pi, 2 * np.pi]),
            xtol=1e-14,
            ftol=1e-14,
            gtol=1e-14,
        )
        if best is None or sol.cost < best.cost:
            best = sol
    rms = math.sqrt(2.0 * best.cost / residuals(best.x).size)
    fit = MuFit(
        mu=float(best.x[0]),
        theta_offset=float(_wrap(best.x[1])),
        phase_offset=float(_wrap(best.x[2])),
        residual_rms=rms,
    )
    if residual_tol is not None and rms > residual_tol:
        raise FitFailureError(
            f"fit residual {rms:.3e} exceeds bound {residual_tol:.3e}"
        )
    return fit


def spectral_lineshape(x):
    """Response factor f(x) = 1 / (1 - i x) of the power-broadened window."""
    return 1.0 / (1.0 - 1j * np.asarray(x))


@dataclass(frozen=True)
class SpectralParams:
    """Spectral quantities of the coupling-dressed medium.

    zeta is the power-broadening factor |Omega_c|^2 / Gamma, alpha the
    polariton mixing angle with tan(alpha) = sqrt(2 eta c)/|Omega_c|, and
    vg = c cos^2(alpha) the group velocity.
    """

    zeta: float
    nu: float
    vg: float
    alpha: float

    def __post_init__(self):
        if self.zeta <= 0:
            raise ValueError("zeta must be positive")
        if not 0 <= self.alpha < 0.5 * math.pi:
            raise ValueError("alpha must lie in [0, pi/2)")
        expected = C_LIGHT * math.cos(self.alpha) ** 2
        if abs(self.vg - expected) > 1e-12 * max(expected, 1.0):
            raise ValueError("vg must equal c cos^2(alpha)")

    @classmethod
    def from_medium(
        cls, params: MediumParams, omega_c: complex, nu: float = 0.0
    ) -> "SpectralParams":
        zeta = params.zeta(omega_c)
        alpha = math.atan2(math.sqrt(2.0 * params.eta * C_LIGHT), abs(omega_c))
        return cls(zeta=zeta, nu=nu, vg=C_LIGHT * math.cos(alpha) ** 2, alpha=alpha)


def group_velocity(params: MediumParams, omega_c: complex) -> float:
    """Slow-light group velocity c / (1 + 2 eta c / |Omega_c|^2)."""
    return C_LIGHT / (1.0 + 2.0 * params.eta * C_LIGHT / abs(omega_c) ** 2)


@dataclass(frozen=True)
class SpectralTransfer:
    """Sideband transfer at detuning nu from the coupling frequency.

    ``matrix`` is the leading-order solution: the degenerate transfer matrix
    times the unimodular group-delay prefactor exp(-i nu L / vg).  The
    f(nu/zeta)^2 correction of the pre-solution propagation equation is
    exposed through ``lineshape`` and ``corrected_mu_density`` (local gain
    coefficient per unit length) rather than folded into the matrix.
    """

    matrix: np.ndarray
    prefactor: complex
    lineshape: complex
    corrected_mu_density: complex
    regime_ok: bool

    @property
    def group_delay(self) -> float:
        """-d(arg prefactor)/d(nu) = L / vg."""
        return self._length_over_vg

    _length_over_vg: float = 0.0


def spectral_transfer(
    nu: float, mu: float, zeta: float, vg: float, length: float
) -> SpectralTransfer:
    """Sideband transfer matrix with slow-light prefactor.

    At nu = 0 this reduces elementwise to :func:`transfer_matrix`.  The
    ``regime_ok`` flag reports whether |nu| << zeta holds (|nu| < zeta/10).
    """
    prefactor = np.exp(-1j * nu * length / vg)
    f = complex(spectral_lineshape(nu / zeta))
    return SpectralTransfer(
        matrix=prefactor * transfer_matrix(mu),
        prefactor=complex(prefactor),
        lineshape=f,
        corrected_mu_density=(mu / length) * f**2,
        regime_ok=abs(nu) < 0.1 * zeta,
        _length_over_vg=length / vg,
    )


def dsp_transfer_matrix(mu: float, nu: float, vg: float, length: float) -> np.ndarray:
    """Dark-state-polariton transfer matrix on (P, P*).

    Same symplectic structure as :func:`transfer_matrix` with the printed
    off-diagonal signs flipped (a unitary re-phasing: the singular values,
    hence all gains, are identical) times the dispersive prefactor
    exp(-i nu L / vg(alpha)).
    """
    phase = np.exp(1j * mu)
    core = np.array(
        [
            [(1 + 1j * mu) * phase, -1j * mu * phase],
            [1j * mu / phase, (1 - 1j * mu) / phase],
        ]
    )
    return np.exp(-1j * nu * length / vg) * core


def dsp_transform(
    omega_p: complex,
    coherence: complex,
    alpha: float,
    z: float,
    mu_density: float,
    omega_c: complex | None = None,
    raman_coupling: float | None = None,
) -> complex:
    """Dark-state-polariton amplitude.

    P = cos(alpha) e^{-i mu_density z} Omega_p - i sqrt(2 eta c) sin(alpha) * coherence,
    where ``coherence`` is the ground dark/bright coherence and
    mu_density = 4 eta / (3 Delta).  The sqrt(2 eta c) factor equals
    tan(alpha) |Omega_c|; provide it either directly (``raman_coupling``) or
    through ``omega_c``.
    """
    if raman_coupling is None:
        if omega_c is None:
            raise ValueError("provide raman_coupling or omega_c")
        raman_coupling = math.tan(alpha) * abs(omega_c)
    return (
        math.cos(alpha) * np.exp(-1j * mu_density * z) * omega_p
        - 1j * raman_coupling * math.sin(alpha) * coherence
    )
