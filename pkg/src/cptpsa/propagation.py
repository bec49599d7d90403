"""Field propagation through the cell: slowly-varying envelopes coupled to
the local atomic steady state.

The circular envelope pair marches along z with

    d Omega+/dz = i eta ( rho[3,1]/sqrt(3) + sqrt(2) rho[5,2] - rho[0,1] )
    d Omega-/dz = i eta ( -rho[3,2]/sqrt(3) - sqrt(2) rho[4,1] - rho[0,2] )

where rho is the steady state of the local Hamiltonian (adiabatic
elimination of the atomic dynamics; rho[i, j] = <i|rho|j>).  A classical
fixed-step fourth-order march with optional step-doubling refinement keeps
the scheme deterministic.  Sideband propagation treats the signal/idler pair
to first order while the carrier propagates nonlinearly.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.optimize import minimize_scalar

from .atomic import (
    FieldState,
    MediumParams,
    Relaxation,
    build_relaxation,
    dark_state_population,
    from_circular,
    hamiltonian_from_circular,
    to_circular,
)
from .bloch import build_liouvillian, sideband_solve, _steady_state_from_liouvillian
from .errors import ConvergenceFailureError
from .results import ScanResult

_SQRT2 = math.sqrt(2.0)
_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class PropagationGrid:
    """Spatial discretization and refinement policy for the z march."""

    n_steps: int = 64
    refine: bool = True
    refine_tol: float = 1e-3
    max_refinements: int = 4
    scheme: str = "rk4"

    def __post_init__(self):
        if self.n_steps < 16:
            raise ValueError("n_steps must be >= 16")
        if self.scheme != "rk4":
            raise ValueError("only the rk4 scheme is implemented")


DEFAULT_GRID = PropagationGrid()


@dataclass
class ZProfile:
    """Per-slice record of a degenerate propagation run."""

    z: np.ndarray
    omega_c: np.ndarray
    omega_p: np.ndarray
    dark_population: np.ndarray
    params: MediumParams
    include_d2: bool
    zeeman_nu: float
    n_steps_used: int
    refinements: int

    @property
    def intensity_c(self) -> np.ndarray:
        """Coupling intensity normalized to its input value."""
        return np.abs(self.omega_c / self.omega_c[0]) ** 2

    @property
    def intensity_p(self) -> np.ndarray:
        """Probe intensity normalized to its input value (NaN when probe off)."""
        if self.omega_p[0] == 0:
            return np.full_like(self.z, np.nan)
        return np.abs(self.omega_p / self.omega_p[0]) ** 2

    @property
    def theta(self) -> np.ndarray:
        """Relative phase arg(Omega_p) - arg(Omega_c) along z."""
        return np.angle(self.omega_p) - np.angle(self.omega_c)

    @property
    def gain(self) -> float:
        """Probe intensity gain |Omega_p(L)/Omega_p(0)|^2."""
        if self.omega_p[0] == 0:
            return math.nan
        return float(abs(self.omega_p[-1] / self.omega_p[0]) ** 2)

    @property
    def coupling_transmission(self) -> float:
        return float(abs(self.omega_c[-1] / self.omega_c[0]) ** 2)

    @property
    def total_transmission(self) -> float:
        num = abs(self.omega_c[-1]) ** 2 + abs(self.omega_p[-1]) ** 2
        den = abs(self.omega_c[0]) ** 2 + abs(self.omega_p[0]) ** 2
        return float(num / den)

    @property
    def theta_out(self) -> float:
        return float(np.angle(self.omega_p[-1]) - np.angle(self.omega_c[-1]))


def _optical_sources(rho: np.ndarray, include_d2: bool) -> tuple[complex, complex]:
    s_plus = -rho[0, 1]
    s_minus = -rho[0, 2]
    if include_d2:
        s_plus += rho[3, 1] / _SQRT3 + _SQRT2 * rho[5, 2]
        s_minus += -rho[3, 2] / _SQRT3 - _SQRT2 * rho[4, 1]
    return s_plus, s_minus


def _degenerate_rhs(
    y: np.ndarray,
    params: MediumParams,
    relaxation: Relaxation,
    zeeman_nu: float,
    include_d2: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Field derivative and local steady state at one z position."""
    h = hamiltonian_from_circular(y[0], y[1], params.delta, zeeman_nu, include_d2)
    rho = _steady_state_from_liouvillian(build_liouvillian(h, relaxation))
    s_plus, s_minus = _optical_sources(rho, include_d2)
    return 1j * params.eta * np.array([s_plus, s_minus]), rho


def _march_degenerate(
    y0: np.ndarray,
    params: MediumParams,
    relaxation: Relaxation,
    n_steps: int,
    zeeman_nu: float,
    include_d2: bool,
):
    """Fixed-step RK4 march; returns per-slice fields and dark populations."""
    h = params.length / n_steps
    ys = np.empty((n_steps + 1, 2), dtype=complex)
    dark = np.empty(n_steps + 1)
    y = y0.astype(complex)
    for k in range(n_steps):
        ys[k] = y
        k1, rho = _degenerate_rhs(y, params, relaxation, zeeman_nu, include_d2)
        dark[k] = dark_state_population(rho)
        k2, _ = _degenerate_rhs(y + 0.5 * h * k1, params, relaxation, zeeman_nu, include_d2)
        k3, _ = _degenerate_rhs(y + 0.5 * h * k2, params, relaxation, zeeman_nu, include_d2)
        k4, _ = _degenerate_rhs(y + h * k3, params, relaxation, zeeman_nu, include_d2)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    ys[n_steps] = y
    _, rho = _degenerate_rhs(y, params, relaxation, zeeman_nu, include_d2)
    dark[n_steps] = dark_state_population(rho)
    return ys, dark


def _convergence_metric(y_out: np.ndarray, y0: np.ndarray) -> float:
    """Scalar output summary used by the refinement loop (intensity-like)."""
    return float(np.linalg.norm(y_out)) / max(float(np.linalg.norm(y0)), 1e-300)


def propagate_degenerate(
    fields_in: FieldState,
    params: MediumParams,
    grid: PropagationGrid = DEFAULT_GRID,
    include_d2: bool = True,
    zeeman_nu: float = 0.0,
) -> ZProfile:
    """Propagate degenerate coupling and probe envelopes through the cell.

    The atomic response at every slice is the exact steady state of the
    local 6x6 problem.  With ``include_d2=False`` the detuned upper line is
    removed from the Hamiltonian and from the field sources.  When
    ``grid.refine`` is set, the step count doubles until the output gain
    (probe on) or output amplitude (probe off) changes by less than
    ``grid.refine_tol``; failure to stabilize raises
    :class:`ConvergenceFailureError`.
    """
    relaxation = build_relaxation(params)
    y0 = np.array(to_circular(fields_in.omega_c, fields_in.omega_p))

    n = grid.n_steps
    ys, dark = _march_degenerate(y0, params, relaxation, n, zeeman_nu, include_d2)
    refinements = 0
    if grid.refine and params.eta > 0:
        prev = _gain_or_amplitude(ys, y0)
        for refinements in range(1, grid.max_refinements + 1):
            n *= 2
            ys, dark = _march_degenerate(y0, params, relaxation, n, zeeman_nu, include_d2)
            current = _gain_or_amplitude(ys, y0)
            if abs(current - prev) <= grid.refine_tol * max(abs(current), 1e-300):
                break
            prev = current
        else:
            raise ConvergenceFailureError(
                f"output changed by more than {grid.refine_tol:.1e} after "
                f"{grid.max_refinements} step doublings (n_steps={n})"
            )

    fields = [from_circular(*y) for y in ys]
    return ZProfile(
        z=np.linspace(0.0, params.length, n + 1),
        omega_c=np.array([f[0] for f in fields]),
        omega_p=np.array([f[1] for f in fields]),
        dark_population=dark,
        params=params,
        include_d2=include_d2,
        zeeman_nu=zeeman_nu,
        n_steps_used=n,
        refinements=refinements,
    )


def _gain_or_amplitude(ys: np.ndarray, y0: np.ndarray) -> float:
    omega_c0, omega_p0 = from_circular(*y0)
    omega_cl, omega_pl = from_circular(*ys[-1])
    if omega_p0 != 0:
        return float(abs(omega_pl / omega_p0) ** 2)
    return float((abs(omega_cl) ** 2 + abs(omega_pl) ** 2) / abs(omega_c0) ** 2)


def _scan_phase_point(args) -> tuple[float, float, float, float]:
    theta, fields_in, params, grid, include_d2, zeeman_nu = args
    profile = propagate_degenerate(
        fields_in.with_probe_phase(theta), params, grid, include_d2, zeeman_nu
    )
    return profile.gain, profile.theta_out, profile.coupling_transmission, float(
        profile.dark_population[-1]
    )


def _quadratic_peak(thetas: np.ndarray, gains: np.ndarray, idx: int) -> tuple[float, float]:
    """Parabolic interpolation of an extremum through three wrapped grid points."""
    n = len(thetas)
    h = thetas[1] - thetas[0]
    gm, g0, gp = gains[(idx - 1) % n], gains[idx], gains[(idx + 1) % n]
    denom = gm - 2.0 * g0 + gp
    shift = 0.0 if denom == 0 else 0.5 * (gm - gp) / denom
    return float(thetas[idx] + shift * h), float(g0 - 0.25 * (gm - gp) * shift)


def scan_phase(
    fields_in: FieldState,
    params: MediumParams,
    grid: PropagationGrid = DEFAULT_GRID,
    n_theta: int = 48,
    include_d2: bool = True,
    zeeman_nu: float = 0.0,
    workers: int = 1,
    refine_extrema: bool = True,
) -> ScanResult:
    """Gain and output phase versus input relative phase over [0, 2 pi).

    Returns a :class:`ScanResult` with columns (theta_in, gain, theta_out,
    coupling_transmission, dark_population).  The gain extrema and their
    phases are interpolated quadratically around the grid extrema, then
    (default) polished by a bounded scalar search; everything lands in
    ``metadata["extrema"]``.
    """
    if n_theta < 8:
        raise ValueError("n_theta must be >= 8")
    if fields_in.omega_p == 0:
        raise ValueError("scan_phase needs a nonzero probe")

    # Establish the converged step count once, then reuse it for every theta.
    first = propagate_degenerate(fields_in, params, grid, include_d2, zeeman_nu)
    frozen = PropagationGrid(
        n_steps=first.n_steps_used,
        refine=False,
        refine_tol=grid.refine_tol,
        max_refinements=grid.max_refinements,
    )

    thetas = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    jobs = [(t, fields_in, params, frozen, include_d2, zeeman_nu) for t in thetas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_scan_phase_point, jobs, chunksize=4))
    else:
        records = [_scan_phase_point(j) for j in jobs]
    table = np.array(
        [(t,) + rec for t, rec in zip(thetas, records)], dtype=float
    )

    gains = table[:, 1]
    theta_max, g_max = _quadratic_peak(thetas, gains, int(np.argmax(gains)))
    theta_min, g_min = _quadratic_peak(thetas, gains, int(np.argmin(gains)))
    if refine_extrema:
        span = thetas[1] - thetas[0]

        def measured_gain(theta: float) -> float:
            return _scan_phase_point(
                (theta, fields_in, params, frozen, include_d2, zeeman_nu)
            )[0]

        res_max = minimize_scalar(
            lambda t: -measured_gain(t),
            bounds=(theta_max - span, theta_max + span),
            method="bounded",
            options={"xatol": 1e-5},
        )
        theta_max, g_max = float(res_max.x), float(-res_max.fun)
        res_min = minimize_scalar(
            measured_gain,
            bounds=(theta_min - span, theta_min + span),
            method="bounded",
            options={"xatol": 1e-5},
        )
        theta_min, g_min = float(res_min.x), float(res_min.fun)

    metadata = {
        "kind": "scan-phase",
        "extrema": {
            "g_max": g_max,
            "theta_max": _wrap_pi(theta_max),
            "g_min": g_min,
            "theta_min": _wrap_pi(theta_min),
        },
        "n_steps": first.n_steps_used,
        "include_d2": include_d2,
        "zeeman_nu": zeeman_nu,
        "probe_ratio": fields_in.probe_ratio,
    }
    return ScanResult(
        columns=("theta_in", "gain", "theta_out", "coupling_transmission", "dark_population"),
        rows=table,
        metadata=metadata,
    )


def _wrap_pi(angle: float) -> float:
    return (angle + np.pi) % (2.0 * np.pi) - np.pi


@dataclass
class SidebandTransfer:
    """2x2 transfer matrix of the (signal, idler*) pair at one detuning.

    ``t`` maps inputs to outputs of the probe-polarized sideband amplitudes:
    (Omega_s(L), Omega_i*(L)) = t @ (Omega_s(0), Omega_i*(0)).
    """

    delta: float
    t: np.ndarray
    carrier_transmission: float

    @property
    def pia_gain(self) -> float:
        """Signal gain without an input idler."""
        return float(abs(self.t[0, 0]) ** 2)

    @property
    def psa_gain_max(self) -> float:
        return float((abs(self.t[0, 0]) + abs(self.t[0, 1])) ** 2)

    @property
    def psa_gain_min(self) -> float:
        return float((abs(self.t[0, 0]) - abs(self.t[0, 1])) ** 2)

    def signal_gain(self, theta: float) -> float:
        """Gain for equal-amplitude signal/idler inputs at relative phase theta."""
        amp = self.t[0, 0] * np.exp(1j * theta) + self.t[0, 1] * np.exp(-1j * theta)
        return float(abs(amp) ** 2)

    @property
    def det_phase(self) -> float:
        """arg det(t); slope versus delta measures -2 L / v_g."""
        return float(np.angle(np.linalg.det(self.t)))


def _sideband_rhs(
    state: np.ndarray,
    delta: float,
    params: MediumParams,
    relaxation: Relaxation,
    zeeman_nu: float,
    include_d2: bool,
) -> np.ndarray:
    """Derivative of (carrier+-, run1 s+-, i+-, run2 s+-, i+-) at one slice."""
    carrier = state[:2]
    h0 = hamiltonian_from_circular(
        carrier[0], carrier[1], params.delta, zeeman_nu, include_d2
    )
    liouv = build_liouvillian(h0, relaxation)
    rho0 = _steady_state_from_liouvillian(liouv)
    s_plus, s_minus = _optical_sources(rho0, include_d2)
    out = np.empty_like(state)
    out[:2] = 1j * params.eta * np.array([s_plus, s_minus])

    omega_c, _ = from_circular(carrier[0], carrier[1])
    for block in (2, 6):
        sig = state[block : block + 2]
        idl = state[block + 2 : block + 4]
        # probe-polarized parts drive the atoms; any coupling-polarized
        # sideband component generated along the way still rides in `state`
        _, omega_s_p = from_circular(sig[0], sig[1])
        _, omega_i_p = from_circular(idl[0], idl[1])
        sigma_plus, sigma_minus = sideband_solve(liouv, rho0, omega_s_p, omega_i_p, delta)
        src_s = _optical_sources(sigma_plus, include_d2)
        src_i = _optical_sources(sigma_minus, include_d2)
        out[block : block + 2] = (
            1j * params.eta * np.array(src_s) + (1j * delta / C_LIGHT) * sig
        )
        out[block + 2 : block + 4] = (
            1j * params.eta * np.array(src_i) - (1j * delta / C_LIGHT) * idl
        )
    return out


def _march_sidebands(
    state0: np.ndarray,
    delta: float,
    params: MediumParams,
    relaxation: Relaxation,
    n_steps: int,
    zeeman_nu: float,
    include_d2: bool,
) -> np.ndarray:
    h = params.length / n_steps
    y = state0.astype(complex)
    for _ in range(n_steps):
        k1 = _sideband_rhs(y, delta, params, relaxation, zeeman_nu, include_d2)
        k2 = _sideband_rhs(y + 0.5 * h * k1, delta, params, relaxation, zeeman_nu, include_d2)
        k3 = _sideband_rhs(y + 0.5 * h * k2, delta, params, relaxation, zeeman_nu, include_d2)
        k4 = _sideband_rhs(y + h * k3, delta, params, relaxation, zeeman_nu, include_d2)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def sideband_transfer(
    omega_c: complex,
    delta: float,
    params: MediumParams,
    grid: PropagationGrid = DEFAULT_GRID,
    zeeman_nu: float = 0.0,
    include_d2: bool = True,
) -> SidebandTransfer:
    """Extract the 2x2 sideband transfer matrix at one detuning.

    Two unit-basis inputs, (Omega_s, Omega_i) = (1, 0) and (0, 1), are
    propagated simultaneously with the self-consistently evolving carrier;
    the sideband treatment is first order, so the basis responses determine
    the transfer of any weak input pair exactly.
    """
    state0 = np.zeros(10, dtype=complex)
    state0[:2] = to_circular(omega_c, 0j)
    unit = 1e-3 * abs(omega_c)
    state0[2:4] = to_circular(0j, unit)       # run 1: signal input
    state0[8:10] = to_circular(0j, unit)      # run 2: idler input
    out = _march_sidebands(
        state0, delta, params, build_relaxation(params), grid.n_steps, zeeman_nu, include_d2
    )
    carrier_t = float((abs(out[0]) ** 2 + abs(out[1]) ** 2) / abs(omega_c) ** 2)
    s1 = from_circular(out[2], out[3])[1]
    i1 = from_circular(out[4], out[5])[1]
    s2 = from_circular(out[6], out[7])[1]
    i2 = from_circular(out[8], out[9])[1]
    t = np.array(
        [
            [s1 / unit, s2 / unit],
            [np.conj(i1) / unit, np.conj(i2) / unit],
        ]
    )
    return SidebandTransfer(delta=delta, t=t, carrier_transmission=carrier_t)


def _sideband_point(args):
    omega_c, delta, params, grid, zeeman_nu, include_d2 = args
    return sideband_transfer(omega_c, delta, params, grid, zeeman_nu, include_d2)


def propagate_sidebands(
    fields_in: FieldState,
    params: MediumParams,
    grid: PropagationGrid = DEFAULT_GRID,
    idler_on: bool = True,
    deltas=None,
    zeeman_nu: float = 0.0,
    include_d2: bool = True,
    workers: int = 1,
) -> ScanResult:
    """Signal/idler propagation: gain versus sideband detuning.

    With ``idler_on=False`` the idler input is zero (phase-insensitive
    configuration: the idler is generated by four-wave mixing and the
    reported ``gain`` column is phase-independent).  With the idler on the
    phase-sensitive extrema over the input phase are reported alongside.
    Columns: delta, gain, g_psa_max, g_psa_min, pia_gain, det_phase,
    carrier_transmission and the four complex transfer elements.
    """
    if fields_in.sidebands is None:
        raise ValueError("fields_in.sidebands is required")
    sb = fields_in.sidebands
    if deltas is None:
        deltas = [sb.delta]
    deltas = np.asarray(deltas, dtype=float)

    jobs = [
        (fields_in.omega_c, float(d), params, grid, zeeman_nu, include_d2)
        for d in deltas
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            transfers = list(pool.map(_sideband_point, jobs, chunksize=1))
    else:
        transfers = [_sideband_point(j) for j in jobs]

    theta_in = (
        float(np.angle(sb.omega_s) - np.angle(fields_in.omega_c))
        if sb.omega_s != 0
        else 0.0
    )
    rows = []
    for tr in transfers:
        if idler_on:
            gain_val = tr.signal_gain(theta_in)
        else:
            gain_val = tr.pia_gain
        rows.append(
            [
                tr.delta,
                gain_val,
                tr.psa_gain_max,
                tr.psa_gain_min,
                tr.pia_gain,
                tr.det_phase,
                tr.carrier_transmission,
                tr.t[0, 0].real, tr.t[0, 0].imag,
                tr.t[0, 1].real, tr.t[0, 1].imag,
                tr.t[1, 0].real, tr.t[1, 0].imag,
                tr.t[1, 1].real, tr.t[1, 1].imag,
            ]
        )
    return ScanResult(
        columns=(
            "delta", "gain", "g_psa_max", "g_psa_min", "pia_gain", "det_phase",
            "carrier_transmission",
            "t11_re", "t11_im", "t12_re", "t12_im",
            "t21_re", "t21_im", "t22_re", "t22_im",
        ),
        rows=np.array(rows),
        metadata={
            "kind": "sideband-spectrum",
            "idler_on": idler_on,
            "n_steps": grid.n_steps,
            "theta_in": theta_in,
            "include_d2": include_d2,
            "zeeman_nu": zeeman_nu,
        },
    )


def _cpt_point(args):
    omega_c, nu_b, params, grid, include_d2 = args
    profile = propagate_degenerate(
        FieldState(omega_c=omega_c), params, grid, include_d2, zeeman_nu=nu_b
    )
    conversion = float(abs(profile.omega_p[-1]) ** 2 / abs(profile.omega_c[0]) ** 2)
    return (
        profile.coupling_transmission,
        profile.total_transmission,
        conversion,
        float(profile.dark_population[-1]),
    )


def cpt_resonance(
    omega_c: complex,
    params: MediumParams,
    grid: PropagationGrid = DEFAULT_GRID,
    nu_b_values=None,
    include_d2: bool = True,
    workers: int = 1,
) -> ScanResult:
    """Coupling-field transmission versus Zeeman detuning (probe off).

    The linearly polarized coupling field carries both circular components;
    a Zeeman shift nu_b produces a two-photon detuning 2 nu_b that destroys
    the trapping state and restores absorption.  Columns: nu_b,
    transmission (coupling polarization), total_transmission,
    conversion (orthogonal-polarization output), dark_population.
    """
    if nu_b_values is None:
        zeta = params.zeta(omega_c)
        nu_b_values = np.linspace(-1.5 * zeta, 1.5 * zeta, 41)
    nu_b_values = np.asarray(nu_b_values, dtype=float)

    jobs = [(omega_c, float(nb), params, grid, include_d2) for nb in nu_b_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_cpt_point, jobs, chunksize=2))
    else:
        records = [_cpt_point(j) for j in jobs]

    rows = np.array([(nb,) + rec for nb, rec in zip(nu_b_values, records)])
    return ScanResult(
        columns=(
            "nu_b", "transmission", "total_transmission", "conversion", "dark_population",
        ),
        rows=rows,
        metadata={
            "kind": "cpt-resonance",
            "n_steps": grid.n_steps,
            "include_d2": include_d2,
            "omega_c": abs(omega_c),
        },
    )


def fwhm(x: np.ndarray, y: np.ndarray, baseline: float | None = None) -> float:
    """Full width at half maximum of a single-peaked profile by interpolation.

    ``baseline`` defaults to the smaller edge value of y; the half level sits
    midway between baseline and peak.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if baseline is None:
        baseline = float(min(y[0], y[-1]))
    peak_idx = int(np.argmax(y))
    half = 0.5 * (y[peak_idx] + baseline)
    left = right = None
    for k in range(peak_idx, 0, -1):
        if (y[k - 1] - half) * (y[k] - half) <= 0 and y[k - 1] != y[k]:
            frac = (half - y[k - 1]) / (y[k] - y[k - 1])
            left = x[k - 1] + frac * (x[k] - x[k - 1])
            break
    for k in range(peak_idx, len(y) - 1):
        if (y[k] - half) * (y[k + 1] - half) <= 0 and y[k + 1] != y[k]:
            frac = (half - y[k]) / (y[k + 1] - y[k])
            right = x[k] + frac * (x[k + 1] - x[k])
            break
    if left is None or right is None:
        raise ValueError("profile does not cross its half level on both sides")
    return float(right - left)
