"""Six-level atomic model for metastable helium-4 driven near 1083 nm.

Basis ordering (fixed everywhere in this package)::

    0: |0>_1   excited, m=0 of the resonant line (2^3P_1)
    1: |-1>_g  ground,  m=-1 (2^3S_1)
    2: |+1>_g  ground,  m=+1 (2^3S_1)
    3: |0>_2   excited, m=0  of the detuned line (2^3P_2)
    4: |-2>_2  excited, m=-2 (2^3P_2)
    5: |+2>_2  excited, m=+2 (2^3P_2)

The detuned-line couplings carry Clebsch-Gordan factors -+1/sqrt(3) for the
m=0 upper state and +-sqrt(2) for the m=+-2 upper states; the resonant-line
factors are unity.  Density matrices use the convention ``rho[i, j] = <i|rho|j>``
so optical coherences that source a field sit in the excited-row /
ground-column entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

N_LEVELS = 6
GROUND = (1, 2)
EXCITED_D1 = (0,)
EXCITED_D2 = (3, 4, 5)
EXCITED = EXCITED_D1 + EXCITED_D2

_SQRT2 = math.sqrt(2.0)
_SQRT3 = math.sqrt(3.0)


def _coupling_matrices() -> tuple[np.ndarray, np.ndarray]:
    """Coefficient matrices of the sigma+ / sigma- Rabi amplitudes.

    The interaction Hamiltonian is ``H = Op*UP + Om*UM + h.c. + diagonal``
    where Op, Om are the circular Rabi amplitudes.
    """
    up = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    um = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    up[0, 1] = 1.0
    up[3, 1] = -1.0 / _SQRT3
    up[5, 2] = -_SQRT2
    um[0, 2] = 1.0
    um[3, 2] = 1.0 / _SQRT3
    um[4, 1] = _SQRT2
    return up, um


U_PLUS, U_MINUS = _coupling_matrices()

# d H / d Omega_p and d H / d Omega_c at fixed conjugates (used by the
# first-order sideband solver).
PROBE_COUPLING = (1j / _SQRT2) * (U_PLUS - U_MINUS)
PUMP_COUPLING = (1.0 / _SQRT2) * (U_PLUS + U_MINUS)


def _branching_ratios() -> np.ndarray:
    """Row-stochastic matrix b[e, g]: decay branching of each excited state.

    Proportional to the squared coupling coefficients of the dipole-allowed
    transitions, renormalized so every excited state decays with total weight
    one (closed six-level system).
    """
    weights = np.abs(U_PLUS) ** 2 + np.abs(U_MINUS) ** 2
    b = np.zeros((N_LEVELS, N_LEVELS))
    for e in EXCITED:
        row = weights[e]
        b[e] = row / row.sum()
    return b


BRANCHING = _branching_ratios()


def _dark_bright_unitary() -> np.ndarray:
    """Real symmetric involution mapping the atomic basis to the dark/bright one.

    Columns are the new basis states: ``|->_g = (|+1>_g - |-1>_g)/sqrt(2)``,
    ``|+>_g = (|+1>_g + |-1>_g)/sqrt(2)`` and the analogous +-
    superpositions of the m=+-2 upper states; the two m=0 states are left
    unchanged.  New ordering: ``{|0>_1, |->_g, |+>_g, |0>_2, |->_2, |+>_2}``.
    """
    u = np.eye(N_LEVELS)
    s = 1.0 / _SQRT2
    u[1:3, 1:3] = [[-s, s], [s, s]]
    u[4:6, 4:6] = [[-s, s], [s, s]]
    return u


DARK_BRIGHT_UNITARY = _dark_bright_unitary()


@dataclass(frozen=True)
class LevelScheme:
    """Static description of the six-level scheme (labels and coupling factors)."""

    basis_labels: tuple[str, ...] = (
        "|0>_1", "|-1>_g", "|+1>_g", "|0>_2", "|-2>_2", "|+2>_2",
    )
    cg_d1: float = 1.0
    cg_d2_m0: float = 1.0 / _SQRT3
    cg_d2_m2: float = _SQRT2

    def __post_init__(self):
        if len(self.basis_labels) != N_LEVELS:
            raise ValueError("level scheme must have exactly 6 states")


HELIUM4 = LevelScheme()


@dataclass(frozen=True)
class MediumParams:
    """Physical constants of the vapor cell and laser detunings.

    All rates and frequencies are angular (rad/s); ``length`` is in meters.

    Attributes
    ----------
    eta : atom-field coupling coefficient (rad s^-1 m^-1)
    delta : detuning of the far-off-resonant upper line (rad/s), nonzero
    gamma_opt : optical coherence decay rate of the resonant line (rad/s)
    gamma0 : excited-state population decay rate (rad/s)
    gamma_raman : ground-state (Raman) coherence decay rate (rad/s)
    doppler_w : Doppler width (rad/s); simulation presets set
        ``gamma_opt = doppler_w`` following the usual substitution
    length : cell length (m)
    gamma_opt_d2 : optional separate coherence decay for the detuned line;
        ``None`` means "same as gamma_opt"
    """

    eta: float
    delta: float
    gamma_opt: float
    gamma0: float
    gamma_raman: float
    doppler_w: float
    length: float
    gamma_opt_d2: float | None = None

    def __post_init__(self):
        for name in ("eta", "gamma_opt", "gamma0", "gamma_raman", "doppler_w"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.delta == 0:
            raise ValueError("delta must be nonzero")
        if self.length <= 0:
            raise ValueError("length must be positive")
        if self.gamma_opt_d2 is not None and self.gamma_opt_d2 < 0:
            raise ValueError("gamma_opt_d2 must be >= 0")

    @property
    def gamma_opt_detuned(self) -> float:
        """Coherence decay rate used on the detuned line."""
        return self.gamma_opt if self.gamma_opt_d2 is None else self.gamma_opt_d2

    @property
    def optical_depth(self) -> float:
        """OD = 2 eta L / Gamma (convention used throughout)."""
        return 2.0 * self.eta * self.length / self.gamma_opt

    def zeta(self, omega_c: complex) -> float:
        """Power-broadening factor zeta = |Omega_c|^2 / Gamma."""
        return abs(omega_c) ** 2 / self.gamma_opt

    def regime_report(self, omega_c: complex, nu: float = 0.0) -> "RegimeReport":
        """Check the analytic-model hierarchy nu << zeta << Gamma << Delta."""
        zeta = self.zeta(omega_c)
        checks = {
            "nu_ll_zeta": abs(nu) < 0.1 * zeta if zeta > 0 else nu == 0,
            "zeta_ll_gamma": zeta < 0.1 * self.gamma_opt,
            "gamma_ll_delta": self.gamma_opt < 0.1 * abs(self.delta),
            "cpt_threshold": zeta > 10.0 * self.gamma_raman,
        }
        return RegimeReport(
            zeta=zeta,
            nu=nu,
            gamma_opt=self.gamma_opt,
            delta=abs(self.delta),
            checks=checks,
        )


@dataclass(frozen=True)
class RegimeReport:
    """Outcome of the parameter-hierarchy check (informational, never raises)."""

    zeta: float
    nu: float
    gamma_opt: float
    delta: float
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    @property
    def violations(self) -> tuple[str, ...]:
        return tuple(k for k, v in self.checks.items() if not v)


@dataclass(frozen=True)
class SidebandFields:
    """Signal/idler pair replacing a monochromatic probe.

    The signal envelope rotates as ``exp(-i delta t)`` (optical frequency
    above the coupling field), the idler as ``exp(+i delta t)``.
    """

    omega_s: complex
    omega_i: complex
    delta: float


@dataclass(frozen=True)
class FieldState:
    """Complex coupling and probe Rabi envelopes at one position.

    ``theta`` is the relative phase arg(Omega_p) - arg(Omega_c) (the phase
    convention used for every gain and output-phase report in this package).
    """

    omega_c: complex
    omega_p: complex = 0j
    sidebands: SidebandFields | None = None

    @property
    def omega_plus(self) -> complex:
        return (self.omega_c + 1j * self.omega_p) / _SQRT2

    @property
    def omega_minus(self) -> complex:
        return (self.omega_c - 1j * self.omega_p) / _SQRT2

    @property
    def theta(self) -> float:
        """Relative phase; NaN when either field is off."""
        if self.omega_c == 0 or self.omega_p == 0:
            return math.nan
        return float(np.angle(self.omega_p) - np.angle(self.omega_c))

    @property
    def probe_ratio(self) -> float:
        """|Omega_p / Omega_c| regime indicator (not enforced)."""
        if self.omega_c == 0:
            return math.inf if self.omega_p != 0 else 0.0
        return abs(self.omega_p) / abs(self.omega_c)

    def with_probe_phase(self, theta: float) -> "FieldState":
        """Same field magnitudes with the probe phase set to theta (relative)."""
        mag = abs(self.omega_p)
        phase = np.angle(self.omega_c) + theta
        return FieldState(
            omega_c=self.omega_c,
            omega_p=mag * complex(np.cos(phase), np.sin(phase)),
            sidebands=self.sidebands,
        )


def to_circular(omega_c: complex, omega_p: complex) -> tuple[complex, complex]:
    """Map (coupling, probe) envelopes to circular components.

    Returns ``((Omega_c + i Omega_p)/sqrt(2), (Omega_c - i Omega_p)/sqrt(2))``.
    """
    return (
        (omega_c + 1j * omega_p) / _SQRT2,
        (omega_c - 1j * omega_p) / _SQRT2,
    )


def from_circular(omega_plus: complex, omega_minus: complex) -> tuple[complex, complex]:
    """Inverse of :func:`to_circular`; exact round trip."""
    return (
        (omega_plus + omega_minus) / _SQRT2,
        (omega_plus - omega_minus) / (1j * _SQRT2),
    )


def hamiltonian_from_circular(
    omega_plus: complex,
    omega_minus: complex,
    delta: float,
    zeeman_nu: float = 0.0,
    include_d2: bool = True,
) -> np.ndarray:
    """Interaction Hamiltonian (rad/s) for given circular Rabi amplitudes.

    ``zeeman_nu`` shifts |+1>_g by +nu and |-1>_g by -nu (two-photon detuning
    2 nu).  With ``include_d2=False`` the rows/columns of the detuned upper
    states are zeroed, leaving the bare resonant lambda system.
    """
    h = omega_plus * U_PLUS + omega_minus * U_MINUS
    h = h + h.conj().T
    h[1, 1] = -zeeman_nu
    h[2, 2] = +zeeman_nu
    if include_d2:
        for e in EXCITED_D2:
            h[e, e] += delta
    else:
        h[EXCITED_D2, :] = 0.0
        h[:, EXCITED_D2] = 0.0
    return h


def build_hamiltonian(
    fields: FieldState,
    params: MediumParams,
    zeeman_nu: float = 0.0,
    include_d2: bool = True,
) -> np.ndarray:
    """Interaction Hamiltonian for a :class:`FieldState` (see module docstring)."""
    return hamiltonian_from_circular(
        fields.omega_plus, fields.omega_minus, params.delta, zeeman_nu, include_d2
    )


@dataclass(frozen=True)
class Relaxation:
    """Linear relaxation map D(rho) added to the coherent evolution.

    Action on a 6x6 matrix:

    * excited populations decay at ``gamma0``, feeding the ground populations
      through the squared-coupling branching ratios (trace preserving);
    * optical (ground-excited) coherences decay at ``gamma_opt``
      (``gamma_opt_d2`` on the detuned line when configured);
    * excited-excited coherences decay at ``gamma0``;
    * the ground coherence decays at ``gamma_raman`` while the ground
      populations relax toward their common mean at the same rate
      (transit-relaxation model).
    """

    gamma0: float
    gamma_opt: float
    gamma_raman: float
    gamma_opt_d2: float | None = None

    @classmethod
    def from_medium(cls, params: MediumParams) -> "Relaxation":
        return cls(
            gamma0=params.gamma0,
            gamma_opt=params.gamma_opt,
            gamma_raman=params.gamma_raman,
            gamma_opt_d2=params.gamma_opt_d2,
        )

    def apply(self, rho: np.ndarray) -> np.ndarray:
        g0 = self.gamma0
        gr = self.gamma_raman
        g_opt_d1 = self.gamma_opt
        g_opt_d2 = self.gamma_opt if self.gamma_opt_d2 is None else self.gamma_opt_d2

        out = np.zeros_like(rho, dtype=complex)
        excited_pops = rho.diagonal().take(EXCITED)

        # populations
        for k, e in enumerate(EXCITED):
            out[e, e] = -g0 * excited_pops[k]
        feed = g0 * (excited_pops @ BRANCHING[list(EXCITED), :])
        ground_mean = 0.5 * (rho[1, 1] + rho[2, 2])
        for g in GROUND:
            out[g, g] = feed[g] + gr * (ground_mean - rho[g, g])

        # optical coherences (ground-excited), split by line
        for g in GROUND:
            out[0, g] = -g_opt_d1 * rho[0, g]
            out[g, 0] = -g_opt_d1 * rho[g, 0]
            for e in EXCITED_D2:
                out[e, g] = -g_opt_d2 * rho[e, g]
                out[g, e] = -g_opt_d2 * rho[g, e]

        # excited-excited coherences
        for a in EXCITED:
            for b in EXCITED:
                if a != b:
                    out[a, b] = -g0 * rho[a, b]

        # ground (Raman) coherence
        out[1, 2] = -gr * rho[1, 2]
        out[2, 1] = -gr * rho[2, 1]
        return out

    @cached_property
    def matrix(self) -> np.ndarray:
        """36x36 superoperator matrix in the column-major vectorization."""
        mat = np.zeros((N_LEVELS**2, N_LEVELS**2), dtype=complex)
        for j in range(N_LEVELS):
            for i in range(N_LEVELS):
                unit = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
                unit[i, j] = 1.0
                mat[:, i + N_LEVELS * j] = self.apply(unit).flatten(order="F")
        return mat


def build_relaxation(params: MediumParams) -> Relaxation:
    """Relaxation map for a medium (see :class:`Relaxation` for the model)."""
    return Relaxation.from_medium(params)


def to_dark_bright(matrix: np.ndarray) -> np.ndarray:
    """Conjugate a 6x6 operator into the dark/bright superposition basis.

    The transform is its own inverse (the unitary is a real symmetric
    involution), so applying it twice returns the input.
    """
    u = DARK_BRIGHT_UNITARY
    return u @ matrix @ u


def dark_state_population(rho: np.ndarray) -> float:
    """Population of the ground dark state |->_g = (|+1>_g - |-1>_g)/sqrt(2)."""
    return float(
        0.5 * (rho[1, 1].real + rho[2, 2].real) - rho[1, 2].real
    )


def ground_mixed_state() -> np.ndarray:
    """Equal incoherent mixture of the two ground states."""
    rho = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    rho[1, 1] = 0.5
    rho[2, 2] = 0.5
    return rho


def basis_state(index: int) -> np.ndarray:
    """Pure-state density matrix |index><index|."""
    rho = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    rho[index, index] = 1.0
    return rho


def density_matrix_violations(
    rho: np.ndarray,
    herm_tol: float = 1e-12,
    trace_tol: float = 1e-12,
    eig_floor: float = -1e-10,
) -> list[str]:
    """List of violated density-matrix invariants (empty when valid)."""
    problems = []
    if rho.shape != (N_LEVELS, N_LEVELS):
        return [f"shape {rho.shape} != (6, 6)"]
    scale = max(np.linalg.norm(rho), 1e-300)
    herm = np.linalg.norm(rho - rho.conj().T) / scale
    if herm > herm_tol:
        problems.append(f"hermiticity defect {herm:.3e} > {herm_tol:.1e}")
    tr = abs(np.trace(rho) - 1.0)
    if tr > trace_tol:
        problems.append(f"trace defect {tr:.3e} > {trace_tol:.1e}")
    eigs = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if eigs.min() < eig_floor:
        problems.append(f"negative eigenvalue {eigs.min():.3e} < {eig_floor:.1e}")
    return problems


def validate_density_matrix(rho: np.ndarray, **tols) -> np.ndarray:
    """Raise ValueError when rho is not a valid density matrix; return rho."""
    problems = density_matrix_violations(rho, **tols)
    if problems:
        raise ValueError("invalid density matrix: " + "; ".join(problems))
    return rho
