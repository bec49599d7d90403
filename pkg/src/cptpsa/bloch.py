"""Optical Bloch equation solvers: steady states, time evolution, sidebands.

Everything works on the 36-dimensional vectorization of the 6x6 density
matrix.  Vectorization is column-major: ``vec(rho) = rho.flatten(order="F")``,
so ``vec(A rho B) = kron(B.T, A) vec(rho)`` and the Liouvillian is

    M = -i (kron(I, H) - kron(H.T, I)) + R

with R the relaxation superoperator matrix.  The all-ones trace functional is
a left null vector of M (trace conservation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .atomic import (
    N_LEVELS,
    PROBE_COUPLING,
    FieldState,
    MediumParams,
    Relaxation,
    build_relaxation,
    hamiltonian_from_circular,
)
from .errors import SingularSystemError, StepFailureError

_DIM = N_LEVELS * N_LEVELS
_EYE = np.eye(N_LEVELS)

# Row selecting the trace of vec(rho): diagonal entries sit at k = i*(N+1).
_TRACE_ROW = np.zeros(_DIM)
_TRACE_ROW[:: N_LEVELS + 1] = 1.0


def vectorize(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).flatten(order="F")


def unvectorize(vec: np.ndarray) -> np.ndarray:
    return vec.reshape((N_LEVELS, N_LEVELS), order="F")


def build_liouvillian(hamiltonian: np.ndarray, relaxation: Relaxation) -> np.ndarray:
    """36x36 matrix M with vec(d rho/dt) = M vec(rho)."""
    h = np.asarray(hamiltonian, dtype=complex)
    commutator = np.kron(_EYE, h) - np.kron(h.T, _EYE)
    return -1j * commutator + relaxation.matrix


def steady_state(
    hamiltonian: np.ndarray,
    relaxation: Relaxation,
    residual_tol: float = 1e-9,
) -> np.ndarray:
    """Unique unit-trace solution of M vec(rho) = 0.

    One row of the singular system is replaced by the trace constraint; the
    result is checked against the full Liouvillian.  Raises
    :class:`SingularSystemError` when the null space is not one-dimensional
    (degenerate relaxation, e.g. every rate zero).
    """
    liouv = build_liouvillian(hamiltonian, relaxation)
    return _steady_state_from_liouvillian(liouv, residual_tol)


def _steady_state_from_liouvillian(liouv: np.ndarray, residual_tol: float = 1e-9) -> np.ndarray:
    system = liouv.copy()
    system[0, :] = _TRACE_ROW
    rhs = np.zeros(_DIM, dtype=complex)
    rhs[0] = 1.0
    try:
        vec = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            "steady-state system is singular; null space is not one-dimensional"
        ) from exc
    scale = np.linalg.norm(liouv, "fro")
    residual = np.linalg.norm(liouv @ vec)
    if not np.isfinite(residual) or residual > residual_tol * scale:
        raise SingularSystemError(
            f"steady-state residual {residual:.3e} exceeds "
            f"{residual_tol:.1e} * ||M|| = {residual_tol * scale:.3e}"
        )
    rho = unvectorize(vec)
    return 0.5 * (rho + rho.conj().T)


def evolve(
    rho0: np.ndarray,
    hamiltonian: np.ndarray,
    relaxation: Relaxation,
    t_final: float,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    method: str = "DOP853",
    dense_times: np.ndarray | None = None,
):
    """Integrate the Bloch equations from rho0 to t_final.

    Uses an adaptive embedded Runge-Kutta stepper on the vectorized system.
    Returns the final density matrix, or the stack of matrices at
    ``dense_times`` when given.  Raises :class:`StepFailureError` if the step
    controller gives up (stiff configuration; prefer :func:`steady_state`).
    """
    if t_final == 0 and dense_times is None:
        return np.array(rho0, dtype=complex, copy=True)
    liouv = build_liouvillian(hamiltonian, relaxation)
    sol = solve_ivp(
        lambda _t, y: liouv @ y,
        (0.0, float(t_final)),
        vectorize(rho0),
        method=method,
        rtol=rtol,
        atol=atol,
        t_eval=dense_times,
    )
    if not sol.success:
        raise StepFailureError(f"time integration failed: {sol.message}")
    if dense_times is None:
        return unvectorize(sol.y[:, -1])
    return np.stack([unvectorize(sol.y[:, k]) for k in range(sol.y.shape[1])])


@dataclass(frozen=True)
class SidebandResponse:
    """First-order density-matrix response to a weak signal/idler pair.

    ``sigma_plus`` is the component of rho(t) rotating as ``exp(-i delta t)``
    (with the signal field), ``sigma_minus`` the ``exp(+i delta t)`` component
    (with the idler).  Hermiticity of the total rho(t) makes
    ``sigma_minus = sigma_plus^dagger`` exactly.
    """

    sigma_plus: np.ndarray
    sigma_minus: np.ndarray
    delta: float


def _perturbation_solve(
    liouv: np.ndarray, shift: complex, source: np.ndarray, residual_tol: float
) -> np.ndarray:
    """Solve (M + shift*I) vec(sigma) = vec(source) with zero-trace constraint."""
    lhs = liouv + shift * np.eye(_DIM)
    system = lhs.copy()
    system[0, :] = _TRACE_ROW
    rhs = vectorize(source)
    rhs[0] = 0.0
    try:
        vec = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("sideband response system is singular") from exc
    scale = max(np.linalg.norm(lhs, "fro") * np.linalg.norm(vec), np.linalg.norm(rhs))
    residual = np.linalg.norm(system @ vec - rhs)
    if not np.isfinite(residual) or (scale > 0 and residual > residual_tol * scale):
        raise SingularSystemError(
            f"sideband response residual {residual:.3e} too large "
            "(drive resonant with an undamped mode?)"
        )
    return unvectorize(vec)


def sideband_solve_circular(
    liouv: np.ndarray,
    rho_ss: np.ndarray,
    sig_circ: tuple[complex, complex],
    idl_circ: tuple[complex, complex],
    delta: float,
    residual_tol: float = 1e-9,
) -> tuple[np.ndarray, np.ndarray]:
    """First-order Fourier components of rho for arbitrary sideband polarization.

    ``sig_circ``/``idl_circ`` are the (sigma+, sigma-) circular Rabi
    amplitudes of the signal (e^{-i delta t}) and idler (e^{+i delta t})
    envelopes; the Liouvillian must belong to the carrier alone.
    """
    v_signal = (
        sig_circ[0] * U_PLUS + sig_circ[1] * U_MINUS
        + np.conj(idl_circ[0]) * U_PLUS.conj().T + np.conj(idl_circ[1]) * U_MINUS.conj().T
    )
    v_idler = (
        idl_circ[0] * U_PLUS + idl_circ[1] * U_MINUS
        + np.conj(sig_circ[0]) * U_PLUS.conj().T + np.conj(sig_circ[1]) * U_MINUS.conj().T
    )
    src_s = 1j * (v_signal @ rho_ss - rho_ss @ v_signal)
    src_i = 1j * (v_idler @ rho_ss - rho_ss @ v_idler)
    sigma_plus = _perturbation_solve(liouv, +1j * delta, src_s, residual_tol)
    sigma_minus = _perturbation_solve(liouv, -1j * delta, src_i, residual_tol)
    return sigma_plus, sigma_minus


def sideband_response(
    rho_ss: np.ndarray,
    fields: FieldState,
    params: MediumParams,
    delta: float | None = None,
    zeeman_nu: float = 0.0,
    include_d2: bool = True,
    residual_tol: float = 1e-9,
) -> SidebandResponse:
    """Linear response of the coupling-dressed steady state to the sidebands.

    ``rho_ss`` must be the steady state under the coupling field alone.  The
    signal and idler amplitudes enter through ``fields.sidebands``; the
    response is exactly linear in them.  For each Fourier component the
    system ``(M +- i delta) vec(sigma) = i vec([V, rho_ss])`` is solved, where
    V collects the first-order field couplings.
    """
    if fields.sidebands is None:
        raise ValueError("fields.sidebands is required for sideband_response")
    sb = fields.sidebands
    if delta is None:
        delta = sb.delta

    carrier = FieldState(omega_c=fields.omega_c, omega_p=0j)
    h0 = hamiltonian_from_circular(
        carrier.omega_plus, carrier.omega_minus, params.delta, zeeman_nu, include_d2
    )
    liouv = build_liouvillian(h0, build_relaxation(params))
    sigma_plus, sigma_minus = sideband_solve(
        liouv, rho_ss, sb.omega_s, sb.omega_i, delta, residual_tol
    )
    return SidebandResponse(sigma_plus=sigma_plus, sigma_minus=sigma_minus, delta=delta)
