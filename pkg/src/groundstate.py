"""
Ground states of the Gross-Pitaevskii energy

    E(phi) = integral 1/2 |phi_x|^2 + V phi^2 + 1/2 beta phi^4

by a SAV discretization of the projected gradient flow

    phi_t = 1/2 phi_xx - V phi - beta phi^3 + lambda phi

with projection back to the unit sphere after every step.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy import fft

from src.exceptions import EnergyShiftError, NumericalError
from src.model import DEFAULT_ENERGY_SHIFT
from src.sav import GHistory, extrapolate_g
from src.spectral import Grid1D, RealField, h1_seminorm, inner, l2_norm, quadrature

logger = logging.getLogger(__name__)

# (g, phi, lambda phi): the explicit part of one step
FlowTerms = Tuple[RealField, RealField, RealField]

# Allowed increase of E per step before the trace is flagged non-monotone
ENERGY_INCREASE_TOLERANCE = 1e-10


class RMode:
    RESET = 'reset'
    CARRY = 'carry'


@dataclass(frozen=True, eq=False)
class GroundStateProblem:
    """
    Args:
        grid: Collocation grid
        potential: V at the nodes
        beta: Cubic interaction strength
        energy_shift: E_c > 0
        tol: Stop when ||phi^(k+1) - phi^k||_0 / tau < tol
        max_steps: Iteration cap
        r_mode: reset (r recomputed after normalization) or carry (r keeps its gap to
            sqrt(E_1 + E_c) across the normalization)
    """
    grid: Grid1D
    potential: RealField
    beta: float = 0.0
    energy_shift: float = DEFAULT_ENERGY_SHIFT
    tol: float = 1e-8
    max_steps: int = 100000
    r_mode: str = RMode.RESET

    def __post_init__(self):
        potential = np.asarray(self.grid.check(self.potential, "potential"), dtype=float)
        object.__setattr__(self, 'potential', potential)
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be at least 1, got {self.max_steps}")
        if not self.energy_shift > 0:
            raise ValueError(f"energy_shift must be positive, got {self.energy_shift}")
        if self.r_mode not in (RMode.RESET, RMode.CARRY):
            raise ValueError(f"Unknown r mode: {self.r_mode}")


@dataclass
class GroundStateResult:
    phi: RealField
    energy: float
    modified_energy: float
    chemical_potential: float
    iterations: int
    converged: bool
    monotone: bool
    r: float
    energy_trace: List[float] = field(default_factory=list)


def gs_nonlinear_energy(phi: RealField, problem: GroundStateProblem) -> float:
    """integral V phi^2 + 1/2 beta phi^4, the part of E carried by r."""
    density = problem.grid.check(phi, "phi") ** 2
    return quadrature(problem.potential * density + 0.5 * problem.beta * density ** 2, problem.grid)


def gs_energy(phi: RealField, problem: GroundStateProblem) -> float:
    return 0.5 * h1_seminorm(phi, problem.grid) ** 2 + gs_nonlinear_energy(phi, problem)


def chemical_potential(phi: RealField, problem: GroundStateProblem) -> float:
    """mu = integral 1/2 |phi_x|^2 + V phi^2 + beta phi^4."""
    density = problem.grid.check(phi, "phi") ** 2
    return (0.5 * h1_seminorm(phi, problem.grid) ** 2
            + quadrature(problem.potential * density + problem.beta * density ** 2, problem.grid))


def gs_modified_energy(phi: RealField, r: float, grid: Grid1D) -> float:
    return 0.5 * h1_seminorm(phi, grid) ** 2 + r ** 2


def gs_auxiliary(phi: RealField, problem: GroundStateProblem) -> float:
    """r = sqrt(E_1 + E_c) for the ground-state energy."""
    shifted = gs_nonlinear_energy(phi, problem) + problem.energy_shift
    if not np.isfinite(shifted):
        raise NumericalError(f"ground-state energy evaluated to {shifted}")
    if shifted <= 0:
        raise EnergyShiftError(f"energy shift too small: E_1 + E_c = {shifted:.6e}")
    return float(np.sqrt(shifted))


def gs_gradient(phi: RealField, problem: GroundStateProblem) -> RealField:
    """(2 V phi + 2 beta phi^3) / sqrt(E_1 + E_c)."""
    return (2.0 * problem.potential * phi + 2.0 * problem.beta * phi ** 3) / gs_auxiliary(phi, problem)


def flow_multiplier(phi: RealField, r: float, g: RealField, grid: Grid1D) -> float:
    """
    Lagrange multiplier of the projected flow, 1/2 |phi|_1^2 + 1/2 r <g, phi>.

    Equals the chemical potential when r = sqrt(E_1 + E_c).
    """
    return 0.5 * h1_seminorm(phi, grid) ** 2 + 0.5 * r * inner(g, phi, grid)


def stabilization(phi: RealField, problem: GroundStateProblem) -> float:
    """S = max |V + 3 beta phi^2|, the largest local rate of the explicit force."""
    return float(np.max(np.abs(problem.potential + 3.0 * problem.beta * phi ** 2)))


def flow_terms(phi: RealField, r: float, problem: GroundStateProblem) -> FlowTerms:
    """The explicit terms (g, phi, lambda phi) that the step extrapolates to the half step."""
    g = gs_gradient(phi, problem)
    return g, phi, flow_multiplier(phi, r, g, problem.grid) * phi


def _solve_flow_operator(rhs: RealField, tau: float, shift: float, grid: Grid1D) -> RealField:
    # (2/tau + S) I - 1/2 D2 is diagonal with entries 2/tau + S + k^2/2
    multiplier = 2.0 / tau + shift + 0.5 * grid.rwavenumbers ** 2
    return fft.irfft(fft.rfft(rhs) / multiplier, n=grid.num_points)


def _flow_step(phi: RealField, r: float, terms: FlowTerms, tau: float, shift: float,
               grid: Grid1D) -> Tuple[RealField, float]:
    """
    Unnormalized step of

        (phi+ - phi)/tau = 1/2 D2 phi_h - S (phi_h - phi~) - 1/2 r_h g~ + (lambda phi)~
        r+ - r = 1/2 <g~, phi+ - phi>

    with phi_h = (phi+ + phi)/2, split as phi_h = phi1 + r_h phi2.
    """
    g_tilde, phi_tilde, lagrange_tilde = terms
    phi1 = _solve_flow_operator(2.0 / tau * phi + shift * phi_tilde + lagrange_tilde, tau, shift, grid)
    phi2 = _solve_flow_operator(-0.5 * g_tilde, tau, shift, grid)
    # <g~, phi2> <= 0, so the denominator is at least 2
    denominator = 2.0 - inner(g_tilde, phi2, grid)
    r_half = (2.0 * r + inner(g_tilde, phi1 - phi, grid)) / denominator
    phi_half = phi1 + r_half * phi2
    return 2.0 * phi_half - phi, 2.0 * r_half - r


def _normalize(phi_plus: RealField, r_plus: float, problem: GroundStateProblem) -> Tuple[RealField, float]:
    norm = l2_norm(phi_plus, problem.grid)
    if not np.isfinite(norm) or norm == 0:
        raise NumericalError(f"ground-state iterate has norm {norm}")
    phi = phi_plus / norm
    if problem.r_mode == RMode.RESET:
        return phi, gs_auxiliary(phi, problem)
    # carry: the projection moves r with sqrt(E_1 + E_c) and keeps their gap
    return phi, r_plus + gs_auxiliary(phi, problem) - gs_auxiliary(phi_plus, problem)


def predictor_terms(phi: RealField, r: float, problem: GroundStateProblem, tau: float,
                    shift: float) -> FlowTerms:
    """Terms at the first half step: a tau/2 step with everything frozen at phi, normalized."""
    phi_half, r_half = _flow_step(phi, r, flow_terms(phi, r, problem), 0.5 * tau, shift, problem.grid)
    phi_half, r_half = _normalize(phi_half, r_half, problem)
    return flow_terms(phi_half, r_half, problem)


def gs_step(phi: RealField, r: float, history: GHistory, problem: GroundStateProblem,
            tau: float) -> Tuple[RealField, float]:
    """
    One normalized SAV gradient-flow step.

    The explicit force is extrapolated to the half step and balanced by the
    implicit stabilization S, so stiff potentials do not limit tau. The
    multiplier term keeps the flow tangent to the unit sphere; a discrete
    ground state is therefore left unchanged by the step.

    Args:
        phi: Current iterate with unit L2 norm
        r: Current auxiliary variable
        history: Past flow terms; fewer than two triggers the predictor
        problem: Ground-state problem
        tau: Pseudo-time step

    Returns:
        Tuple: (phi_next, r_next) with ||phi_next||_0 = 1

    Raises:
        NumericalError: If the iterate stops being finite
    """
    grid = problem.grid
    phi = np.asarray(grid.check(phi, "phi"), dtype=float)
    shift = stabilization(phi, problem)
    if history.ready:
        terms = extrapolate_g(history, tau)
    else:
        terms = predictor_terms(phi, r, problem, tau, shift)
    phi_plus, r_plus = _flow_step(phi, r, terms, tau, shift, grid)
    if not (np.all(np.isfinite(phi_plus)) and np.isfinite(r_plus)):
        raise NumericalError(f"ground-state step produced non-finite values (r={r_plus})")
    return _normalize(phi_plus, r_plus, problem)


def solve_ground_state(problem: GroundStateProblem, phi0: RealField, tau: float) -> GroundStateResult:
    """
    Iterate gs_step from phi0 until the update rate drops below problem.tol.

    Args:
        problem: Ground-state problem
        phi0: Initial guess, normalized here
        tau: Pseudo-time step

    Returns:
        GroundStateResult: Final iterate, energies and the energy trace
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    grid = problem.grid
    phi = np.asarray(grid.check(phi0, "phi0"), dtype=float)
    phi = phi / l2_norm(phi, grid)
    r = gs_auxiliary(phi, problem)
    history = GHistory()
    history.push(flow_terms(phi, r, problem), 0.0)

    energy = gs_energy(phi, problem)
    trace = [energy]
    monotone = True
    converged = False
    iterations = 0
    while iterations < problem.max_steps:
        new_phi, r = gs_step(phi, r, history, problem, tau)
        iterations += 1
        history.push(flow_terms(new_phi, r, problem), iterations * tau)
        new_energy = gs_energy(new_phi, problem)
        if new_energy > energy + ENERGY_INCREASE_TOLERANCE:
            if monotone:
                logger.warning(f"Ground-state energy increased at step {iterations}: {energy:.12g} -> {new_energy:.12g}")
            monotone = False
        trace.append(new_energy)
        rate = l2_norm(new_phi - phi, grid) / tau
        phi, energy = new_phi, new_energy
        if rate < problem.tol:
            converged = True
            break

    if not converged:
        logger.warning(f"Ground state not converged after {iterations} steps (tol={problem.tol})")
    logger.info(f"Ground state: E={energy:.10g} after {iterations} steps, converged={converged}")
    return GroundStateResult(
        phi=phi,
        energy=energy,
        modified_energy=gs_modified_energy(phi, r, grid),
        chemical_potential=chemical_potential(phi, problem),
        iterations=iterations,
        converged=converged,
        monotone=monotone,
        r=r,
        energy_trace=trace,
    )
