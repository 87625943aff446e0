"""
Crank-Nicolson scalar auxiliary variable stepper.

The unknowns are Z = (P, Q) and r = sqrt(E_1 + E_c). One step solves

    (Z+ - Z) / tau = -J (Z+ + Z) / 2 - r_half * B
    r+ - r         = 1/2 <G, Z+ - Z>

with J = [[0, D2], [-D2, 0]], B = (-G1, G2) and the pairing vector
G = (G2, G1), where (G1, G2) is the extrapolated g at t + tau/2. Inner
products are h-weighted. Every linear solve is diagonal per wavenumber.
"""
import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import fft, linalg

from src.exceptions import NumericalError, StepFailure
from src.model import (NlsProblem, SavState, e1, g_pair, hamiltonian, mass,
                       modified_hamiltonian, split)
from src.spectral import ComplexField, Grid1D, RealField, dense_d2, inner, laplacian
from src.splitting import strang_step

logger = logging.getLogger(__name__)

Pair = Tuple[RealField, RealField]

# |denominator| below this aborts the step
DENOMINATOR_FLOOR = 1e-12


class Algorithm:
    ALG1 = 'alg1'
    ALG2 = 'alg2'


class Solver:
    FOURIER_DIAGONAL = 'fourier_diagonal'
    DENSE_REFERENCE = 'dense_reference'


class Bootstrap:
    PREDICTOR = 'predictor'
    FROZEN = 'frozen'


@dataclass(frozen=True)
class StepperConfig:
    """
    Time stepping options.

    Args:
        tau: Time step
        algorithm: alg1 (Sherman-Morrison on A) or alg2 (Z1/Z2 decomposition)
        solver: fourier_diagonal, or dense_reference for small test grids
        bootstrap: How g at t = tau/2 is obtained on the first step
        residual_tolerance: Largest accepted relative residual of a dense solve
    """
    tau: float
    algorithm: str = Algorithm.ALG2
    solver: str = Solver.FOURIER_DIAGONAL
    bootstrap: str = Bootstrap.PREDICTOR
    residual_tolerance: float = 1e-11

    def __post_init__(self):
        if not np.isfinite(self.tau) or self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.algorithm not in (Algorithm.ALG1, Algorithm.ALG2):
            raise ValueError(f"Unknown algorithm: {self.algorithm}")
        if self.solver not in (Solver.FOURIER_DIAGONAL, Solver.DENSE_REFERENCE):
            raise ValueError(f"Unknown solver: {self.solver}")
        if self.bootstrap not in (Bootstrap.PREDICTOR, Bootstrap.FROZEN):
            raise ValueError(f"Unknown bootstrap mode: {self.bootstrap}")


@dataclass
class GHistory:
    """
    The last two evaluations of g with their times.

    Entries are tuples of arrays so the same stencil serves the pair
    (g1, g2) of the dynamics and the flow terms of the ground-state solver.
    """
    previous: Optional[Tuple[np.ndarray, ...]] = None
    current: Optional[Tuple[np.ndarray, ...]] = None
    previous_time: Optional[float] = None
    current_time: Optional[float] = None

    @property
    def size(self) -> int:
        return (self.previous is not None) + (self.current is not None)

    @property
    def ready(self) -> bool:
        return self.size == 2

    def push(self, values: Tuple[np.ndarray, ...], time: float):
        self.previous, self.previous_time = self.current, self.current_time
        self.current, self.current_time = tuple(values), time

    def clear(self):
        self.previous = self.current = None
        self.previous_time = self.current_time = None


def extrapolate_g(history: GHistory, tau: Optional[float] = None) -> Tuple[np.ndarray, ...]:
    """
    Second order extrapolation of g at the half step: 3/2 g^k - 1/2 g^(k-1).

    Args:
        history: Two past evaluations
        tau: Expected spacing of the two evaluations, checked when given

    Returns:
        Tuple: Extrapolated values, one array per history component

    Raises:
        ValueError: If fewer than two evaluations are stored or they are not tau apart
    """
    if not history.ready:
        raise ValueError(f"extrapolation needs two past evaluations of g, history holds {history.size}")
    if tau is not None:
        spacing = history.current_time - history.previous_time
        if not np.isclose(spacing, tau, rtol=1e-9, atol=1e-14):
            raise ValueError(f"history entries are {spacing} apart, expected tau = {tau}")
    return tuple(1.5 * now - 0.5 * before for now, before in zip(history.current, history.previous))


@lru_cache(maxsize=8)
def _dense_shifted_factor(grid: Grid1D, tau: float):
    n = grid.num_points
    d2 = dense_d2(grid)
    operator = np.block([[2.0 / tau * np.eye(n), d2], [-d2, 2.0 / tau * np.eye(n)]])
    return operator, linalg.lu_factor(operator)


def apply_shifted(pair: Pair, tau: float, grid: Grid1D) -> Pair:
    """Apply (2/tau) I + J to (zP, zQ) with the spectral Laplacian."""
    z_p, z_q = pair
    a = 2.0 / tau
    return a * z_p + laplacian(z_q, grid), a * z_q - laplacian(z_p, grid)


def solve_shifted(rhs: Pair, tau: float, grid: Grid1D, solver: str = Solver.FOURIER_DIAGONAL,
                  residual_tolerance: float = 1e-11) -> Pair:
    """
    Solve ((2/tau) I + J) z = b.

    Per wavenumber the block is [[a, -k^2], [k^2, a]] with a = 2/tau, whose
    determinant a^2 + k^4 never vanishes.

    Args:
        rhs: Right-hand side (bP, bQ)
        tau: Time step, any nonzero sign
        grid: Grid of the fields
        solver: fourier_diagonal or dense_reference
        residual_tolerance: Relative residual bound checked on the dense path

    Returns:
        Pair: The solution (zP, zQ)
    """
    b_p = np.asarray(grid.check(rhs[0], "rhs P"), dtype=float)
    b_q = np.asarray(grid.check(rhs[1], "rhs Q"), dtype=float)
    if solver == Solver.DENSE_REFERENCE:
        operator, factor = _dense_shifted_factor(grid, float(tau))
        stacked = np.concatenate([b_p, b_q])
        solution = linalg.lu_solve(factor, stacked)
        residual = np.linalg.norm(operator @ solution - stacked) / max(np.linalg.norm(stacked), 1e-300)
        if residual > residual_tolerance:
            raise StepFailure("dense shifted solve inaccurate", diagnostics={'residual': residual})
        return solution[:grid.num_points], solution[grid.num_points:]

    a = 2.0 / tau
    k2 = grid.rwavenumbers ** 2
    hat_p = fft.rfft(b_p)
    hat_q = fft.rfft(b_q)
    determinant = a * a + k2 * k2
    z_p = fft.irfft((a * hat_p + k2 * hat_q) / determinant, n=grid.num_points)
    z_q = fft.irfft((a * hat_q - k2 * hat_p) / determinant, n=grid.num_points)
    return z_p, z_q


def _pairing(g_tilde: Pair, z: Pair, grid: Grid1D) -> float:
    """<G, Z> with G = (G2, G1)."""
    g1, g2 = g_tilde
    return inner(g2, z[0], grid) + inner(g1, z[1], grid)


def _check_denominator(value: float, name: str):
    if not np.isfinite(value) or abs(value) < DENOMINATOR_FLOOR:
        raise StepFailure(f"near-singular SAV denominator {name}", diagnostics={name: value})


def _cn_alg1(P, Q, r, g_tilde: Pair, tau: float, grid: Grid1D, solver: str, tolerance: float):
    g1, g2 = g_tilde
    b_tilde = (-g1, g2)
    half = 0.5 * tau

    def apply_a_inverse(pair):
        z_p, z_q = solve_shifted(pair, tau, grid, solver, tolerance)
        return 2.0 / tau * z_p, 2.0 / tau * z_q

    correction = 0.25 * tau * _pairing(g_tilde, (P, Q), grid) - tau * r
    c_p = P - half * laplacian(Q, grid) + correction * b_tilde[0]
    c_q = Q + half * laplacian(P, grid) + correction * b_tilde[1]

    a_inv_c = apply_a_inverse((c_p, c_q))
    a_inv_b = apply_a_inverse(b_tilde)
    denominator = 1.0 + 0.25 * tau * _pairing(g_tilde, a_inv_b, grid)
    _check_denominator(denominator, "1 + tau/4 <G, A^-1 B>")
    projection = _pairing(g_tilde, a_inv_c, grid) / denominator

    new_p = a_inv_c[0] - 0.25 * tau * projection * a_inv_b[0]
    new_q = a_inv_c[1] - 0.25 * tau * projection * a_inv_b[1]
    new_r = r + 0.5 * (projection - _pairing(g_tilde, (P, Q), grid))
    return new_p, new_q, new_r


def _cn_alg2(P, Q, r, g_tilde: Pair, tau: float, grid: Grid1D, solver: str, tolerance: float):
    g1, g2 = g_tilde
    a = 2.0 / tau
    z1 = solve_shifted((a * P, a * Q), tau, grid, solver, tolerance)
    z2 = solve_shifted((g1, -g2), tau, grid, solver, tolerance)

    denominator = 2.0 - _pairing(g_tilde, z2, grid)
    _check_denominator(denominator, "2 - <G, Z2>")
    r_half = (2.0 * r + _pairing(g_tilde, (z1[0] - P, z1[1] - Q), grid)) / denominator

    half_p = z1[0] + r_half * z2[0]
    half_q = z1[1] + r_half * z2[1]
    return 2.0 * half_p - P, 2.0 * half_q - Q, 2.0 * r_half - r


def advance_frozen(state: SavState, g_tilde: Pair, tau: float, algorithm: str = Algorithm.ALG2,
                   solver: str = Solver.FOURIER_DIAGONAL, residual_tolerance: float = 1e-11) -> SavState:
    """
    One Crank-Nicolson step with a given half-step g. tau may be negative.

    Args:
        state: Current level
        g_tilde: (G1, G2) at the half step
        tau: Step size
        algorithm: alg1 or alg2
        solver: Linear solver for the shifted systems
        residual_tolerance: Dense solve residual bound

    Returns:
        SavState: The next level at state.time + tau

    Raises:
        StepFailure: On a near-singular denominator or non-finite result
    """
    if tau == 0:
        raise ValueError("tau must be nonzero")
    grid = state.grid
    g_tilde = (np.asarray(grid.check(g_tilde[0], "G1"), dtype=float),
               np.asarray(grid.check(g_tilde[1], "G2"), dtype=float))
    core = _cn_alg1 if algorithm == Algorithm.ALG1 else _cn_alg2
    new_p, new_q, new_r = core(state.P, state.Q, state.r, g_tilde, tau, grid, solver, residual_tolerance)
    if not (np.all(np.isfinite(new_p)) and np.all(np.isfinite(new_q)) and np.isfinite(new_r)):
        raise StepFailure("non-finite values after step", diagnostics={'time': state.time, 'r': new_r})
    return SavState(new_p, new_q, float(new_r), state.time + tau, grid)


def half_step_g(state: SavState, history: GHistory, problem: NlsProblem, config: StepperConfig) -> Pair:
    """
    g at t + tau/2: extrapolated when two past values exist, otherwise bootstrapped.

    The predictor bootstrap evaluates g on a Strang half step u(tau/2); the
    frozen bootstrap reuses g(u0) and is first order on that step.
    """
    if history.ready:
        return extrapolate_g(history, config.tau)
    if config.bootstrap == Bootstrap.FROZEN:
        return g_pair(state.P, state.Q, problem)
    predicted = strang_step(state.field, 0.5 * config.tau, problem)
    return g_pair(*split(predicted), problem)


def step_alg1(state: SavState, history: GHistory, problem: NlsProblem, config: StepperConfig) -> SavState:
    """One step solved through A = I + tau/2 J and the Sherman-Morrison formula."""
    g_tilde = half_step_g(state, history, problem, config)
    return advance_frozen(state, g_tilde, config.tau, Algorithm.ALG1, config.solver, config.residual_tolerance)


def step_alg2(state: SavState, history: GHistory, problem: NlsProblem, config: StepperConfig) -> SavState:
    """One step solved through the decomposition Z_half = Z1 + r_half Z2."""
    g_tilde = half_step_g(state, history, problem, config)
    return advance_frozen(state, g_tilde, config.tau, Algorithm.ALG2, config.solver, config.residual_tolerance)


def init_state(u0: ComplexField, problem: NlsProblem, time: float = 0.0) -> SavState:
    """
    Initial level with r = sqrt(E_1(u0) + E_c).

    Raises:
        EnergyShiftError: If E_1(u0) + E_c <= 0
    """
    P, Q = split(problem.grid.check(u0, "u0"))
    g_pair(P, Q, problem)
    return SavState(P, Q, float(np.sqrt(e1(P, Q, problem) + problem.energy_shift)), time, problem.grid)


class SavStepper:
    """
    Owns the g history of one trajectory and advances it step by step.

    Args:
        problem: Problem definition
        config: Step options
    """

    def __init__(self, problem: NlsProblem, config: StepperConfig):
        self.logger = logging.getLogger(__name__)
        self.problem = problem
        self.config = config
        self.history = GHistory()
        self._step = step_alg1 if config.algorithm == Algorithm.ALG1 else step_alg2

    def reset(self):
        self.history.clear()

    def step(self, state: SavState) -> SavState:
        if self.history.size == 0:
            self.history.push(g_pair(state.P, state.Q, self.problem), state.time)
        new_state = self._step(state, self.history, self.problem, self.config)
        self.history.push(g_pair(new_state.P, new_state.Q, self.problem), new_state.time)
        return new_state


@dataclass(frozen=True)
class ConservationReport:
    step: int
    t: float
    mass: float
    hamiltonian: float
    modified_hamiltonian: float
    r: float

    @classmethod
    def of(cls, step: int, state: SavState, problem: NlsProblem) -> "ConservationReport":
        return cls(step, state.time, mass(state.P, state.Q, state.grid),
                   hamiltonian(state.P, state.Q, problem), modified_hamiltonian(state), state.r)


Observer = Callable[[float, float, float, float, float], None]


def resolve_steps(t_end: float, tau: float) -> Tuple[int, float]:
    """
    Number of steps K = round(t_end / tau) and the step t_end / K that lands on t_end.

    A positive t_end always gets at least one step.
    """
    if t_end < 0:
        raise ValueError(f"t_end must be non-negative, got {t_end}")
    if t_end == 0:
        return 0, tau
    steps = max(1, int(round(t_end / tau)))
    adjusted = t_end / steps
    if not np.isclose(adjusted, tau, rtol=1e-12, atol=0.0):
        logger.warning(f"Adjusting tau from {tau} to {adjusted} so that {steps} steps reach t_end={t_end}")
        return steps, adjusted
    return steps, tau


def run(state: SavState, problem: NlsProblem, config: StepperConfig, t_end: float,
        observer: Optional[Observer] = None) -> Tuple[SavState, List[ConservationReport]]:
    """
    Advance from state.time by t_end.

    Args:
        state: Initial level
        problem: Problem definition
        config: Step options; tau is adjusted when it does not divide t_end
        t_end: Length of the integration interval
        observer: Called with (t, mass, H, H~, r) at the initial level and after every step

    Returns:
        Tuple: (final state, reports for levels 0..K)

    Raises:
        StepFailure: With the index of the failing step
    """
    steps, tau = resolve_steps(t_end, config.tau)
    if tau != config.tau:
        config = replace(config, tau=tau)
    stepper = SavStepper(problem, config)

    reports = [ConservationReport.of(0, state, problem)]
    if observer:
        observer(*_observed(reports[-1]))
    for index in range(1, steps + 1):
        try:
            state = stepper.step(state)
        except StepFailure as e:
            if e.step_index is None:
                e.step_index = index
            raise
        except NumericalError as e:
            raise StepFailure(str(e), step_index=index, diagnostics={'cause': type(e).__name__}) from e
        reports.append(ConservationReport.of(index, state, problem))
        if observer:
            observer(*_observed(reports[-1]))
    logger.debug(f"SAV run finished after {steps} steps at t={state.time}")
    return state, reports


def _observed(report: ConservationReport) -> Tuple[float, float, float, float, float]:
    return report.t, report.mass, report.hamiltonian, report.modified_hamiltonian, report.r
