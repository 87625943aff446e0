"""
Lie and Strang splitting baselines.

Both sub-flows are solved exactly: the free flow i u_t = -u_xx is a Fourier
multiplier and the local flow i u_t = (V + f(|u|^2)) u keeps |u| fixed, so it
is a pointwise phase rotation.
"""
from dataclasses import dataclass

import numpy as np
from scipy import fft

from src.model import NlsProblem
from src.spectral import ComplexField, Grid1D


class SplitOrder:
    LIE = 'lie'
    STRANG = 'strang'


@dataclass(frozen=True)
class SplitScheme:
    order: str
    tau: float

    def __post_init__(self):
        if self.order not in (SplitOrder.LIE, SplitOrder.STRANG):
            raise ValueError(f"Unknown splitting order: {self.order}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


def linear_flow(u: ComplexField, dt: float, grid: Grid1D) -> ComplexField:
    """Exact free flow over dt: u_hat_p <- exp(-i k_p^2 dt) u_hat_p."""
    values = grid.check(u, "u")
    return fft.ifft(np.exp(-1j * grid.wavenumbers ** 2 * dt) * fft.fft(values))


def nonlinear_flow(u: ComplexField, dt: float, problem: NlsProblem) -> ComplexField:
    """Exact local flow over dt: u <- u * exp(-i (V + f(|u|^2)) dt)."""
    values = problem.grid.check(u, "u")
    density = np.abs(values) ** 2
    return values * np.exp(-1j * (problem.potential + problem.nonlinearity.f(density)) * dt)


def lie_step(u: ComplexField, dt: float, problem: NlsProblem) -> ComplexField:
    return nonlinear_flow(linear_flow(u, dt, problem.grid), dt, problem)


def strang_step(u: ComplexField, dt: float, problem: NlsProblem) -> ComplexField:
    half = 0.5 * dt
    grid = problem.grid
    return linear_flow(nonlinear_flow(linear_flow(u, half, grid), dt, problem), half, grid)


def split_step(u: ComplexField, scheme: SplitScheme, problem: NlsProblem) -> ComplexField:
    """
    Advance u by one step of the given splitting.

    Args:
        u: Current field
        scheme: Splitting order and step size
        problem: Problem definition

    Returns:
        ComplexField: Field after one step
    """
    if scheme.order == SplitOrder.LIE:
        return lie_step(u, scheme.tau, problem)
    return strang_step(u, scheme.tau, problem)
