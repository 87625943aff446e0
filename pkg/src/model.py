"""
Continuous problem definition: potential, nonlinearity, the energies of
i u_t = -Laplace(u) + V u + f(|u|^2) u and the SAV functions g_1, g_2.

u = P + iQ is handled through its real and imaginary parts; f and F are
evaluated at the density s = P^2 + Q^2.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np

from src.exceptions import EnergyShiftError, NumericalError
from src.spectral import ComplexField, Grid1D, RealField, h1_seminorm, quadrature

logger = logging.getLogger(__name__)

DEFAULT_ENERGY_SHIFT = 1.0


class NonlinearityKind:
    NONE = 'none'
    CUBIC = 'cubic'
    POWER = 'power'
    CUSTOM = 'custom'


@dataclass(frozen=True)
class Nonlinearity:
    """
    Nonlinearity f(s) with its primitive F (F' = f, F(0) = 0).

    cubic:  f(s) = beta * s,            F(s) = beta * s^2 / 2
    power:  f(s) = beta * s^(2/gamma),  F(s) = beta * gamma / (2 + gamma) * s^((2 + gamma)/gamma)
    """
    kind: str = NonlinearityKind.NONE
    beta: float = 0.0
    gamma: float = 2.0
    custom_f: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    custom_primitive: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in (NonlinearityKind.NONE, NonlinearityKind.CUBIC,
                             NonlinearityKind.POWER, NonlinearityKind.CUSTOM):
            raise ValueError(f"Unknown nonlinearity kind: {self.kind}")
        if self.kind == NonlinearityKind.POWER and not self.gamma > 0:
            raise ValueError(f"power nonlinearity needs gamma > 0, got {self.gamma}")
        if self.kind == NonlinearityKind.CUSTOM and (self.custom_f is None or self.custom_primitive is None):
            raise ValueError("custom nonlinearity needs both f and F")

    @classmethod
    def none(cls) -> "Nonlinearity":
        return cls(NonlinearityKind.NONE)

    @classmethod
    def cubic(cls, beta: float) -> "Nonlinearity":
        return cls(NonlinearityKind.CUBIC, beta=float(beta))

    @classmethod
    def power(cls, beta: float, gamma: float) -> "Nonlinearity":
        return cls(NonlinearityKind.POWER, beta=float(beta), gamma=float(gamma))

    @classmethod
    def custom(cls, f: Callable, primitive: Callable) -> "Nonlinearity":
        return cls(NonlinearityKind.CUSTOM, custom_f=f, custom_primitive=primitive)

    @classmethod
    def parse(cls, descriptor: str) -> "Nonlinearity":
        """
        Parse `none`, `cubic:beta` or `power:beta:gamma`.

        Args:
            descriptor: Nonlinearity descriptor

        Returns:
            Nonlinearity: The parsed nonlinearity
        """
        parts = descriptor.strip().split(':')
        try:
            if parts[0] == NonlinearityKind.NONE and len(parts) == 1:
                return cls.none()
            if parts[0] == NonlinearityKind.CUBIC and len(parts) == 2:
                return cls.cubic(float(parts[1]))
            if parts[0] == NonlinearityKind.POWER and len(parts) == 3:
                return cls.power(float(parts[1]), float(parts[2]))
        except ValueError as e:
            raise ValueError(f"Invalid nonlinearity '{descriptor}': {str(e)}") from e
        raise ValueError(f"Invalid nonlinearity '{descriptor}': expected none | cubic:beta | power:beta:gamma")

    def describe(self) -> str:
        if self.kind == NonlinearityKind.CUBIC:
            return f"cubic:{self.beta!r}"
        if self.kind == NonlinearityKind.POWER:
            return f"power:{self.beta!r}:{self.gamma!r}"
        return self.kind

    def f(self, density: np.ndarray) -> np.ndarray:
        if self.kind == NonlinearityKind.CUBIC:
            return self.beta * density
        if self.kind == NonlinearityKind.POWER:
            return self.beta * density ** (2.0 / self.gamma)
        if self.kind == NonlinearityKind.CUSTOM:
            return self.custom_f(density)
        return np.zeros_like(density)

    def primitive(self, density: np.ndarray) -> np.ndarray:
        """F(s)."""
        if self.kind == NonlinearityKind.CUBIC:
            return 0.5 * self.beta * density ** 2
        if self.kind == NonlinearityKind.POWER:
            exponent = (2.0 + self.gamma) / self.gamma
            return self.beta * self.gamma / (2.0 + self.gamma) * density ** exponent
        if self.kind == NonlinearityKind.CUSTOM:
            return self.custom_primitive(density)
        return np.zeros_like(density)


def build_potential(descriptor: str, grid: Grid1D) -> RealField:
    """
    Sample a potential from `none`, `harmonic` (x^2/2), `const:V0` or `file:PATH`.

    Args:
        descriptor: Potential descriptor
        grid: Grid to sample on

    Returns:
        RealField: V at the grid nodes
    """
    kind, _, argument = descriptor.strip().partition(':')
    if kind == 'none' and not argument:
        return np.zeros(grid.num_points)
    if kind == 'harmonic' and not argument:
        return 0.5 * grid.nodes ** 2
    if kind == 'const' and argument:
        try:
            return np.full(grid.num_points, float(argument))
        except ValueError as e:
            raise ValueError(f"Invalid potential '{descriptor}': {str(e)}") from e
    if kind == 'file' and argument:
        values = np.loadtxt(argument, delimiter=',', ndmin=1)
        return np.asarray(grid.check(values, f"potential from {argument}"), dtype=float)
    raise ValueError(f"Invalid potential '{descriptor}': expected none | harmonic | const:V0 | file:PATH")


@dataclass(frozen=True, eq=False)
class NlsProblem:
    """
    Everything defining the equation and E_1 on a grid.

    Args:
        grid: Collocation grid
        potential: V sampled at the nodes
        nonlinearity: f and F
        energy_shift: E_c > 0 keeping E_1 + E_c positive
        adapt_shift: Allow raising E_c once at t = 0
    """
    grid: Grid1D
    potential: RealField
    nonlinearity: Nonlinearity = Nonlinearity()
    energy_shift: float = DEFAULT_ENERGY_SHIFT
    adapt_shift: bool = False

    def __post_init__(self):
        potential = self.grid.check(self.potential, "potential")
        if np.iscomplexobj(potential):
            raise ValueError("potential must be real-valued")
        object.__setattr__(self, 'potential', np.asarray(potential, dtype=float))
        if not self.energy_shift > 0:
            raise ValueError(f"energy_shift must be positive, got {self.energy_shift}")

    def with_potential_shift(self, shift: float) -> "NlsProblem":
        """Same problem with V replaced by V + shift."""
        return replace(self, potential=self.potential + shift)


def split(u: ComplexField) -> Tuple[RealField, RealField]:
    """(Re u, Im u) as contiguous real arrays."""
    values = np.asarray(u)
    return np.ascontiguousarray(values.real, dtype=float), np.ascontiguousarray(values.imag, dtype=float)


def e1(P: RealField, Q: RealField, problem: NlsProblem) -> float:
    """
    E_1 = 1/2 * integral of V (P^2 + Q^2) + F(P^2 + Q^2).

    Args:
        P: Real part
        Q: Imaginary part
        problem: Problem definition

    Returns:
        float: The potential-plus-nonlinear energy
    """
    grid = problem.grid
    density = grid.check(P, "P") ** 2 + grid.check(Q, "Q") ** 2
    value = 0.5 * quadrature(problem.potential * density + problem.nonlinearity.primitive(density), grid)
    if not np.isfinite(value):
        raise NumericalError(f"E_1 evaluated to {value}")
    return value


def g_pair(P: RealField, Q: RealField, problem: NlsProblem) -> Tuple[RealField, RealField]:
    """
    Normalized variational derivatives of E_1.

    G1 = (V + f(s)) Q / sqrt(E_1 + E_c),  G2 = (V + f(s)) P / sqrt(E_1 + E_c).

    Raises:
        EnergyShiftError: If E_1 + E_c <= 0
    """
    shifted = e1(P, Q, problem) + problem.energy_shift
    if shifted <= 0:
        raise EnergyShiftError(
            f"energy shift too small: E_1 + E_c = {shifted:.6e} with E_c = {problem.energy_shift}")
    weight = (problem.potential + problem.nonlinearity.f(P ** 2 + Q ** 2)) / np.sqrt(shifted)
    return weight * Q, weight * P


def hamiltonian(P: RealField, Q: RealField, problem: NlsProblem) -> float:
    """H = 1/2 (|P|_1^2 + |Q|_1^2) + E_1 with spectral gradients."""
    grid = problem.grid
    kinetic = 0.5 * (h1_seminorm(P, grid) ** 2 + h1_seminorm(Q, grid) ** 2)
    return kinetic + e1(P, Q, problem)


def field_hamiltonian(u: ComplexField, problem: NlsProblem) -> float:
    return hamiltonian(*split(u), problem)


def mass(P: RealField, Q: RealField, grid: Grid1D) -> float:
    """||P||_0^2 + ||Q||_0^2 by quadrature."""
    return quadrature(grid.check(P, "P") ** 2 + grid.check(Q, "Q") ** 2, grid)


def field_mass(u: ComplexField, grid: Grid1D) -> float:
    return mass(*split(u), grid)


@dataclass(frozen=True, eq=False)
class SavState:
    """
    Unknowns of the fully discrete scheme at one time level.

    Args:
        P: Real part on the grid
        Q: Imaginary part on the grid
        r: Scalar auxiliary variable
        time: Time of this level
        grid: Grid of P and Q
    """
    P: RealField
    Q: RealField
    r: float
    time: float
    grid: Grid1D

    def __post_init__(self):
        self.grid.check(self.P, "P")
        self.grid.check(self.Q, "Q")
        if not np.isfinite(self.r):
            raise ValueError(f"r must be finite, got {self.r}")

    @property
    def field(self) -> ComplexField:
        return self.P + 1j * self.Q


def modified_hamiltonian(state: SavState) -> float:
    """H~ = 1/2 (|Q|_1^2 + |P|_1^2) + r^2."""
    grid = state.grid
    return 0.5 * (h1_seminorm(state.Q, grid) ** 2 + h1_seminorm(state.P, grid) ** 2) + state.r ** 2


def adapt_energy_shift(u0: ComplexField, problem: NlsProblem) -> NlsProblem:
    """
    Raise E_c to |E_1| + 1 when E_1(u0) + E_c <= 0 and adaptation is enabled.

    Adaptation only happens here, at t = 0; a shift changed mid-run would
    change the conserved H~.

    Returns:
        NlsProblem: The problem to integrate with
    """
    energy = e1(*split(u0), problem)
    if energy + problem.energy_shift > 0 or not problem.adapt_shift:
        return problem
    shift = abs(energy) + 1.0
    logger.warning(f"Raising energy shift from {problem.energy_shift} to {shift} (E_1 = {energy:.6e})")
    return replace(problem, energy_shift=shift)
