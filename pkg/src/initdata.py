"""
Initial data and exact solutions.

Closed forms are calibrated against i u_t = -u_xx + V u + f(|u|^2) u, the
equation the rest of the package integrates.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.model import Nonlinearity
from src.spectral import ComplexField, Grid1D, inverse, l2_norm

logger = logging.getLogger(__name__)

# Largest boundary value of a localized profile accepted without a warning
TAIL_TOLERANCE = 1e-14


class InitialDataKind:
    SOLITON = 'soliton'
    SOLITARY = 'solitary'
    SINE = 'sine'
    PLANE = 'plane'
    HALPHA = 'halpha'
    GAUSSIAN = 'gaussian'
    FILE = 'file'


_PARAMETER_COUNTS = {
    InitialDataKind.SOLITON: 3,
    InitialDataKind.SOLITARY: 0,
    InitialDataKind.SINE: 0,
    InitialDataKind.PLANE: 2,
    InitialDataKind.HALPHA: 2,
    InitialDataKind.GAUSSIAN: 0,
}


def _warn_on_tail(values: np.ndarray, name: str):
    tail = max(abs(values[0]), abs(values[-1]))
    if tail > TAIL_TOLERANCE:
        logger.warning(f"{name} is {tail:.2e} at the domain boundary; truncation error is not negligible")


def _sech(values: np.ndarray) -> np.ndarray:
    # 1/cosh overflows to inf (and sech to 0) quietly for |x| > ~710
    with np.errstate(over='ignore'):
        return 1.0 / np.cosh(values)


def bright_soliton(a: float, beta: float, v: float, t: float, grid: Grid1D) -> ComplexField:
    """
    Bright soliton a sqrt(2/(-beta)) sech(a (x - 2 v t)) exp(i (v x - (v^2 - a^2) t)).

    Args:
        a: Amplitude and inverse width parameter
        beta: Focusing cubic coefficient, must be negative
        v: Phase wavenumber; the envelope moves with speed 2v
        t: Time
        grid: Sampling grid

    Returns:
        ComplexField: Samples at the nodes
    """
    if beta >= 0:
        raise ValueError(f"bright soliton needs beta < 0, got {beta}")
    x = grid.nodes
    envelope = a * np.sqrt(2.0 / -beta) * _sech(a * (x - 2.0 * v * t))
    return envelope * np.exp(1j * (v * x - (v * v - a * a) * t))


def bright_soliton_half_laplacian(a: float, beta: float, v: float, t: float, grid: Grid1D) -> ComplexField:
    """
    Soliton of i u_t = -1/2 u_xx + beta |u|^2 u:
    a / sqrt(-beta) sech(a (x - v t)) exp(i (v x - 1/2 (v^2 - a^2) t)).

    Not a solution of the integrated equation; kept for comparisons with
    the half-Laplacian convention.
    """
    if beta >= 0:
        raise ValueError(f"bright soliton needs beta < 0, got {beta}")
    x = grid.nodes
    envelope = a / np.sqrt(-beta) * _sech(a * (x - v * t))
    return envelope * np.exp(1j * (v * x - 0.5 * (v * v - a * a) * t))


def solitary_wave(t: float, grid: Grid1D) -> ComplexField:
    """sqrt(2) e^(it) sech(x), a standing wave for beta = -1."""
    return np.sqrt(2.0) * np.exp(1j * t) * _sech(grid.nodes)


def plane_wave(amplitude: float, mode_index: int, grid: Grid1D) -> ComplexField:
    """A exp(i k x) with k = pi * mode_index / L."""
    k = np.pi * mode_index / grid.half_length
    return amplitude * np.exp(1j * k * grid.nodes)


def plane_wave_frequency(amplitude: float, mode_index: int, grid: Grid1D, potential: float,
                         nonlinearity: Nonlinearity) -> float:
    """omega = k^2 + V0 + f(A^2)."""
    k = np.pi * mode_index / grid.half_length
    return float(k * k + potential + nonlinearity.f(np.asarray(amplitude ** 2)))


def plane_wave_solution(amplitude: float, mode_index: int, t: float, grid: Grid1D,
                        potential: float = 0.0, nonlinearity: Nonlinearity = Nonlinearity()) -> ComplexField:
    omega = plane_wave_frequency(amplitude, mode_index, grid, potential, nonlinearity)
    return plane_wave(amplitude, mode_index, grid) * np.exp(-1j * omega * t)


def sine(grid: Grid1D) -> ComplexField:
    return np.sin(grid.nodes).astype(complex)


def gaussian(grid: Grid1D) -> ComplexField:
    """exp(-x^2/2) / pi^(1/4), the harmonic oscillator ground state."""
    return (np.exp(-0.5 * grid.nodes ** 2) / np.pi ** 0.25).astype(complex)


def h_alpha_random(alpha: float, seed: int, grid: Grid1D) -> ComplexField:
    """
    Random field with Sobolev regularity governed by alpha.

    Coefficients are xi_p (1 + k_p^2)^(-alpha/2), where xi_p has real and
    imaginary parts drawn uniformly from [-1, 1] by numpy's default
    generator seeded with `seed`; the field is normalized in L2.

    Args:
        alpha: Regularity index, alpha > 0
        seed: Generator seed
        grid: Sampling grid

    Returns:
        ComplexField: Normalized field
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-1.0, 1.0, grid.num_points) + 1j * rng.uniform(-1.0, 1.0, grid.num_points)
    field = inverse(noise * (1.0 + grid.wavenumbers ** 2) ** (-0.5 * alpha), grid)
    return field / l2_norm(field, grid)


def load_field(path: str, grid: Grid1D) -> ComplexField:
    """Read a two-column (Re, Im) CSV with one row per node."""
    data = np.loadtxt(path, delimiter=',', comments='#', ndmin=2)
    if data.shape != (grid.num_points, 2):
        raise ValueError(f"{path} has shape {data.shape}, expected ({grid.num_points}, 2)")
    return grid.check(data[:, 0] + 1j * data[:, 1], path)


@dataclass(frozen=True)
class InitialDataSpec:
    """
    Parsed initial-data descriptor.

    Args:
        kind: One of InitialDataKind
        params: Numeric parameters in descriptor order
        path: Source file for kind `file`
    """
    kind: str
    params: Tuple[float, ...] = ()
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind == InitialDataKind.FILE:
            if not self.path:
                raise ValueError("file initial data needs a path")
            return
        if self.kind not in _PARAMETER_COUNTS:
            raise ValueError(f"Unknown initial data kind: {self.kind}")
        if len(self.params) != _PARAMETER_COUNTS[self.kind]:
            raise ValueError(f"{self.kind} takes {_PARAMETER_COUNTS[self.kind]} parameters, got {len(self.params)}")
        if self.kind == InitialDataKind.SOLITON and self.params[1] >= 0:
            raise ValueError(f"soliton needs beta < 0, got {self.params[1]}")
        if self.kind == InitialDataKind.HALPHA and self.params[0] <= 0:
            raise ValueError(f"halpha needs alpha > 0, got {self.params[0]}")

    @classmethod
    def parse(cls, descriptor: str, seed: Optional[int] = None) -> "InitialDataSpec":
        """
        Parse `soliton:a:beta:v`, `solitary`, `sine`, `plane:A:k`, `halpha:alpha[:seed]`,
        `gaussian` or `file:PATH`.

        Args:
            descriptor: Initial data descriptor
            seed: Seed completing a `halpha:alpha` descriptor given without one
        """
        kind, _, rest = descriptor.strip().partition(':')
        if kind == InitialDataKind.FILE:
            return cls(kind, path=rest)
        try:
            params = tuple(float(part) for part in rest.split(':')) if rest else ()
        except ValueError as e:
            raise ValueError(f"Invalid initial data '{descriptor}': {str(e)}") from e
        if kind == InitialDataKind.HALPHA and len(params) == 1 and seed is not None:
            params += (float(seed),)
        return cls(kind, params)

    def describe(self) -> str:
        if self.kind == InitialDataKind.FILE:
            return f"file:{self.path}"
        return ':'.join([self.kind] + [f"{value:g}" for value in self.params])

    def build(self, grid: Grid1D) -> ComplexField:
        """Samples of the initial datum on `grid`."""
        if self.kind == InitialDataKind.SOLITON:
            a, beta, v = self.params
            values = bright_soliton(a, beta, v, 0.0, grid)
            _warn_on_tail(values, "soliton")
            return values
        if self.kind == InitialDataKind.SOLITARY:
            values = solitary_wave(0.0, grid)
            _warn_on_tail(values, "solitary wave")
            return values
        if self.kind == InitialDataKind.SINE:
            return sine(grid)
        if self.kind == InitialDataKind.PLANE:
            amplitude, mode = self.params
            return plane_wave(amplitude, int(mode), grid)
        if self.kind == InitialDataKind.HALPHA:
            alpha, seed = self.params
            return h_alpha_random(alpha, int(seed), grid)
        if self.kind == InitialDataKind.GAUSSIAN:
            return gaussian(grid)
        return load_field(self.path, grid)

    def exact(self, t: float, grid: Grid1D, potential: np.ndarray,
              nonlinearity: Nonlinearity) -> Optional[ComplexField]:
        """
        Exact solution at time t when one is known for this datum and problem, else None.

        The soliton and the solitary wave are exact only for V = 0 and the
        matching cubic nonlinearity; the plane wave for any constant V.
        """
        constant_potential = bool(np.ptp(potential) == 0)
        v0 = float(potential[0])
        if self.kind == InitialDataKind.SOLITON:
            a, beta, v = self.params
            if v0 == 0 and constant_potential and nonlinearity == Nonlinearity.cubic(beta):
                return bright_soliton(a, beta, v, t, grid)
        elif self.kind == InitialDataKind.SOLITARY:
            if v0 == 0 and constant_potential and nonlinearity == Nonlinearity.cubic(-1.0):
                return solitary_wave(t, grid)
        elif self.kind == InitialDataKind.PLANE and constant_potential:
            amplitude, mode = self.params
            return plane_wave_solution(amplitude, int(mode), t, grid, v0, nonlinearity)
        return None
