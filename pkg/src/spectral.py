"""
Fourier collocation primitives on a uniform periodic 1-D grid.

Fields are plain numpy arrays sampled at the grid nodes; every operation takes
the Grid1D the samples live on and checks the length against it. Fourier
coefficients are stored in FFT order (p = 0, 1, ..., N/2-1, -N/2, ..., -1) and
normalized as

    u_hat_p = (1/N) * sum_b U(x_b) * exp(-i k_p x_b),   k_p = pi * p / L,

so that U(x) = sum_p u_hat_p * exp(i k_p x) is the trigonometric interpolant
in the physical coordinate.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np
import numpy.typing as npt
from scipy import fft

RealField = npt.NDArray[np.float64]
ComplexField = npt.NDArray[np.complex128]
SpectralCoeffs = npt.NDArray[np.complex128]
Field = Union[RealField, ComplexField]

logger = logging.getLogger(__name__)


def _frozen(values: np.ndarray) -> np.ndarray:
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class Grid1D:
    """
    Uniform periodic grid on [-L, L) with an even number of nodes.

    Args:
        num_points: Number of collocation points N (even, >= 4)
        half_length: Half length L of the periodic domain
    """
    num_points: int
    half_length: float

    def __post_init__(self):
        if int(self.num_points) != self.num_points:
            raise ValueError(f"num_points must be an integer, got {self.num_points!r}")
        if self.num_points < 4 or self.num_points % 2:
            raise ValueError(f"num_points must be even and >= 4, got {self.num_points}")
        if not np.isfinite(self.half_length) or self.half_length <= 0:
            raise ValueError(f"half_length must be positive, got {self.half_length!r}")

    @classmethod
    def from_spacing(cls, spacing: float, half_length: float) -> "Grid1D":
        """Build the grid on [-L, L) whose mesh size is `spacing`."""
        count = 2.0 * half_length / spacing
        num_points = int(round(count))
        if not np.isclose(count, num_points, rtol=0, atol=1e-9):
            raise ValueError(f"spacing {spacing} does not divide the domain length {2 * half_length}")
        return cls(num_points, half_length)

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_length / self.num_points

    @property
    def length(self) -> float:
        return 2.0 * self.half_length

    @cached_property
    def nodes(self) -> RealField:
        return _frozen(-self.half_length + self.spacing * np.arange(self.num_points))

    @cached_property
    def indices(self) -> npt.NDArray[np.int64]:
        """Integer mode indices p in FFT order; the set B = {-N/2, ..., N/2-1}."""
        return _frozen(np.rint(fft.fftfreq(self.num_points, 1.0 / self.num_points)).astype(np.int64))

    @cached_property
    def wavenumbers(self) -> RealField:
        return _frozen(np.pi / self.half_length * self.indices)

    @cached_property
    def rwavenumbers(self) -> RealField:
        """Wavenumbers of the half spectrum used by the real transforms (Nyquist included)."""
        return _frozen(np.pi / self.half_length * np.arange(self.num_points // 2 + 1))

    @cached_property
    def _shift(self) -> ComplexField:
        # exp(-i k_p x_0) moves the FFT phase origin from x_0 = -L to x = 0
        return _frozen(np.exp(-1j * self.wavenumbers * self.nodes[0]))

    def refined(self, factor: int) -> "Grid1D":
        """Grid on the same domain with `factor` times as many nodes."""
        return Grid1D(self.num_points * factor, self.half_length)

    def check(self, values, name: str = "field") -> np.ndarray:
        """
        Validate that `values` is a finite sample of length N on this grid.

        Args:
            values: Array-like field samples
            name: Name used in error messages

        Returns:
            np.ndarray: The samples as a 1-D array
        """
        array = np.asarray(values)
        if array.ndim != 1 or array.shape[0] != self.num_points:
            raise ValueError(f"{name} has shape {array.shape}, expected ({self.num_points},)")
        if not np.all(np.isfinite(array)):
            raise ValueError(f"{name} contains non-finite values")
        return array


def forward(field: Field, grid: Grid1D) -> SpectralCoeffs:
    """
    Fourier coefficients of a nodal field.

    Args:
        field: Samples at the grid nodes
        grid: Grid the samples live on

    Returns:
        SpectralCoeffs: Coefficients in FFT order with the 1/N normalization
    """
    values = grid.check(field)
    return fft.fft(values) / grid.num_points * grid._shift


def inverse(coeffs: SpectralCoeffs, grid: Grid1D) -> ComplexField:
    """Nodal values of the trigonometric polynomial with the given coefficients."""
    values = grid.check(coeffs, "coeffs")
    return fft.ifft(values * np.conj(grid._shift)) * grid.num_points


def laplacian(field: Field, grid: Grid1D) -> Field:
    """
    Spectral Laplacian: multiply mode p by -k_p^2.

    Real input gives real output (computed with the real transform).
    """
    values = grid.check(field)
    if np.isrealobj(values):
        return fft.irfft(-grid.rwavenumbers ** 2 * fft.rfft(values), n=grid.num_points)
    return fft.ifft(-grid.wavenumbers ** 2 * fft.fft(values))


def dense_d2(grid: Grid1D) -> RealField:
    """
    Dense second-order Fourier differentiation matrix.

    Entries for j != l are -(-1)^(j-l) / (2 sin^2((j-l) pi / N)) and the
    diagonal is -(N-1)(N-2)/12 - N/4, scaled by (pi/L)^2. The -N/4 is the
    Nyquist contribution -(N/4)(-1)^(j-l), which cancels against the +N/4
    alternating term off the diagonal, so the matrix applies the multiplier
    -k_p^2 over the whole index set B. Test oracle only.

    Args:
        grid: Grid with even N

    Returns:
        RealField: N x N matrix
    """
    n = grid.num_points
    if n % 2:
        raise ValueError("dense_d2 is only available for even N")
    j, l = np.indices((n, n))
    offset = j - l
    sign = np.where(offset % 2 == 0, 1.0, -1.0)
    with np.errstate(divide="ignore"):
        matrix = -sign / (2.0 * np.sin(offset * np.pi / n) ** 2)
    np.fill_diagonal(matrix, -(n - 1) * (n - 2) / 12.0 - n / 4.0)
    return matrix * (np.pi / grid.half_length) ** 2


def check_dense_d2(grid: Grid1D, samples: int = 3, seed: int = 0, tolerance: float = 1e-10) -> float:
    """
    Compare dense_d2 against the spectral Laplacian on random real fields.

    A mismatch is logged rather than corrected.

    Returns:
        float: Largest relative difference observed
    """
    matrix = dense_d2(grid)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        field = rng.standard_normal(grid.num_points)
        spectral = laplacian(field, grid)
        scale = max(float(np.max(np.abs(spectral))), 1.0)
        worst = max(worst, float(np.max(np.abs(matrix @ field - spectral))) / scale)
    if worst > tolerance:
        logger.warning(f"dense_d2 differs from the spectral Laplacian by {worst:.3e} on N={grid.num_points}")
    return worst


def quadrature(values: RealField, grid: Grid1D) -> float:
    """Rectangle rule on the periodic grid (spectrally accurate for smooth periodic integrands)."""
    return float(grid.spacing * np.sum(values))


def inner(first: RealField, second: RealField, grid: Grid1D) -> float:
    """Discrete L2 product h * sum(a * b) of two real fields."""
    return float(grid.spacing * np.dot(first, second))


def l2_norm(field: Field, grid: Grid1D) -> float:
    values = grid.check(field)
    return float(np.sqrt(grid.spacing * np.sum(np.abs(values) ** 2)))


def sobolev_norm(field: Field, grid: Grid1D, order: float) -> float:
    """
    Discrete H^s norm (sum_p (1 + k_p^2)^s |u_hat_p|^2 * 2L)^(1/2).

    Args:
        field: Nodal samples
        grid: Grid of the samples
        order: Sobolev index s >= -1 (s = -1 is the dual norm of H^1)

    Returns:
        float: The norm
    """
    if order < -1:
        raise ValueError(f"Sobolev order must be >= -1, got {order}")
    coeffs = forward(field, grid)
    weights = (1.0 + grid.wavenumbers ** 2) ** order
    return float(np.sqrt(grid.length * np.sum(weights * np.abs(coeffs) ** 2)))


def h1_seminorm(field: Field, grid: Grid1D) -> float:
    """|u|_1 = ||grad u||_0 computed in coefficient space."""
    coeffs = forward(field, grid)
    return float(np.sqrt(grid.length * np.sum(grid.wavenumbers ** 2 * np.abs(coeffs) ** 2)))


def interpolate(field: Field, grid: Grid1D, target: Grid1D) -> ComplexField:
    """
    Evaluate the trigonometric interpolant of `field` on a finer grid.

    The Nyquist coefficient is split evenly between +N/2 and -N/2 so real data
    stays real.

    Args:
        field: Samples on `grid`
        grid: Source grid
        target: Grid on the same domain with at least as many nodes

    Returns:
        ComplexField: Samples on `target`
    """
    if not np.isclose(target.half_length, grid.half_length):
        raise ValueError("interpolation target must cover the same domain")
    if target.num_points < grid.num_points:
        raise ValueError("interpolation target must not be coarser than the source grid")
    coeffs = forward(field, grid)
    fine = np.zeros(target.num_points, dtype=complex)
    nyquist = grid.num_points // 2
    if target.num_points > grid.num_points:
        coeffs = coeffs.copy()
        fine[nyquist] = 0.5 * coeffs[nyquist]
        coeffs[nyquist] *= 0.5
    np.add.at(fine, grid.indices % target.num_points, coeffs)
    return inverse(fine, target)


def restrict(field: Field, grid: Grid1D, coarse: Grid1D) -> np.ndarray:
    """Samples of a fine-grid field at the nodes of a coarser grid sharing node x_0."""
    values = grid.check(field)
    factor, remainder = divmod(grid.num_points, coarse.num_points)
    if remainder or not np.isclose(grid.half_length, coarse.half_length):
        raise ValueError("coarse grid nodes must be a subset of the fine grid nodes")
    return values[::factor]
