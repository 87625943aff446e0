"""
Error metrics, convergence and conservation studies, and CSV output.
"""
import csv
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.groundstate import GroundStateProblem, GroundStateResult, solve_ground_state
from src.initdata import InitialDataSpec, gaussian
from src.model import NlsProblem, Nonlinearity, adapt_energy_shift, build_potential, field_hamiltonian
from src.sav import Algorithm, StepperConfig, init_state, resolve_steps, run
from src.schemes import create_scheme
from src.simulation_service import SimulationService, StepRecord
from src.spectral import ComplexField, Grid1D, l2_norm, restrict
from src.utils.config import DEFAULT_CONFIG, SchemeName

logger = logging.getLogger(__name__)

TRACE_HEADER = ['step', 't', 'mass', 'H', 'H_mod', 'r', 'e_u']
CONVERGENCE_HEADER = ['param', 'e_u', 'e_H', 'e_Hmod', 'order_u', 'order_H']
COMPARE_HEADER = ['scheme', 'mass_drift', 'e_u', 'e_H', 'e_Hmod', 'runtime']
GROUND_STATE_HEADER = ['x', 'phi']

# Self references use this many times more steps than the finest member
SELF_REFERENCE_REFINEMENT = 16
# Errors closer than this factor to the roundoff floor are left out of mean orders
FLOOR_FACTOR = 10.0
ABSOLUTE_FLOOR = 1e-13


class Reference:
    EXACT = 'exact'
    SELF = 'self'
    NONE = 'none'


@dataclass(frozen=True)
class ErrorMetrics:
    e_u: float
    e_H: float
    e_Hmod: Optional[float] = None


@dataclass(frozen=True)
class ConvergenceRow:
    param: float
    e_u: float
    e_H: float
    e_Hmod: Optional[float]
    order_u: Optional[float] = None
    order_H: Optional[float] = None


@dataclass(frozen=True)
class CompareRow:
    scheme: str
    mass_drift: float
    e_u: float
    e_H: float
    e_Hmod: Optional[float]
    runtime: float


@dataclass(frozen=True)
class RunConfig:
    """
    Everything needed to reproduce one simulation.

    Args:
        scheme: sav1, sav2, lie or strang
        n: Number of grid points
        domain_half_length: L of [-L, L)
        tau: Requested time step
        t_end: Final time
        nonlinearity: Nonlinearity descriptor
        potential: Potential descriptor
        ic: Initial data descriptor
        ec: Energy shift E_c
        adapt_shift: Raise E_c at t = 0 when E_1 + E_c <= 0
        bootstrap: First-step handling of the SAV extrapolation
        solver: SAV linear solver
        reference: exact, self or none
        seed: Seed for `halpha:alpha` data given without one
        h_mod_tolerance: Reported drift bound on H~
        max_step_time: Seconds after which a step is logged as slow
    """
    scheme: str = SchemeName.SAV2
    n: int = 256
    domain_half_length: float = 32.0
    tau: float = 0.01
    t_end: float = 1.0
    nonlinearity: str = 'cubic:-1'
    potential: str = 'none'
    ic: str = 'soliton:1:-1:1'
    ec: float = 1.0
    adapt_shift: bool = True
    bootstrap: str = 'predictor'
    solver: str = 'fourier_diagonal'
    reference: str = Reference.EXACT
    seed: int = 0
    h_mod_tolerance: float = 1e-9
    max_step_time: float = 5.0

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> "RunConfig":
        names = cls.__dataclass_fields__.keys()
        return cls(**{key: value for key, value in config.items() if key in names})

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    @property
    def grid(self) -> Grid1D:
        return Grid1D(self.n, self.domain_half_length)

    def initial_data(self) -> InitialDataSpec:
        return InitialDataSpec.parse(self.ic, seed=self.seed)

    def build_problem(self, grid: Optional[Grid1D] = None) -> NlsProblem:
        grid = grid or self.grid
        return NlsProblem(grid, build_potential(self.potential, grid), Nonlinearity.parse(self.nonlinearity),
                          energy_shift=self.ec, adapt_shift=self.adapt_shift)

    def metadata(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class SimulationResult:
    config: RunConfig
    problem: NlsProblem
    field: ComplexField
    records: List[StepRecord]
    runtime: float
    initial_energy: float
    reference: Optional[ComplexField] = None
    reference_kind: str = Reference.NONE
    errors: Optional[ErrorMetrics] = None
    drift_violations: int = 0
    trace_errors: List[Optional[float]] = field(default_factory=list)


def modulus_error(U: ComplexField, reference: ComplexField, grid: Grid1D) -> float:
    """|| |U| - |u| ||_0."""
    return l2_norm(np.abs(U) - np.abs(reference), grid)


def compute_errors(U: ComplexField, reference: ComplexField, problem: NlsProblem,
                   modified_hamiltonian: Optional[float] = None,
                   reference_energy: Optional[float] = None) -> ErrorMetrics:
    """
    e_u = || |U| - |u| ||_0, e_H = |H(u) - H(U)| and, for SAV, e_Hmod = |H(u) - (H~ - E_c)|.

    Args:
        U: Numerical solution
        reference: Exact or reference solution on the same grid
        problem: Problem definition (E_c included)
        modified_hamiltonian: H~ of the SAV state, if any
        reference_energy: H(u); defaults to H(reference)

    Returns:
        ErrorMetrics: The three diagnostics
    """
    grid = problem.grid
    grid.check(U, "U")
    grid.check(reference, "reference")
    energy = field_hamiltonian(reference, problem) if reference_energy is None else reference_energy
    e_hmod = None
    if modified_hamiltonian is not None:
        e_hmod = abs(energy - (modified_hamiltonian - problem.energy_shift))
    return ErrorMetrics(modulus_error(U, reference, grid), abs(energy - field_hamiltonian(U, problem)), e_hmod)


def estimate_orders(params: Sequence[float], errors: Sequence[float]) -> List[Optional[float]]:
    """
    Orders from consecutive rows, log(e_prev / e) / log(p_prev / p); None for the first row
    or when an error is not positive.
    """
    orders: List[Optional[float]] = [None] if len(params) else []
    for index in range(1, len(params)):
        previous, current = errors[index - 1], errors[index]
        if previous is None or current is None or previous <= 0 or current <= 0:
            orders.append(None)
            continue
        orders.append(float(np.log(previous / current) / np.log(params[index - 1] / params[index])))
    return orders


def roundoff_floor(errors: Sequence[float]) -> float:
    """
    Floor estimated from the finest rows: the smallest error when the last two
    rows have stalled (ratio below 1.5), else ABSOLUTE_FLOOR.
    """
    values = [value for value in errors if value is not None]
    if len(values) >= 2 and values[-1] > 0 and values[-2] / values[-1] < 1.5:
        return max(min(values[-2:]), ABSOLUTE_FLOOR)
    return ABSOLUTE_FLOOR


def mean_order(params: Sequence[float], errors: Sequence[float]) -> Optional[float]:
    """Mean of the consecutive orders whose two errors are clear of the roundoff floor."""
    floor = roundoff_floor(errors)
    orders = estimate_orders(params, errors)
    usable = [order for index, order in enumerate(orders)
              if order is not None
              and errors[index - 1] > FLOOR_FACTOR * floor and errors[index] > FLOOR_FACTOR * floor]
    if not usable:
        return None
    return float(np.mean(usable))


def run_simulation(config: RunConfig, trace: bool = False) -> SimulationResult:
    """
    Run one simulation to config.t_end and measure it against its reference.

    Args:
        config: Run description
        trace: Record e_u at every level when an exact solution exists

    Returns:
        SimulationResult: Final field, step records and errors
    """
    grid = config.grid
    spec = config.initial_data()
    u0 = spec.build(grid)
    problem = adapt_energy_shift(u0, config.build_problem(grid))
    steps, tau = resolve_steps(config.t_end, config.tau)

    scheme = create_scheme(config.scheme, problem, tau, config.bootstrap, config.solver)
    service = SimulationService(scheme, {'h_mod_tolerance': config.h_mod_tolerance,
                                         'max_step_time': config.max_step_time})

    trace_errors: List[Optional[float]] = []
    has_exact = spec.exact(0.0, grid, problem.potential, problem.nonlinearity) is not None

    def observer(record: StepRecord, values: ComplexField):
        if not trace:
            return
        exact = spec.exact(record.t, grid, problem.potential, problem.nonlinearity) if has_exact else None
        trace_errors.append(modulus_error(values, exact, grid) if exact is not None else None)

    records = service.start(u0, steps, observer)
    result = SimulationResult(
        config=config,
        problem=problem,
        field=scheme.field,
        records=records,
        runtime=service.runtime,
        initial_energy=records[0].hamiltonian,
        drift_violations=service.drift_violations,
        trace_errors=trace_errors,
    )

    if config.reference == Reference.NONE:
        return result
    reference, kind = None, Reference.SELF
    if config.reference == Reference.EXACT:
        reference = spec.exact(scheme.time, grid, problem.potential, problem.nonlinearity)
        kind = Reference.EXACT
        if reference is None:
            logger.warning(f"No exact solution for ic={config.ic}; using a self reference")
            kind = Reference.SELF
    if reference is None:
        reference = self_reference(config, tau / SELF_REFERENCE_REFINEMENT)
    result.reference, result.reference_kind = reference, kind
    result.errors = compute_errors(scheme.field, reference, problem, records[-1].modified_hamiltonian,
                                   reference_energy=result.initial_energy)
    return result


def self_reference(config: RunConfig, tau: float) -> ComplexField:
    """sav2 solution of the same problem with step tau, without per-step records."""
    logger.info(f"Computing self reference with sav2, tau={tau}")
    grid = config.grid
    u0 = config.initial_data().build(grid)
    problem = adapt_energy_shift(u0, config.build_problem(grid))
    stepper_config = StepperConfig(tau, Algorithm.ALG2, config.solver, config.bootstrap)
    final, _ = run(init_state(u0, problem), problem, stepper_config, config.t_end)
    return final.field


def convergence_study(base: RunConfig, axis: str, values: Sequence[float],
                      workers: int = 1) -> Tuple[List[ConvergenceRow], str]:
    """
    Run one member per value of tau (axis `tau`) or N (axis `n`) and tabulate errors and orders.

    Members run concurrently; rows come back ordered by decreasing tau or h.
    Without an exact solution every member is compared with one shared
    reference: sav2 at the finest tau / 16, or for axis `n` a run on twice
    the finest grid restricted to each member's nodes.

    Args:
        base: Shared configuration
        axis: tau or n
        values: Steps or grid sizes
        workers: Thread count

    Returns:
        Tuple: (rows, reference kind)
    """
    if axis not in ('tau', 'n'):
        raise ValueError(f"Unknown convergence axis '{axis}'")
    if not values:
        return [], base.reference
    if axis == 'tau':
        members = [base.with_(tau=float(value)) for value in sorted(values, reverse=True)]
        params = [member.tau for member in members]
    else:
        members = [base.with_(n=int(value)) for value in sorted(values)]
        params = [member.grid.spacing for member in members]

    spec = base.initial_data()
    base_problem = base.build_problem()
    use_exact = (base.reference == Reference.EXACT
                 and spec.exact(0.0, base.grid, base_problem.potential, base_problem.nonlinearity) is not None)
    if base.reference == Reference.EXACT and not use_exact:
        logger.warning(f"No exact solution for ic={base.ic}; using a self reference")

    shared = None
    if not use_exact:
        if axis == 'tau':
            finest = members[-1]
            shared = (finest.grid, self_reference(finest, finest.tau / SELF_REFERENCE_REFINEMENT))
        else:
            fine = members[-1].with_(n=members[-1].n * 2, reference=Reference.NONE)
            shared = (fine.grid, run_simulation(fine).field)

    def run_member(member: RunConfig) -> ErrorMetrics:
        result = run_simulation(member.with_(reference=Reference.EXACT if use_exact else Reference.NONE))
        if use_exact:
            return result.errors
        fine_grid, fine_field = shared
        reference = restrict(fine_field, fine_grid, member.grid)
        return compute_errors(result.field, reference, result.problem, result.records[-1].modified_hamiltonian,
                              reference_energy=result.initial_energy)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        metrics = list(executor.map(run_member, members))

    orders_u = estimate_orders(params, [m.e_u for m in metrics])
    orders_h = estimate_orders(params, [m.e_H for m in metrics])
    rows = [ConvergenceRow(param, m.e_u, m.e_H, m.e_Hmod, order_u, order_h)
            for param, m, order_u, order_h in zip(params, metrics, orders_u, orders_h)]
    kind = Reference.EXACT if use_exact else Reference.SELF
    logger.info(f"Convergence study on {axis}: mean e_u order {mean_order(params, [m.e_u for m in metrics])}, "
                f"mean e_H order {mean_order(params, [m.e_H for m in metrics])} (reference={kind})")
    return rows, kind


def conservation_trace(config: RunConfig) -> Tuple[List[List[Any]], SimulationResult]:
    """
    Per-step rows step, t, mass, H, H_mod, r, e_u of one run.

    H_mod and r are blank for splitting runs, e_u when no exact solution exists.
    """
    result = run_simulation(config.with_(reference=Reference.NONE), trace=True)
    rows = []
    for index, record in enumerate(result.records):
        e_u = result.trace_errors[index] if index < len(result.trace_errors) else None
        rows.append([record.step, record.t, record.mass, record.hamiltonian,
                     record.modified_hamiltonian, record.r, e_u])
    return rows, result


def compare(base: RunConfig, schemes: Iterable[str] = SchemeName.ALL, workers: int = 1) -> List[CompareRow]:
    """Run the same configuration with every scheme; one row per scheme."""
    names = list(schemes)

    def run_one(name: str) -> CompareRow:
        result = run_simulation(base.with_(scheme=name))
        errors = result.errors or ErrorMetrics(float('nan'), float('nan'))
        drift = max(abs(record.mass - result.records[0].mass) for record in result.records)
        return CompareRow(name, drift, errors.e_u, errors.e_H, errors.e_Hmod, result.runtime)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        return list(executor.map(run_one, names))


def ground_state_problem(config: Dict[str, Any], grid: Grid1D) -> GroundStateProblem:
    return GroundStateProblem(grid, build_potential(config['potential'], grid), beta=config['gs_beta'],
                              energy_shift=config['gs_ec'], tol=config['gs_tol'],
                              max_steps=config['gs_max_steps'], r_mode=config['gs_r_mode'])


def run_ground_state(config: Dict[str, Any]) -> Tuple[GroundStateResult, Grid1D]:
    """Ground state from the normalized Gaussian with the configured grid and step."""
    grid = Grid1D(config['n'], config['domain_half_length'])
    problem = ground_state_problem(config, grid)
    return solve_ground_state(problem, gaussian(grid).real, config['tau']), grid


def ground_state_space_study(config: Dict[str, Any],
                             spacings: Sequence[float] = (1 / 2, 1 / 4, 1 / 8, 1 / 16),
                             reference_spacing: float = 1 / 32,
                             workers: int = 1) -> List[ConvergenceRow]:
    """
    Spatial self-convergence of the ground state: every spacing against the
    finest one, compared on the coarse nodes (e_u is the L2 distance of phi,
    e_H the energy difference).
    """
    half_length = config['domain_half_length']

    def solve(spacing: float) -> Tuple[GroundStateResult, Grid1D]:
        grid = Grid1D.from_spacing(spacing, half_length)
        problem = ground_state_problem(config, grid)
        return solve_ground_state(problem, gaussian(grid).real, config['tau']), grid

    ordered = sorted(spacings, reverse=True)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        solutions = list(executor.map(solve, list(ordered) + [reference_spacing]))
    reference, reference_grid = solutions[-1]

    errors_phi, errors_energy = [], []
    for result, grid in solutions[:-1]:
        errors_phi.append(l2_norm(result.phi - restrict(reference.phi, reference_grid, grid), grid))
        errors_energy.append(abs(result.energy - reference.energy))
    orders_phi = estimate_orders(ordered, errors_phi)
    orders_energy = estimate_orders(ordered, errors_energy)
    return [ConvergenceRow(spacing, e_phi, e_energy, None, order_phi, order_energy)
            for spacing, e_phi, e_energy, order_phi, order_energy
            in zip(ordered, errors_phi, errors_energy, orders_phi, orders_energy)]


@dataclass(frozen=True)
class Preset:
    """
    Configuration of one numerical experiment.

    Args:
        name: Preset name used on the command line
        overrides: Configuration values set by the preset
        axis: Convergence axis, or None for single runs
        values: Convergence family
        full_t_end: Final time of the long run enabled by full_length
    """
    name: str
    overrides: Dict[str, Any]
    axis: Optional[str] = None
    values: Tuple[float, ...] = ()
    full_t_end: Optional[float] = None


_TAU_FAMILY = tuple(0.1 * 2.0 ** -j for j in range(6))

PRESETS: Dict[str, Preset] = {
    'cubic-order': Preset('cubic-order', {
        'n': 2048, 'domain_half_length': 32.0, 'nonlinearity': 'cubic:-1', 'potential': 'none',
        'ic': 'soliton:1:-1:1', 't_end': 1.0}, 'tau', _TAU_FAMILY, 10.0),
    'solitary-trace': Preset('solitary-trace', {
        'n': 256, 'domain_half_length': np.pi / 0.11, 'nonlinearity': 'cubic:-1', 'potential': 'none',
        'ic': 'solitary', 'tau': 0.01, 't_end': 100.0}, None, (), 1000.0),
    'rough-alpha': Preset('rough-alpha', {
        'n': 1024, 'domain_half_length': float(np.pi), 'nonlinearity': 'cubic:1', 'potential': 'none',
        'ic': 'halpha:2', 't_end': 1.0, 'reference': Reference.SELF}, 'tau', _TAU_FAMILY, 10.0),
    'exponent': Preset('exponent', {
        'n': 1024, 'domain_half_length': float(np.pi), 'nonlinearity': 'power:1:8', 'potential': 'none',
        'ic': 'sine', 't_end': 1.0, 'reference': Reference.SELF}, 'tau', _TAU_FAMILY, 10.0),
    'groundstate': Preset('groundstate', {
        'n': 256, 'domain_half_length': 16.0, 'potential': 'harmonic', 'gs_beta': 400.0,
        'tau': 1e-3, 'gs_tol': 1e-6}),
    'groundstate-space': Preset('groundstate-space', {
        'domain_half_length': 16.0, 'potential': 'harmonic', 'gs_beta': 400.0,
        'tau': 1e-3, 'gs_tol': 1e-6}),
}


def apply_preset(config: Dict[str, Any], name: str, full_length: bool = False) -> Preset:
    """
    Write the preset's values into `config`.

    Raises:
        KeyError: For an unknown preset name
    """
    if name not in PRESETS:
        raise KeyError(f"Unknown preset '{name}'; expected one of {', '.join(sorted(PRESETS))}")
    preset = PRESETS[name]
    config.update(preset.overrides)
    if full_length and preset.full_t_end is not None:
        config['t_end'] = preset.full_t_end
    return preset


def _format(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, (float, np.floating)):
        return '%.17g' % value
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]],
              metadata: Optional[Dict[str, Any]] = None) -> None:
    """
    Write rows with 17 significant digits after `# key=value` metadata lines.

    Args:
        path: Output file, or `-` for stdout
        header: Column names
        rows: Row values; None becomes an empty cell
        metadata: Echoed as sorted leading comment lines
    """
    stream = sys.stdout if path == '-' else open(path, 'w', newline='', encoding='utf-8')
    try:
        for key in sorted(metadata or {}):
            stream.write(f"# {key}={_format(metadata[key])}\n")
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(value) for value in row])
    finally:
        if stream is not sys.stdout:
            stream.close()
    logger.info(f"Wrote {len(header)}-column CSV to {'stdout' if path == '-' else path}")


def convergence_rows(rows: Sequence[ConvergenceRow]) -> List[List[Any]]:
    return [[row.param, row.e_u, row.e_H, row.e_Hmod, row.order_u, row.order_H] for row in rows]


def compare_rows(rows: Sequence[CompareRow]) -> List[List[Any]]:
    return [[row.scheme, row.mass_drift, row.e_u, row.e_H, row.e_Hmod, row.runtime] for row in rows]


def resolved_metadata(config: Dict[str, Any], **extra) -> Dict[str, Any]:
    metadata = {key: config[key] for key in DEFAULT_CONFIG if key in config}
    metadata.update(extra)
    return metadata
