"""
Time integrators behind one interface, so the run loop does not care
whether it advances a SAV state or a splitting field.
"""
import logging
import time
from typing import Optional

import numpy as np

from src.model import NlsProblem, field_hamiltonian, field_mass, modified_hamiltonian
from src.sav import Algorithm, Bootstrap, SavStepper, Solver, StepperConfig, init_state
from src.spectral import ComplexField
from src.splitting import SplitOrder, SplitScheme, split_step
from src.utils.config import SchemeName


class Scheme:
    """
    Base class of the integrators driven by SimulationService.

    Args:
        problem: Problem definition
        tau: Time step
        name: Scheme name used in logs and CSV output
    """

    def __init__(self, problem: NlsProblem, tau: float, name: str):
        self.logger = logging.getLogger(f"{__name__}.{self.__class__.__name__}")
        if not tau > 0:
            raise ValueError(f"{name} needs a positive tau, got {tau}")
        self.problem = problem
        self.tau = tau
        self.name = name
        self.time = 0.0

    def start(self, u0: ComplexField) -> None:
        raise NotImplementedError

    def step(self) -> float:
        """
        Advance one step.

        Returns:
            float: Wall-clock seconds spent in the step
        """
        _, execution_time = self._measure_step_time(self._advance)
        self.logger.debug(f"{self.name} step to t={self.time:.6g} took {execution_time:.4f}s")
        return execution_time

    def _advance(self) -> None:
        raise NotImplementedError

    @property
    def field(self) -> ComplexField:
        raise NotImplementedError

    @property
    def r(self) -> Optional[float]:
        return None

    def mass(self) -> float:
        return field_mass(self.field, self.problem.grid)

    def hamiltonian(self) -> float:
        return field_hamiltonian(self.field, self.problem)

    def modified_hamiltonian(self) -> Optional[float]:
        return None

    @classmethod
    def _measure_step_time(cls, func, *args, **kwargs):
        """
        Run func and time it.

        Returns:
            Tuple: (result, execution_time)
        """
        start_time = time.perf_counter()
        result = func(*args, **kwargs)
        execution_time = time.perf_counter() - start_time
        return result, execution_time


class SavScheme(Scheme):
    """Crank-Nicolson SAV in the Sherman-Morrison or the decomposition form."""

    def __init__(self, problem: NlsProblem, config: StepperConfig, name: str):
        super().__init__(problem, config.tau, name)
        self.config = config
        self.stepper = SavStepper(problem, config)
        self.state = None

    def start(self, u0: ComplexField) -> None:
        self.stepper.reset()
        self.state = init_state(u0, self.problem)
        self.time = self.state.time
        self.logger.info(f"{self.name} started with r={self.state.r:.12g}, E_c={self.problem.energy_shift}")

    def _advance(self) -> None:
        self.state = self.stepper.step(self.state)
        self.time = self.state.time

    @property
    def field(self) -> ComplexField:
        return self.state.field

    @property
    def r(self) -> Optional[float]:
        return self.state.r

    def modified_hamiltonian(self) -> Optional[float]:
        return modified_hamiltonian(self.state)


class SplittingScheme(Scheme):
    """Lie or Strang splitting with exact sub-flows."""

    def __init__(self, problem: NlsProblem, scheme: SplitScheme, name: str):
        super().__init__(problem, scheme.tau, name)
        self.scheme = scheme
        self._field = None

    def start(self, u0: ComplexField) -> None:
        self._field = np.asarray(self.problem.grid.check(u0, "u0"), dtype=complex)
        self.time = 0.0
        self.logger.info(f"{self.name} started")

    def _advance(self) -> None:
        self._field = split_step(self._field, self.scheme, self.problem)
        self.time += self.tau

    @property
    def field(self) -> ComplexField:
        return self._field


def create_scheme(name: str, problem: NlsProblem, tau: float, bootstrap: str = Bootstrap.PREDICTOR,
                  solver: str = Solver.FOURIER_DIAGONAL) -> Scheme:
    """
    Build the integrator registered under `name`.

    Args:
        name: sav1, sav2, lie or strang
        problem: Problem definition
        tau: Time step
        bootstrap: First-step handling of the SAV extrapolation
        solver: Linear solver of the SAV schemes

    Returns:
        Scheme: A scheme ready for start()

    Raises:
        ValueError: For an unknown name
    """
    if name == SchemeName.SAV1:
        return SavScheme(problem, StepperConfig(tau, Algorithm.ALG1, solver, bootstrap), name)
    if name == SchemeName.SAV2:
        return SavScheme(problem, StepperConfig(tau, Algorithm.ALG2, solver, bootstrap), name)
    if name == SchemeName.LIE:
        return SplittingScheme(problem, SplitScheme(SplitOrder.LIE, tau), name)
    if name == SchemeName.STRANG:
        return SplittingScheme(problem, SplitScheme(SplitOrder.STRANG, tau), name)
    raise ValueError(f"Unknown scheme '{name}'; expected one of {', '.join(SchemeName.ALL)}")
