"""
Run loop advancing a scheme step by step, validating and logging every
step as a structured record.
"""
import json
import logging
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from src.exceptions import NumericalError, StepFailure
from src.schemes import Scheme
from src.spectral import ComplexField


@dataclass(frozen=True)
class StepRecord:
    step: int
    t: float
    mass: float
    hamiltonian: float
    modified_hamiltonian: Optional[float]
    r: Optional[float]


class SimulationService:
    """
    Drives one scheme over a fixed number of steps.

    Args:
        scheme: Integrator to drive
        config: Options; `h_mod_tolerance` bounds the relative drift of H~
            before a step is reported, `max_step_time` the seconds a step may take
    """
    DEFAULT_H_MOD_TOLERANCE = 1e-9
    DEFAULT_MAX_STEP_TIME = 5.0

    def __init__(self, scheme: Scheme, config: Optional[Dict[str, Any]] = None):
        self.logger = logging.getLogger(__name__)
        config = config or {}
        self.scheme = scheme
        self.running = False
        self.last_step = None
        self.h_mod_tolerance = config.get('h_mod_tolerance', self.DEFAULT_H_MOD_TOLERANCE)
        self.max_step_time = config.get('max_step_time', self.DEFAULT_MAX_STEP_TIME)
        self.drift_violations = 0
        self.runtime = 0.0
        self._initial_h_mod = None

    def start(self, u0: ComplexField, steps: int,
              observer: Optional[Callable[[StepRecord, ComplexField], None]] = None) -> List[StepRecord]:
        """
        Run `steps` steps from u0.

        Args:
            u0: Initial field
            steps: Number of steps
            observer: Called with the record and field of level 0 and of every accepted step

        Returns:
            List[StepRecord]: Records of the levels reached

        Raises:
            StepFailure: With the index of the step that failed
        """
        self.scheme.start(u0)
        self.running = True
        self.last_step = 0
        self.drift_violations = 0
        self.runtime = 0.0
        self.logger.info(f"Simulation started: {self.scheme.name}, {steps} steps of tau={self.scheme.tau}")

        record = self._record(0)
        self._initial_h_mod = record.modified_hamiltonian
        self._log_step_data(record)
        records = [record]
        if observer:
            observer(record, self.scheme.field)

        for index in range(1, steps + 1):
            if not self.running:
                self.logger.info(f"Simulation stopped before step {index}")
                break
            record = self._process_step(index)
            records.append(record)
            if observer:
                observer(record, self.scheme.field)
        self.running = False
        return records

    def _process_step(self, index: int) -> StepRecord:
        try:
            execution_time = self.scheme.step()
        except StepFailure as e:
            if e.step_index is None:
                e.step_index = index
            self.logger.error(f"Step {index} failed: {str(e)}")
            raise
        except NumericalError as e:
            self.logger.error(f"Step {index} failed: {str(e)}")
            raise StepFailure(str(e), step_index=index, diagnostics={'cause': type(e).__name__}) from e
        self.runtime += execution_time

        record = self._record(index)
        if not self._validate_step(record):
            raise StepFailure("non-finite diagnostics", step_index=index, diagnostics=asdict(record))
        self._log_step_data(record)
        self.last_step = index

        if execution_time > self.max_step_time:
            self.logger.warning(f"Step {index} took {execution_time:.2f}s")
        return record

    def _record(self, index: int) -> StepRecord:
        scheme = self.scheme
        return StepRecord(index, scheme.time, scheme.mass(), scheme.hamiltonian(),
                          scheme.modified_hamiltonian(), scheme.r)

    def _validate_step(self, record: StepRecord) -> bool:
        """
        Check the record of a step.

        Non-finite values reject the step. Drift of H~ beyond the tolerance is
        logged and counted.

        Args:
            record: Diagnostics of the step

        Returns:
            bool: False if the step has to be rejected
        """
        values = [record.mass, record.hamiltonian, record.modified_hamiltonian, record.r]
        if not all(np.isfinite(value) for value in values if value is not None):
            self.logger.warning(f"Step {record.step} produced non-finite diagnostics")
            return False
        if record.modified_hamiltonian is not None and self._initial_h_mod is not None:
            drift = abs(record.modified_hamiltonian - self._initial_h_mod)
            if drift > self.h_mod_tolerance * (1.0 + abs(self._initial_h_mod)):
                self.drift_violations += 1
                self.logger.warning(f"Modified Hamiltonian drifted by {drift:.3e} at step {record.step}")
        return True

    def _log_step_data(self, record: StepRecord) -> None:
        if self.logger.isEnabledFor(logging.DEBUG):
            self.logger.debug(f"Step {record.step}: {json.dumps(asdict(record))}")

    def stop(self) -> None:
        """Ask the loop to stop before the next step."""
        self.running = False
        self.logger.info("Simulation stop requested")
