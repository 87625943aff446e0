"""
Unit tests for the simulation run loop.
"""
import json
import unittest
from unittest.mock import MagicMock

import numpy as np

from src.exceptions import NumericalError, StepFailure
from src.simulation_service import SimulationService, StepRecord


class TestSimulationService(unittest.TestCase):
    """
    Test cases for the SimulationService class.
    """

    def setUp(self):
        """Set up test fixtures."""
        self.mock_config = {
            'h_mod_tolerance': 1e-9,
            'max_step_time': 5.0,
        }

        self.mock_scheme = MagicMock()
        self.mock_scheme.name = 'sav2'
        self.mock_scheme.tau = 0.01
        self.mock_scheme.time = 0.0
        self.mock_scheme.r = 1.5
        self.mock_scheme.field = np.zeros(8, dtype=complex)
        self.mock_scheme.mass.return_value = 4.0
        self.mock_scheme.hamiltonian.return_value = -0.5
        self.mock_scheme.modified_hamiltonian.return_value = 0.5
        self.mock_scheme.step.return_value = 0.001

        self.service = SimulationService(self.mock_scheme, self.mock_config)
        self.u0 = np.ones(8, dtype=complex)

    def test_process_steps_sequentially(self):
        """Steps are taken in order and every level is recorded."""
        observed = []
        records = self.service.start(self.u0, 3, observer=lambda record, field: observed.append(record.step))

        self.mock_scheme.start.assert_called_once_with(self.u0)
        self.assertEqual(self.mock_scheme.step.call_count, 3)
        self.assertEqual([record.step for record in records], [0, 1, 2, 3])
        self.assertEqual(observed, [0, 1, 2, 3])
        self.assertEqual(self.service.last_step, 3)
        self.assertAlmostEqual(self.service.runtime, 0.003)
        self.assertFalse(self.service.running)

    def test_validate_step(self):
        """Non-finite values reject a step; drift of H~ is counted but accepted."""
        self.service._initial_h_mod = 0.5
        valid = StepRecord(1, 0.01, 4.0, -0.5, 0.5, 1.5)
        non_finite = StepRecord(1, 0.01, float('nan'), -0.5, 0.5, 1.5)
        drifted = StepRecord(2, 0.02, 4.0, -0.5, 0.6, 1.5)
        splitting = StepRecord(1, 0.01, 4.0, -0.5, None, None)

        self.assertTrue(self.service._validate_step(valid))
        self.assertFalse(self.service._validate_step(non_finite))
        self.assertTrue(self.service._validate_step(splitting))
        self.assertEqual(self.service.drift_violations, 0)
        with self.assertLogs('src.simulation_service', level='WARNING'):
            self.assertTrue(self.service._validate_step(drifted))
        self.assertEqual(self.service.drift_violations, 1)

    def test_stop(self):
        """stop() ends the loop before the next step."""
        records = self.service.start(self.u0, 5, observer=lambda record, field: self.service.stop())
        self.assertEqual(len(records), 1)
        self.mock_scheme.step.assert_not_called()

    def test_numerical_error_reports_step(self):
        """A numerical error in the second step becomes StepFailure with index 2."""
        self.mock_scheme.step.side_effect = [0.001, NumericalError("overflow")]
        with self.assertRaises(StepFailure) as context:
            self.service.start(self.u0, 4)
        self.assertEqual(context.exception.step_index, 2)
        self.assertEqual(self.service.last_step, 1)

    def test_step_failure_gets_index(self):
        """A StepFailure raised without an index is tagged with the current step."""
        self.mock_scheme.step.side_effect = StepFailure("singular denominator")
        with self.assertRaises(StepFailure) as context:
            self.service.start(self.u0, 2)
        self.assertEqual(context.exception.step_index, 1)

    def test_non_finite_record_fails(self):
        """A step producing NaN diagnostics is rejected."""
        self.mock_scheme.hamiltonian.side_effect = [-0.5, float('nan')]
        with self.assertRaises(StepFailure):
            self.service.start(self.u0, 2)

    def test_slow_step_is_logged(self):
        """Steps slower than max_step_time are reported."""
        self.mock_scheme.step.return_value = 10.0
        with self.assertLogs('src.simulation_service', level='WARNING') as logs:
            self.service.start(self.u0, 1)
        self.assertTrue(any('took' in message for message in logs.output))

    def test_log_step_data(self):
        """Records are logged as JSON at DEBUG level."""
        record = StepRecord(3, 0.03, 4.0, -0.5, 0.5, 1.5)
        with self.assertLogs('src.simulation_service', level='DEBUG') as logs:
            self.service._log_step_data(record)
        payload = logs.records[0].getMessage().split(': ', 1)[1]
        self.assertEqual(json.loads(payload)['modified_hamiltonian'], 0.5)


if __name__ == '__main__':
    unittest.main()
