"""
Unit tests for the scheme interface and its registry.
"""
import unittest
from unittest.mock import patch

import numpy as np

from src.model import NlsProblem, Nonlinearity, field_mass
from src.sav import Algorithm, Bootstrap
from src.schemes import SavScheme, Scheme, SplittingScheme, create_scheme
from src.spectral import Grid1D
from src.splitting import SplitOrder
from src.utils.config import SchemeName


class TestSchemeRegistry(unittest.TestCase):
    """
    Test cases for create_scheme.
    """

    def setUp(self):
        """Set up test fixtures."""
        self.grid = Grid1D(64, 16.0)
        self.problem = NlsProblem(self.grid, np.zeros(64), Nonlinearity.cubic(-1.0), 10.0)

    def test_names_map_to_schemes(self):
        """sav1/sav2 build SAV schemes, lie/strang build splittings."""
        sav1 = create_scheme(SchemeName.SAV1, self.problem, 0.01)
        sav2 = create_scheme(SchemeName.SAV2, self.problem, 0.01, bootstrap=Bootstrap.FROZEN)
        lie = create_scheme(SchemeName.LIE, self.problem, 0.01)
        strang = create_scheme(SchemeName.STRANG, self.problem, 0.01)
        self.assertIsInstance(sav1, SavScheme)
        self.assertEqual(sav1.config.algorithm, Algorithm.ALG1)
        self.assertEqual(sav2.config.algorithm, Algorithm.ALG2)
        self.assertEqual(sav2.config.bootstrap, Bootstrap.FROZEN)
        self.assertIsInstance(lie, SplittingScheme)
        self.assertEqual(lie.scheme.order, SplitOrder.LIE)
        self.assertEqual(strang.scheme.order, SplitOrder.STRANG)
        self.assertEqual(strang.name, SchemeName.STRANG)

    def test_unknown_name(self):
        """Unregistered names and non-positive steps raise ValueError."""
        with self.assertRaises(ValueError):
            create_scheme('rk4', self.problem, 0.01)
        with self.assertRaises(ValueError):
            create_scheme(SchemeName.SAV2, self.problem, -0.01)


class TestSchemeStepping(unittest.TestCase):
    """
    Test cases for stepping through the common interface.
    """

    def setUp(self):
        """Set up test fixtures."""
        self.grid = Grid1D(128, 16.0)
        self.problem = NlsProblem(self.grid, np.zeros(128), Nonlinearity.cubic(-1.0), 10.0)
        self.u0 = np.sqrt(2.0) / np.cosh(self.grid.nodes) * np.exp(1j * self.grid.nodes)

    def test_sav_scheme(self):
        """A SAV scheme exposes r and H~ and advances its clock."""
        scheme = create_scheme(SchemeName.SAV2, self.problem, 0.01)
        scheme.start(self.u0)
        initial = scheme.modified_hamiltonian()
        self.assertAlmostEqual(initial, scheme.hamiltonian() + self.problem.energy_shift, places=10)
        for _ in range(3):
            scheme.step()
        self.assertAlmostEqual(scheme.time, 0.03)
        self.assertIsNotNone(scheme.r)
        self.assertLess(abs(scheme.modified_hamiltonian() - initial), 1e-10 * (1 + abs(initial)))

    def test_splitting_scheme(self):
        """A splitting scheme has no auxiliary variable and conserves mass."""
        scheme = create_scheme(SchemeName.LIE, self.problem, 0.01)
        scheme.start(self.u0)
        scheme.step()
        self.assertIsNone(scheme.r)
        self.assertIsNone(scheme.modified_hamiltonian())
        self.assertAlmostEqual(scheme.mass(), field_mass(self.u0, self.grid), places=12)
        self.assertAlmostEqual(scheme.time, 0.01)

    @patch('src.schemes.time.perf_counter')
    def test_step_reports_execution_time(self, mock_counter):
        """step() returns the wall-clock time of the advance."""
        mock_counter.side_effect = [10.0, 10.25]
        scheme = create_scheme(SchemeName.STRANG, self.problem, 0.01)
        scheme.start(self.u0)
        self.assertAlmostEqual(scheme.step(), 0.25)

    def test_base_class_is_abstract(self):
        """The base class cannot be started or stepped."""
        scheme = Scheme(self.problem, 0.01, 'base')
        with self.assertRaises(NotImplementedError):
            scheme.start(self.u0)
        with self.assertRaises(NotImplementedError):
            scheme.step()


if __name__ == '__main__':
    unittest.main()
