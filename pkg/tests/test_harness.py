"""
Unit tests for error metrics, studies and CSV output.
"""
import io
import os
import tempfile
import unittest
from unittest.mock import patch

import numpy as np

from src.harness import (PRESETS, TRACE_HEADER, Reference, RunConfig, apply_preset, compare,
                         compute_errors, conservation_trace, convergence_study, estimate_orders,
                         ground_state_space_study, mean_order, roundoff_floor, run_simulation, write_csv)
from src.initdata import bright_soliton
from src.model import NlsProblem, Nonlinearity, field_hamiltonian
from src.spectral import Grid1D
from src.utils.config import DEFAULT_CONFIG


class TestErrorMetrics(unittest.TestCase):
    """
    Test cases for compute_errors and order estimates.
    """

    def setUp(self):
        """Set up test fixtures."""
        self.grid = Grid1D(256, 32.0)
        self.problem = NlsProblem(self.grid, np.zeros(256), Nonlinearity.cubic(-1.0), 1.0)
        self.u = bright_soliton(1.0, -1.0, 1.0, 0.0, self.grid)

    def test_identical_fields(self):
        """All errors vanish when U is the reference."""
        energy = field_hamiltonian(self.u, self.problem)
        errors = compute_errors(self.u, self.u, self.problem, modified_hamiltonian=energy + 1.0)
        self.assertEqual(errors.e_u, 0.0)
        self.assertEqual(errors.e_H, 0.0)
        self.assertAlmostEqual(errors.e_Hmod, 0.0, places=12)

    def test_global_phase_is_invisible(self):
        """e_u compares moduli and H is gauge invariant."""
        errors = compute_errors(self.u * np.exp(0.3j), self.u, self.problem)
        self.assertLess(errors.e_u, 1e-15)
        self.assertLess(errors.e_H, 1e-12)
        self.assertIsNone(errors.e_Hmod)

    def test_estimate_orders(self):
        """Halving tau with errors falling by 4 gives order 2."""
        orders = estimate_orders([0.1, 0.05, 0.025], [1e-2, 2.5e-3, 6.25e-4])
        self.assertIsNone(orders[0])
        self.assertAlmostEqual(orders[1], 2.0)
        self.assertAlmostEqual(orders[2], 2.0)
        self.assertEqual(estimate_orders([], []), [])
        self.assertIsNone(estimate_orders([0.1, 0.05], [1e-2, 0.0])[1])

    def test_mean_order_skips_roundoff(self):
        """Rows at the roundoff floor do not enter the mean."""
        params = [0.1, 0.05, 0.025, 0.0125]
        errors = [1e-2, 2.5e-3, 1e-12, 1.1e-12]
        self.assertAlmostEqual(roundoff_floor(errors), 1e-12)
        self.assertAlmostEqual(mean_order(params, errors), 2.0)
        self.assertIsNone(mean_order([0.1, 0.05], [1e-14, 1e-14]))
        self.assertEqual(roundoff_floor([1e-2, 2.5e-3]), 1e-13)


class TestRunConfig(unittest.TestCase):
    """
    Test cases for run descriptions and presets.
    """

    def test_from_config_ignores_other_keys(self):
        """Only RunConfig fields are taken from the full configuration."""
        config = RunConfig.from_config(dict(DEFAULT_CONFIG, gs_beta=1.0))
        self.assertEqual(config.n, DEFAULT_CONFIG['n'])
        self.assertEqual(config.scheme, DEFAULT_CONFIG['scheme'])

    def test_seed_appended_to_rough_data(self):
        """halpha:alpha gets the configured seed; explicit seeds are kept."""
        self.assertEqual(RunConfig(ic='halpha:2:5', seed=3).initial_data().params, (2.0, 5.0))
        self.assertEqual(RunConfig(ic='halpha:3', seed=4).initial_data().params, (3.0, 4.0))

    def test_apply_preset(self):
        """Presets overwrite values; full length switches the final time."""
        config = dict(DEFAULT_CONFIG)
        preset = apply_preset(config, 'cubic-order')
        self.assertEqual(config['n'], 2048)
        self.assertEqual(config['t_end'], 1.0)
        self.assertEqual(preset.axis, 'tau')
        apply_preset(config, 'cubic-order', full_length=True)
        self.assertEqual(config['t_end'], 10.0)
        with self.assertRaises(KeyError):
            apply_preset(config, 'unknown')
        self.assertIn('groundstate', PRESETS)


class TestSimulation(unittest.TestCase):
    """
    Test cases for single runs and the conservation trace.
    """

    def setUp(self):
        """Set up test fixtures."""
        self.config = RunConfig(n=256, domain_half_length=32.0, tau=0.01, t_end=0.1)

    def test_run_against_exact_solution(self):
        """A short soliton run is measured against the closed form."""
        result = run_simulation(self.config)
        self.assertEqual(result.reference_kind, Reference.EXACT)
        self.assertEqual(len(result.records), 11)
        self.assertAlmostEqual(result.records[-1].t, 0.1)
        self.assertLess(result.errors.e_u, 1e-3)
        self.assertLess(result.errors.e_Hmod, 1e-8)

    def test_self_reference_fallback(self):
        """Without a closed form the run falls back to a refined sav2 reference."""
        config = RunConfig(n=64, domain_half_length=float(np.pi), tau=0.01, t_end=0.05,
                           nonlinearity='cubic:1', ic='sine')
        with self.assertLogs('src.harness', level='WARNING'):
            result = run_simulation(config)
        self.assertEqual(result.reference_kind, Reference.SELF)
        self.assertLess(result.errors.e_u, 1e-3)

    def test_conservation_trace(self):
        """One row per level; splitting rows leave H_mod and r blank."""
        rows, result = conservation_trace(self.config)
        self.assertEqual(len(rows), 11)
        self.assertEqual(len(rows[0]), len(TRACE_HEADER))
        self.assertEqual(rows[0][6], 0.0)
        self.assertTrue(all(row[6] is not None for row in rows))
        h_mod = [row[4] for row in rows]
        self.assertLess(max(h_mod) - min(h_mod), 1e-9 * (1 + abs(h_mod[0])))

        rows, _ = conservation_trace(self.config.with_(scheme='strang'))
        self.assertIsNone(rows[-1][4])
        self.assertIsNone(rows[-1][5])


class TestStudies(unittest.TestCase):
    """
    Test cases for convergence studies and comparisons.
    """

    def setUp(self):
        """Set up test fixtures."""
        self.base = RunConfig(n=512, domain_half_length=32.0, t_end=1.0)
        self.taus = [0.02, 0.01, 0.005, 0.0025]

    def test_single_member(self):
        """One value gives one row without orders."""
        rows, kind = convergence_study(self.base.with_(t_end=0.1), 'tau', [0.01])
        self.assertEqual(kind, Reference.EXACT)
        self.assertEqual(len(rows), 1)
        self.assertIsNone(rows[0].order_u)
        self.assertEqual(convergence_study(self.base, 'tau', [])[0], [])
        with self.assertRaises(ValueError):
            convergence_study(self.base, 'h', [0.1])

    def test_temporal_orders(self):
        """Soliton, T = 1: sav1, sav2 and strang are second order, lie first order."""
        expected = {'sav1': (1.8, 2.2), 'sav2': (1.8, 2.2), 'strang': (1.8, 2.2), 'lie': (0.8, 1.2)}
        for scheme, (low, high) in expected.items():
            rows, _ = convergence_study(self.base.with_(scheme=scheme), 'tau', self.taus, workers=4)
            self.assertEqual([row.param for row in rows], self.taus)
            slope = mean_order([row.param for row in rows], [row.e_u for row in rows])
            self.assertGreaterEqual(slope, low, scheme)
            self.assertLessEqual(slope, high, scheme)

    def test_compare(self):
        """One row per scheme; splittings conserve mass and have no H~."""
        rows = compare(self.base.with_(n=256, t_end=0.05), workers=2)
        self.assertEqual([row.scheme for row in rows], ['sav1', 'sav2', 'lie', 'strang'])
        by_name = {row.scheme: row for row in rows}
        self.assertIsNone(by_name['lie'].e_Hmod)
        self.assertIsNotNone(by_name['sav2'].e_Hmod)
        self.assertLess(by_name['strang'].mass_drift, 1e-12)

    def test_ground_state_space_study(self):
        """Rows come back from coarse to fine with finite errors."""
        config = dict(DEFAULT_CONFIG, domain_half_length=8.0, potential='harmonic', gs_beta=10.0,
                      tau=0.01, gs_tol=1e-6)
        rows = ground_state_space_study(config, spacings=(1 / 2, 1 / 4), reference_spacing=1 / 8)
        self.assertEqual([row.param for row in rows], [0.5, 0.25])
        self.assertTrue(all(np.isfinite(row.e_u) for row in rows))
        self.assertIsNone(rows[0].order_u)


class TestCsvOutput(unittest.TestCase):
    """
    Test cases for write_csv.
    """

    def setUp(self):
        """Set up test fixtures."""
        self.temp_dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        """Tear down test fixtures."""
        self.temp_dir.cleanup()

    def test_format(self):
        """Metadata is sorted, floats keep 17 digits and None is blank."""
        path = os.path.join(self.temp_dir.name, 'out.csv')
        write_csv(path, ['a', 'b', 'c'], [[1, 0.1, None]], {'tau': 0.01, 'scheme': 'sav2'})
        with open(path, encoding='utf-8') as f:
            self.assertEqual(f.read(), "# scheme=sav2\n# tau=0.01\na,b,c\n1,0.10000000000000001,\n")

    def test_stdout(self):
        """The path - writes to stdout."""
        with patch('sys.stdout', new_callable=io.StringIO) as stdout:
            write_csv('-', ['x'], [[2.5]])
        self.assertEqual(stdout.getvalue(), "x\n2.5\n")


if __name__ == '__main__':
    unittest.main()
