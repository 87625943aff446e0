"""
Unit tests for the normalized gradient-flow ground-state solver.
"""
import unittest

import numpy as np
from numpy.testing import assert_allclose

from src.groundstate import (GroundStateProblem, RMode, chemical_potential, flow_multiplier, flow_terms,
                             gs_auxiliary, gs_energy, gs_gradient, gs_step, solve_ground_state, stabilization)
from src.initdata import gaussian
from src.sav import GHistory
from src.spectral import Grid1D, l2_norm, quadrature


class TestGroundStateEnergies(unittest.TestCase):
    """
    Test cases for the energy functionals.
    """

    def setUp(self):
        """Set up test fixtures."""
        self.grid = Grid1D(256, 16.0)
        self.harmonic = 0.5 * self.grid.nodes ** 2
        self.phi = gaussian(self.grid).real

    def test_harmonic_oscillator_values(self):
        """beta = 0: E = mu = 1/2 for the normalized Gaussian."""
        problem = GroundStateProblem(self.grid, self.harmonic)
        self.assertAlmostEqual(gs_energy(self.phi, problem), 0.5, delta=1e-8)
        self.assertAlmostEqual(chemical_potential(self.phi, problem), 0.5, delta=1e-8)
        self.assertEqual(gs_energy(np.zeros(256), problem), 0.0)

    def test_quadratic_scaling(self):
        """beta = 0: E(c phi) = c^2 E(phi)."""
        problem = GroundStateProblem(self.grid, self.harmonic)
        self.assertAlmostEqual(gs_energy(3.0 * self.phi, problem), 9.0 * gs_energy(self.phi, problem), places=12)

    def test_chemical_potential_gap(self):
        """mu - E = 1/2 beta integral phi^4."""
        problem = GroundStateProblem(self.grid, self.harmonic, beta=40.0)
        gap = chemical_potential(self.phi, problem) - gs_energy(self.phi, problem)
        self.assertAlmostEqual(gap, 20.0 * quadrature(self.phi ** 4, self.grid), places=12)

    def test_flow_multiplier_is_chemical_potential(self):
        """With r = sqrt(E_1 + E_c) the multiplier of the projected flow is mu."""
        problem = GroundStateProblem(self.grid, self.harmonic, beta=40.0)
        r = gs_auxiliary(self.phi, problem)
        multiplier = flow_multiplier(self.phi, r, gs_gradient(self.phi, problem), self.grid)
        self.assertAlmostEqual(multiplier, chemical_potential(self.phi, problem), places=10)

    def test_stabilization_bounds_local_rate(self):
        """S is the largest |V + 3 beta phi^2| on the grid."""
        problem = GroundStateProblem(self.grid, self.harmonic, beta=40.0)
        self.assertAlmostEqual(stabilization(self.phi, problem), 128.0, places=10)
        peak = GroundStateProblem(self.grid, np.zeros(256), beta=40.0)
        self.assertAlmostEqual(stabilization(self.phi, peak), 120.0 / np.sqrt(np.pi), places=6)

    def test_problem_validation(self):
        """Invalid tolerance, step cap, shift or r mode are rejected."""
        for kwargs in ({'tol': 0.0}, {'max_steps': 0}, {'energy_shift': -1.0}, {'r_mode': 'keep'}):
            with self.assertRaises(ValueError):
                GroundStateProblem(self.grid, self.harmonic, **kwargs)


class TestGroundStateStep(unittest.TestCase):
    """
    Test cases for single normalized steps.
    """

    def setUp(self):
        """Set up test fixtures."""
        self.grid = Grid1D(128, 8.0)

    def test_constant_is_fixed_point(self):
        """V = 0, beta = 0: the normalized constant does not move."""
        problem = GroundStateProblem(self.grid, np.zeros(128))
        phi = np.full(128, 1.0 / np.sqrt(16.0))
        r = gs_auxiliary(phi, problem)
        new_phi, new_r = gs_step(phi, r, GHistory(), problem, 0.1)
        assert_allclose(new_phi, phi, atol=1e-14)
        self.assertAlmostEqual(new_r, r, places=14)

    def test_steps_stay_normalized(self):
        """Every step returns a unit-norm iterate, in both r modes."""
        harmonic = 0.5 * self.grid.nodes ** 2
        for mode in (RMode.RESET, RMode.CARRY):
            problem = GroundStateProblem(self.grid, harmonic, beta=10.0, r_mode=mode)
            phi = np.exp(-0.3 * self.grid.nodes ** 2) * (1 + 0.2 * np.sin(self.grid.nodes))
            phi = phi / l2_norm(phi, self.grid)
            r = gs_auxiliary(phi, problem)
            history = GHistory()
            for _ in range(10):
                phi, r = gs_step(phi, r, history, problem, 0.01)
                self.assertAlmostEqual(l2_norm(phi, self.grid), 1.0, delta=1e-12)
                self.assertTrue(np.isfinite(r))


class TestSolveGroundState(unittest.TestCase):
    """
    Test cases for the full iteration.
    """

    def setUp(self):
        """Set up test fixtures."""
        self.grid = Grid1D(256, 16.0)
        self.harmonic = 0.5 * self.grid.nodes ** 2
        self.exact = gaussian(self.grid).real

    def test_harmonic_oscillator_ground_state(self):
        """beta = 0 converges to the Gaussian with E = mu = 1/2."""
        problem = GroundStateProblem(self.grid, self.harmonic, tol=1e-10)
        result = solve_ground_state(problem, self.exact, 0.01)
        self.assertTrue(result.converged)
        self.assertTrue(result.monotone)
        self.assertAlmostEqual(result.energy, 0.5, delta=1e-6)
        self.assertAlmostEqual(result.chemical_potential, 0.5, delta=1e-6)
        self.assertAlmostEqual(l2_norm(result.phi, self.grid), 1.0, delta=1e-12)
        self.assertLess(l2_norm(result.phi - self.exact, self.grid), 1e-6)
        self.assertEqual(len(result.energy_trace), result.iterations + 1)

    def test_gaussian_is_fixed_point(self):
        """With V = 128 at the edges and tau = 0.01 the exact ground state does not move."""
        problem = GroundStateProblem(self.grid, self.harmonic)
        r = gs_auxiliary(self.exact, problem)
        history = GHistory()
        history.push(flow_terms(self.exact, r, problem), 0.0)
        phi = self.exact
        for step in range(1, 301):
            phi, r = gs_step(phi, r, history, problem, 0.01)
            history.push(flow_terms(phi, r, problem), step * 0.01)
        self.assertLess(np.max(np.abs(phi - self.exact)), 1e-10)
        self.assertAlmostEqual(gs_energy(phi, problem), 0.5, delta=1e-10)

    def test_stiff_edge_mode_is_damped(self):
        """A sign-flipping disturbance where V*tau > 1 decays instead of growing."""
        problem = GroundStateProblem(self.grid, self.harmonic, tol=1e-10)
        edge = np.where(np.abs(self.grid.nodes) > 14.0, 1e-3, 0.0)
        result = solve_ground_state(problem, self.exact + edge, 0.01)
        self.assertTrue(result.converged)
        self.assertLess(np.max(np.abs(result.phi[np.abs(self.grid.nodes) > 14.0])), 1e-8)
        self.assertAlmostEqual(result.energy, 0.5, delta=1e-6)

    def test_energy_decreases_from_perturbed_start(self):
        """A perturbed Gaussian relaxes with a nonincreasing energy toward 1/2."""
        problem = GroundStateProblem(self.grid, self.harmonic, tol=1e-8)
        start = self.exact * (1.0 + 0.3 * np.cos(self.grid.nodes)) + 0.2 * self.grid.nodes * self.exact
        result = solve_ground_state(problem, start, 0.01)
        self.assertTrue(result.converged)
        self.assertTrue(result.monotone)
        self.assertTrue(np.all(np.diff(result.energy_trace) <= 1e-10))
        self.assertAlmostEqual(result.energy, 0.5, delta=1e-6)

    def test_reset_keeps_energy_gap_at_shift(self):
        """With r reset after normalization the modified energy exceeds E by E_c."""
        problem = GroundStateProblem(self.grid, self.harmonic, beta=5.0, energy_shift=2.0, tol=1e-7)
        result = solve_ground_state(problem, self.exact, 0.01)
        self.assertAlmostEqual(result.modified_energy - result.energy, 2.0, places=10)

    def test_carry_mode_converges_to_same_state(self):
        """Carrying r reaches the reset ground state; its energy gap stays close to E_c."""
        results = {}
        for mode in (RMode.RESET, RMode.CARRY):
            problem = GroundStateProblem(self.grid, self.harmonic, beta=10.0, energy_shift=1.5, tol=1e-8,
                                         r_mode=mode)
            results[mode] = solve_ground_state(problem, self.exact, 0.01)
        carry, reset = results[RMode.CARRY], results[RMode.RESET]
        self.assertTrue(carry.converged)
        self.assertAlmostEqual(carry.energy, reset.energy, delta=1e-3)
        self.assertLess(l2_norm(carry.phi - reset.phi, self.grid), 1e-2)
        self.assertAlmostEqual(carry.modified_energy - carry.energy, 1.5, delta=0.05)
        self.assertAlmostEqual(l2_norm(carry.phi, self.grid), 1.0, delta=1e-12)

    def test_step_cap_reports_non_convergence(self):
        """Hitting max_steps returns the iterate with converged = False."""
        problem = GroundStateProblem(self.grid, self.harmonic, beta=10.0, max_steps=3)
        with self.assertLogs('src.groundstate', level='WARNING'):
            result = solve_ground_state(problem, self.exact, 0.01)
        self.assertFalse(result.converged)
        self.assertEqual(result.iterations, 3)

    def test_invalid_tau(self):
        """Non-positive tau is rejected."""
        problem = GroundStateProblem(self.grid, self.harmonic)
        with self.assertRaises(ValueError):
            solve_ground_state(problem, self.exact, 0.0)


if __name__ == '__main__':
    unittest.main()
