# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

import dataclasses
import unittest

import numpy as np

from fluxfem.exceptions import ParameterError
from fluxfem.flux1d import flux_boundaries, flux_left, flux_right, recover_fluxes
from fluxfem.ifem1d import ExactSolution1d, solve, uniform_grid
from fluxfem.problems import linear_problem_1d, quartic_problem_1d, trig_problem_2d

RANDOM_PROBLEMS = 20
IDENTITY_TOLERANCE = 1e-9


def _scaled(problem, factor):
    """Returns the problem with solution, gradient and source multiplied by factor."""
    return dataclasses.replace(
        problem,
        solution=lambda side, x: factor * problem.solution(side, x),
        gradient=lambda side, x: factor * problem.gradient(side, x),
        source=lambda side, x: factor * problem.source(side, x),
    )


class TestFluxFunctionals(unittest.TestCase):
    def test_given_random_exact_solutions_when_functionals_are_evaluated_then_fluxes_are_exact(
        self,
    ):
        rng = np.random.default_rng(42)
        for draw in range(RANDOM_PROBLEMS):
            alpha = float(rng.uniform(0.05, 0.95))
            beta_minus, beta_plus = 10.0 ** rng.uniform(-1.0, 2.0, size=2)
            q = float(rng.integers(0, 2))
            n = int(rng.integers(8, 65))
            problem = quartic_problem_1d(alpha, beta_minus, beta_plus, q=q)
            exact = ExactSolution1d(problem, uniform_grid(n, alpha))

            report = recover_fluxes(exact, problem)

            with self.subTest(draw=draw, alpha=alpha, q=q, n=n):
                # beta u' = 4 x^3 on both sides
                flux = 4.0 * alpha**3
                self.assertAlmostEqual(report.gamma_minus, flux, delta=IDENTITY_TOLERANCE)
                self.assertAlmostEqual(report.gamma_plus, -flux, delta=IDENTITY_TOLERANCE)
                self.assertAlmostEqual(report.gamma_0, 0.0, delta=IDENTITY_TOLERANCE)
                self.assertAlmostEqual(report.gamma_1, 4.0, delta=IDENTITY_TOLERANCE)

    def test_given_exact_solution_when_derivatives_are_recovered_then_slopes_are_exact(self):
        problem = quartic_problem_1d(0.4, 2.0, 10.0)
        exact = ExactSolution1d(problem, uniform_grid(16, 0.4))

        report = recover_fluxes(exact, problem)

        self.assertAlmostEqual(report.derivative_minus, 4.0 * 0.4**3 / 2.0, places=10)
        self.assertAlmostEqual(report.derivative_plus, 4.0 * 0.4**3 / 10.0, places=10)
        self.assertAlmostEqual(report.derivative_0, 0.0, places=10)
        self.assertAlmostEqual(report.derivative_1, 4.0 / 10.0, places=10)

    def test_given_galerkin_solution_when_refined_then_interface_flux_error_decays(self):
        problem = quartic_problem_1d(1.0 / 3.0, 2.0, 10.0)
        exact_flux = 4.0 * (1.0 / 3.0) ** 3
        errors = []
        for n in (16, 64):
            sol = solve(problem, uniform_grid(n, 1.0 / 3.0))
            errors.append(abs(flux_left(sol, problem) - exact_flux))

        self.assertGreater(errors[0] / errors[1], 8.0)

    def test_given_galerkin_solution_when_flux_functionals_then_they_match_separate_calls(self):
        problem = quartic_problem_1d(0.3, 1.0, 4.0, q=1.0)
        sol = solve(problem, uniform_grid(20, 0.3))

        report = recover_fluxes(sol, problem)

        gamma_0, gamma_1 = flux_boundaries(sol, problem)
        self.assertEqual(report.gamma_minus, flux_left(sol, problem))
        self.assertEqual(report.gamma_plus, flux_right(sol, problem))
        self.assertEqual((report.gamma_0, report.gamma_1), (gamma_0, gamma_1))

    def test_given_galerkin_solution_of_u_equals_x_when_functionals_then_values_are_exact(self):
        problem = linear_problem_1d(0.37, 1.0, 1.0, flux=1.0)
        sol = solve(problem, uniform_grid(10, 0.37))

        report = recover_fluxes(sol, problem)

        self.assertAlmostEqual(report.gamma_minus, 1.0, delta=IDENTITY_TOLERANCE)
        self.assertAlmostEqual(report.gamma_plus, -1.0, delta=IDENTITY_TOLERANCE)
        self.assertAlmostEqual(report.gamma_0, -1.0, delta=IDENTITY_TOLERANCE)
        self.assertAlmostEqual(report.gamma_1, 1.0, delta=IDENTITY_TOLERANCE)

    def test_given_scaled_data_when_functionals_then_fluxes_scale_by_the_same_factor(self):
        problem = quartic_problem_1d(0.3, 1.0, 4.0, q=1.0)
        grid = uniform_grid(20, 0.3)
        factor = -2.5

        report = recover_fluxes(solve(problem, grid), problem)
        scaled = _scaled(problem, factor)
        scaled_report = recover_fluxes(solve(scaled, grid), scaled)

        for name in ("gamma_minus", "gamma_plus", "gamma_0", "gamma_1"):
            with self.subTest(functional=name):
                expected = factor * getattr(report, name)
                self.assertAlmostEqual(
                    getattr(scaled_report, name), expected, delta=1e-10 * max(abs(expected), 1.0)
                )

    def test_given_homogeneous_jump_when_refined_then_interface_functionals_cancel(self):
        alpha = 1.0 / 3.0
        problem = quartic_problem_1d(alpha, 2.0, 10.0)
        imbalance = []
        for n in (16, 32, 64):
            sol = solve(problem, uniform_grid(n, alpha))
            imbalance.append(abs(flux_left(sol, problem) + flux_right(sol, problem)))

        self.assertGreater(imbalance[0] / imbalance[1], 2.5)
        self.assertGreater(imbalance[1] / imbalance[2], 2.5)
        self.assertLess(imbalance[2], 1e-3)

    def test_given_2d_problem_when_flux_left_then_parameter_error_is_raised(self):
        problem_1d = quartic_problem_1d(0.5, 1.0, 1.0)
        exact = ExactSolution1d(problem_1d, uniform_grid(8, 0.5))

        with self.assertRaises(ParameterError):
            flux_left(exact, trig_problem_2d())
