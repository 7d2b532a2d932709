# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

import unittest

import numpy as np

from fluxfem.exceptions import AmbiguousEvaluationError, ParameterError
from fluxfem.ifem1d import (
    Limit,
    assemble,
    build_basis,
    evaluate,
    evaluate_derivative,
    interpolate,
    solve,
    uniform_grid,
)
from fluxfem.problems import (
    PiecewiseCoefficient,
    PointInterface,
    Side,
    linear_problem_1d,
    quartic_problem_1d,
    trig_problem_2d,
)

RANDOM_DRAWS = 1000


def _coefficient(alpha: float, beta_minus: float, beta_plus: float) -> PiecewiseCoefficient:
    return PiecewiseCoefficient(
        beta_minus=beta_minus, beta_plus=beta_plus, interface=PointInterface(alpha=alpha)
    )


class TestGrid1d(unittest.TestCase):
    def test_given_alpha_one_third_when_grid_is_built_then_interface_element_brackets_alpha(self):
        grid = uniform_grid(16, 1.0 / 3.0)

        j = grid.interface_element

        self.assertEqual(j, 5)
        self.assertLessEqual(grid.nodes[j], grid.alpha)
        self.assertLess(grid.alpha, grid.nodes[j + 1])

    def test_given_alpha_on_a_node_when_grid_is_built_then_element_starts_at_alpha(self):
        grid = uniform_grid(4, 0.5)

        self.assertEqual(grid.interface_element, 2)
        self.assertEqual(grid.breakpoints.size, 5)

    def test_given_grid_when_pieces_then_they_partition_the_unit_interval(self):
        grid = uniform_grid(10, 0.37)

        pieces = grid.pieces()

        self.assertEqual(pieces.a.size, 11)
        self.assertAlmostEqual(float(np.sum(pieces.b - pieces.a)), 1.0, places=14)
        self.assertEqual(int(pieces.minus.sum()), 4)
        self.assertEqual(int(np.sum(pieces.element == grid.interface_element)), 2)

    def test_given_too_few_elements_when_grid_is_built_then_parameter_error_is_raised(self):
        with self.assertRaises(ParameterError):
            uniform_grid(1, 0.5)

    def test_given_alpha_outside_the_interval_when_grid_is_built_then_parameter_error(self):
        with self.assertRaises(ParameterError):
            uniform_grid(8, 1.0)


class TestIfemBasis(unittest.TestCase):
    def test_given_random_draws_when_basis_is_built_then_jump_conditions_and_unity_hold(self):
        rng = np.random.default_rng(2023)
        for _ in range(RANDOM_DRAWS):
            n = int(rng.integers(2, 65))
            alpha = float(rng.uniform(0.02, 0.98))
            beta_minus, beta_plus = 10.0 ** rng.uniform(-1.0, 2.0, size=2)
            grid = uniform_grid(n, alpha)
            basis = build_basis(grid, _coefficient(alpha, beta_minus, beta_plus))
            j, nodes = basis.j, grid.nodes
            at_alpha = np.array([alpha])

            for node in (j, j + 1):
                left = basis.phi(node, at_alpha, Limit.LEFT)
                right = basis.phi(node, at_alpha, Limit.RIGHT)
                self.assertAlmostEqual(float(left[0]), float(right[0]), delta=1e-12)
            for side in (Side.MINUS, Side.PLUS):
                slopes = basis.slopes(side)
                self.assertAlmostEqual(sum(slopes), 0.0, delta=1e-9 * abs(slopes[0]))
            flux_minus = beta_minus * basis.slopes(Side.MINUS)[0]
            flux_plus = beta_plus * basis.slopes(Side.PLUS)[0]
            self.assertAlmostEqual(flux_minus, flux_plus, delta=1e-9 * abs(flux_minus))
            self.assertAlmostEqual(float(basis.phi(j, nodes[j : j + 1])[0]), 1.0, delta=1e-12)
            self.assertAlmostEqual(
                float(basis.phi(j + 1, nodes[j + 1 : j + 2])[0]), 1.0, delta=1e-12
            )
            self.assertAlmostEqual(float(basis.phi(j + 1, nodes[j : j + 1])[0]), 0.0, delta=1e-12)
            samples = np.linspace(nodes[j], nodes[j + 1], 7)
            unity = basis.phi(j, samples) + basis.phi(j + 1, samples)
            self.assertTrue(np.allclose(unity[:-1], 1.0, atol=1e-12))

    def test_given_interface_on_a_node_when_basis_is_built_then_d_is_rho_h(self):
        grid = uniform_grid(4, 0.5)

        basis = build_basis(grid, _coefficient(0.5, 2.0, 10.0))

        self.assertAlmostEqual(basis.D, 0.2 * 0.25, places=14)

    def test_given_mismatched_alpha_when_build_basis_then_parameter_error_is_raised(self):
        with self.assertRaises(ParameterError):
            build_basis(uniform_grid(8, 0.3), _coefficient(0.4, 1.0, 1.0))

    def test_given_unmodified_node_when_phi_then_parameter_error_is_raised(self):
        basis = build_basis(uniform_grid(8, 0.3), _coefficient(0.3, 1.0, 2.0))

        with self.assertRaises(ParameterError):
            basis.phi(basis.j + 2, np.array([0.5]))


class TestSolve(unittest.TestCase):
    def test_given_member_of_the_space_when_solve_then_it_is_reproduced_exactly(self):
        alpha, beta_minus, beta_plus = 0.37, 1.0, 8.0
        problem = linear_problem_1d(alpha, beta_minus, beta_plus, flux=2.0)
        grid = uniform_grid(10, alpha)

        sol = solve(problem, grid)

        self.assertTrue(np.allclose(sol.coefficients, problem.u(grid.nodes), atol=1e-12))
        self.assertAlmostEqual(sol.kappa, 2.0 / beta_minus, places=10)
        slope_plus = evaluate_derivative(sol, alpha, "right")
        self.assertAlmostEqual(slope_plus, 2.0 / beta_plus, places=10)

    def test_given_solution_when_evaluated_at_alpha_then_one_sided_values_agree(self):
        problem = quartic_problem_1d(1.0 / 3.0, 2.0, 10.0)
        sol = solve(problem, uniform_grid(16, 1.0 / 3.0))

        left = evaluate(sol, 1.0 / 3.0, "left")
        right = evaluate(sol, 1.0 / 3.0, "right")

        self.assertAlmostEqual(left, right, places=14)
        self.assertAlmostEqual(left, sol.alpha_value, places=14)

    def test_given_solution_when_derivative_at_alpha_then_flux_is_continuous(self):
        problem = quartic_problem_1d(1.0 / 3.0, 2.0, 10.0)
        sol = solve(problem, uniform_grid(32, 1.0 / 3.0))

        left = evaluate_derivative(sol, 1.0 / 3.0, "left")
        right = evaluate_derivative(sol, 1.0 / 3.0, "right")

        self.assertAlmostEqual(2.0 * left, 10.0 * right, places=10)

    def test_given_auto_side_at_alpha_when_evaluate_then_ambiguous_evaluation_error(self):
        problem = quartic_problem_1d(0.5, 2.0, 10.0)
        sol = solve(problem, uniform_grid(8, 0.5))

        with self.assertRaises(AmbiguousEvaluationError):
            evaluate(sol, 0.5)

    def test_given_point_outside_the_interval_when_evaluate_then_parameter_error_is_raised(self):
        problem = quartic_problem_1d(0.5, 2.0, 10.0)
        sol = solve(problem, uniform_grid(8, 0.5))

        with self.assertRaises(ParameterError):
            evaluate(sol, 1.5)

    def test_given_quartic_problem_when_refined_then_sampled_error_drops_by_about_four(self):
        problem = quartic_problem_1d(1.0 / 3.0, 2.0, 10.0)
        x = np.linspace(0.0, 1.0, 2001)
        minus = x < 1.0 / 3.0
        errors = []
        for n in (32, 64):
            sol = solve(problem, uniform_grid(n, 1.0 / 3.0))
            values = np.concatenate([sol.value(x[minus], Side.MINUS), sol.value(x[~minus])])
            errors.append(np.max(np.abs(values - problem.u(x))))

        self.assertGreater(errors[0] / errors[1], 3.0)

    def test_given_reaction_when_assemble_then_matrix_is_symmetric_and_reduced(self):
        problem = quartic_problem_1d(0.3, 2.0, 10.0, q=1.0)

        matrix, rhs = assemble(problem, uniform_grid(12, 0.3))

        dense = matrix.to_dense()
        self.assertEqual(dense.shape, (11, 11))
        self.assertEqual(rhs.shape, (11,))
        self.assertLessEqual(np.max(np.abs(dense - dense.T)), 1e-14 * np.max(np.abs(dense)))

    def test_given_2d_problem_when_assemble_then_parameter_error_is_raised(self):
        with self.assertRaises(ParameterError):
            assemble(trig_problem_2d(), uniform_grid(8, 0.5))


class TestInterpolate(unittest.TestCase):
    def test_given_member_of_the_space_when_interpolated_then_it_is_reproduced(self):
        alpha = 0.41
        problem = linear_problem_1d(alpha, 3.0, 0.5)
        grid = uniform_grid(9, alpha)
        x = np.linspace(0.0, 1.0, 41)

        interpolant = interpolate(problem.u(grid.nodes), grid, problem.coefficient)

        minus = x < alpha
        self.assertTrue(np.allclose(interpolant.value(x[minus], Side.MINUS), problem.u(x[minus])))
        self.assertTrue(np.allclose(interpolant.value(x[~minus], Side.PLUS), problem.u(x[~minus])))
        self.assertAlmostEqual(interpolant.kappa, 1.0 / 3.0, places=12)

    def test_given_wrong_number_of_values_when_interpolate_then_parameter_error_is_raised(self):
        grid = uniform_grid(8, 0.5)

        with self.assertRaises(ParameterError):
            interpolate(np.zeros(8), grid, _coefficient(0.5, 1.0, 1.0))
