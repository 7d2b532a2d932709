# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

import math
import unittest
from math import factorial
from typing import Any

import numpy as np
from scipy import sparse

from fluxfem.exceptions import (
    DimensionError,
    NotSPDError,
    ParameterError,
    RankDeficientError,
)
from fluxfem.numerics import (
    DENSE_SVD_MAX_COLUMNS,
    LEAST_SQUARES_METHODS,
    SparseMatrix,
    gauss_interval,
    solve_least_squares,
    solve_spd,
    triangle_rule,
)

REFERENCE_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


class TestSparseMatrix(unittest.TestCase):
    def test_given_duplicate_triplets_when_finalize_then_values_are_summed(self):
        matrix = SparseMatrix(2, 3)
        matrix.add(0, 0, 1.0)
        matrix.add(0, 0, 2.0)

        matrix.finalize()

        columns, values = matrix.row_entries(0)
        self.assertEqual(columns.tolist(), [0])
        self.assertEqual(values.tolist(), [3.0])

    def test_given_explicit_zero_when_finalize_then_it_is_not_stored(self):
        matrix = SparseMatrix(2, 2)
        matrix.add(0, 1, 0.0)
        matrix.add(1, 1, 1.0)
        matrix.add(1, 1, -1.0)

        matrix.finalize()

        self.assertEqual(matrix.csr.nnz, 0)

    def test_given_unsorted_columns_when_finalize_then_row_columns_are_increasing(self):
        matrix = SparseMatrix(1, 5)
        matrix.add_triplets([0, 0, 0], [4, 0, 2], [1.0, 2.0, 3.0])

        matrix.finalize()

        columns, values = matrix.row_entries(0)
        self.assertEqual(columns.tolist(), [0, 2, 4])
        self.assertEqual(values.tolist(), [2.0, 3.0, 1.0])

    def test_given_finalized_matrix_when_add_then_runtime_error_is_raised(self):
        matrix = SparseMatrix(1, 1).finalize()

        with self.assertRaises(RuntimeError):
            matrix.add(0, 0, 1.0)

    def test_given_unfinalized_matrix_when_csr_then_runtime_error_is_raised(self):
        matrix = SparseMatrix(1, 1)

        with self.assertRaises(RuntimeError):
            matrix.csr

    def test_given_index_out_of_range_when_add_then_dimension_error_is_raised(self):
        matrix = SparseMatrix(2, 2)

        with self.assertRaises(DimensionError):
            matrix.add(2, 0, 1.0)

    def test_given_dense_block_when_add_block_then_entries_are_scattered(self):
        matrix = SparseMatrix(3, 3)
        matrix.add_block([0, 2], [1, 2], np.array([[1.0, 2.0], [3.0, 4.0]]))

        dense = matrix.finalize().to_dense()

        self.assertTrue(
            np.array_equal(dense, np.array([[0.0, 1.0, 2.0], [0.0, 0.0, 0.0], [0.0, 3.0, 4.0]]))
        )

    def test_given_matrix_when_submatrix_then_rows_and_columns_are_selected(self):
        matrix = SparseMatrix.from_dense(np.arange(9.0).reshape(3, 3))

        sub = matrix.submatrix([0, 2], [1, 2])

        self.assertTrue(np.array_equal(sub.to_dense(), np.array([[1.0, 2.0], [7.0, 8.0]])))


class TestSolveSpd(unittest.TestCase):
    def test_given_identity_when_solve_spd_then_rhs_is_returned(self):
        x = solve_spd(SparseMatrix.from_dense(np.eye(2)), np.array([3.0, 4.0]))

        self.assertTrue(np.allclose(x, [3.0, 4.0], rtol=0.0, atol=1e-14))

    def test_given_symmetric_system_when_solve_spd_then_forced_solution_is_returned(self):
        matrix = SparseMatrix.from_dense([[2.0, 1.0], [1.0, 2.0]])

        x = solve_spd(matrix, np.array([3.0, 3.0]))

        self.assertTrue(np.allclose(x, [1.0, 1.0], rtol=0.0, atol=1e-14))

    def test_given_random_spd_matrix_when_solve_spd_then_known_solution_is_recovered(self):
        rng = np.random.default_rng(7)
        m = rng.standard_normal((50, 50))
        a = m.T @ m + np.eye(50)
        expected = rng.standard_normal(50)

        x = solve_spd(SparseMatrix.from_dense(a), a @ expected)

        self.assertTrue(np.allclose(x, expected, rtol=0.0, atol=1e-8))
        residual = np.linalg.norm(a @ x - a @ expected)
        scale = np.linalg.norm(a, "fro") * np.linalg.norm(x) + np.linalg.norm(a @ expected)
        self.assertLessEqual(residual, 1e-10 * scale)

    def test_given_same_input_when_solve_spd_twice_then_results_are_identical(self):
        matrix = SparseMatrix.from_dense([[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]])
        b = np.array([1.0, 2.0, 3.0])

        self.assertTrue(np.array_equal(solve_spd(matrix, b), solve_spd(matrix, b)))

    def test_given_rectangular_matrix_when_solve_spd_then_dimension_error_is_raised(self):
        with self.assertRaises(DimensionError):
            solve_spd(SparseMatrix.from_dense([[1.0, 0.0]]), np.array([1.0]))

    def test_given_wrong_rhs_length_when_solve_spd_then_dimension_error_is_raised(self):
        with self.assertRaises(DimensionError):
            solve_spd(SparseMatrix.from_dense(np.eye(2)), np.ones(3))

    def test_given_non_symmetric_matrix_when_solve_spd_then_not_spd_error_is_raised(self):
        with self.assertRaises(NotSPDError):
            solve_spd(SparseMatrix.from_dense([[2.0, 1.0], [0.0, 2.0]]), np.ones(2))

    def test_given_indefinite_matrix_when_solve_spd_then_not_spd_error_is_raised(self):
        with self.assertRaises(NotSPDError):
            solve_spd(SparseMatrix.from_dense([[1.0, 2.0], [2.0, 1.0]]), np.ones(2))


class TestSolveLeastSquares(unittest.TestCase):
    def test_given_two_observations_when_solve_least_squares_then_mean_is_returned(self):
        matrix = SparseMatrix.from_dense([[1.0], [1.0]])

        for method in LEAST_SQUARES_METHODS:
            with self.subTest(method=method):
                x = solve_least_squares(matrix, np.array([0.0, 2.0]), method)
                self.assertAlmostEqual(float(x[0]), 1.0, places=8)

    def test_given_line_fit_with_outlier_when_solve_least_squares_then_normal_equations_agree(
        self,
    ):
        x_values = np.arange(6.0)
        y_values = 2.0 * x_values + 1.0
        y_values[5] = 20.0
        a = np.column_stack([x_values, np.ones(6)])
        expected = np.linalg.solve(a.T @ a, a.T @ y_values)

        for method in LEAST_SQUARES_METHODS:
            with self.subTest(method=method):
                x = solve_least_squares(SparseMatrix.from_dense(a), y_values, method)
                self.assertTrue(np.allclose(x, expected, rtol=1e-6, atol=0.0))

    def test_given_square_system_when_solve_least_squares_then_spd_route_agrees(self):
        a = np.array([[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]])
        b = np.array([1.0, -2.0, 0.5])
        expected = solve_spd(SparseMatrix.from_dense(a), b)

        x = solve_least_squares(SparseMatrix.from_dense(a), b, "sparse-qr")

        self.assertTrue(np.allclose(x, expected, rtol=0.0, atol=1e-8))

    def test_given_random_overdetermined_system_when_solved_then_normal_residual_is_small(self):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((30, 8))
        b = rng.standard_normal(30)
        solutions = {}

        for method in LEAST_SQUARES_METHODS:
            with self.subTest(method=method):
                x = solve_least_squares(SparseMatrix.from_dense(a), b, method)
                normal_residual = np.linalg.norm(a.T @ (a @ x - b))
                self.assertLessEqual(normal_residual, 1e-8 * np.linalg.norm(a.T @ b))
                solutions[method] = x

        self.assertTrue(np.allclose(solutions["svd"], solutions["sparse-qr"], rtol=1e-6))
        self.assertTrue(np.allclose(solutions["svd"], solutions["normal-cg"], rtol=1e-6))

    def test_given_same_input_when_solved_twice_then_results_are_identical(self):
        rng = np.random.default_rng(3)
        matrix = SparseMatrix.from_dense(rng.standard_normal((12, 4)))
        b = rng.standard_normal(12)

        for method in LEAST_SQUARES_METHODS:
            with self.subTest(method=method):
                first = solve_least_squares(matrix, b, method)
                second = solve_least_squares(matrix, b, method)
                self.assertTrue(np.array_equal(first, second))

    def test_given_duplicate_columns_when_solve_least_squares_then_rank_deficiency_is_reported(
        self,
    ):
        matrix = SparseMatrix.from_dense(np.ones((3, 2)))

        for method in ("svd", "sparse-qr"):
            with self.subTest(method=method):
                with self.assertRaises(RankDeficientError) as context:
                    solve_least_squares(matrix, np.ones(3), method)
                self.assertIn("rank deficient", str(context.exception))

    def test_given_zero_column_when_solve_normal_cg_then_rank_deficiency_is_reported(self):
        matrix = SparseMatrix.from_dense([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])

        with self.assertRaises(RankDeficientError) as context:
            solve_least_squares(matrix, np.ones(3), "normal-cg")

        self.assertEqual(context.exception.ratio, 0.0)

    def test_given_more_columns_than_rows_when_solve_least_squares_then_dimension_error(self):
        with self.assertRaises(DimensionError):
            solve_least_squares(SparseMatrix.from_dense([[1.0, 2.0]]), np.ones(1))

    def test_given_unknown_method_when_solve_least_squares_then_parameter_error_is_raised(self):
        method: Any = "qr"

        with self.assertRaises(ParameterError):
            solve_least_squares(SparseMatrix.from_dense([[1.0]]), np.ones(1), method)

    def test_given_too_many_columns_when_solve_with_svd_then_parameter_error_is_raised(self):
        size = DENSE_SVD_MAX_COLUMNS + 1
        matrix = SparseMatrix.from_csr(sparse.identity(size, format="csr"))

        with self.assertRaises(ParameterError):
            solve_least_squares(matrix, np.ones(size), "svd")


class TestGaussInterval(unittest.TestCase):
    def test_given_two_points_when_integrating_cubic_then_result_is_exact(self):
        rule = gauss_interval(2)

        self.assertAlmostEqual(rule.integrate_interval(lambda x: x**3, 0.0, 1.0), 0.25, places=14)

    def test_given_one_point_when_integrating_constant_then_result_is_one(self):
        rule = gauss_interval(1)

        self.assertAlmostEqual(rule.integrate_interval(np.ones_like, 0.0, 1.0), 1.0, places=14)

    def test_given_five_points_when_integrating_sine_then_antiderivative_agrees(self):
        rule = gauss_interval(5)

        integral = rule.integrate_interval(np.sin, 0.0, 1.0)

        self.assertAlmostEqual(integral, 1.0 - math.cos(1.0), delta=1e-12)

    def test_given_every_order_when_integrating_monomials_then_exact_up_to_degree_2k_minus_1(
        self,
    ):
        for order in range(1, 11):
            rule = gauss_interval(order)
            self.assertTrue(np.all(rule.weights > 0.0))
            self.assertEqual(rule.dimension, 1)
            for degree in range(2 * order):
                with self.subTest(order=order, degree=degree):
                    integral = rule.integrate_interval(lambda x: x**degree, 0.0, 1.0)
                    self.assertAlmostEqual(integral * (degree + 1), 1.0, delta=1e-13)

    def test_given_order_out_of_range_when_gauss_interval_then_parameter_error_is_raised(self):
        for order in (0, 11):
            with self.subTest(order=order):
                with self.assertRaises(ParameterError):
                    gauss_interval(order)


class TestTriangleRule(unittest.TestCase):
    @staticmethod
    def _integrate(order: int, func) -> float:
        points, weights = triangle_rule(order).map_to_triangle(REFERENCE_TRIANGLE)
        return float(np.dot(weights, func(points[:, 0], points[:, 1])))

    def test_given_order_one_when_integrating_constant_then_reference_area_is_returned(self):
        self.assertAlmostEqual(self._integrate(1, lambda x, y: np.ones_like(x)), 0.5, places=14)

    def test_given_order_two_when_integrating_x_plus_y_then_result_is_one_third(self):
        self.assertAlmostEqual(self._integrate(2, lambda x, y: x + y), 1.0 / 3.0, places=14)

    def test_given_order_three_when_integrating_x_squared_y_then_result_is_one_sixtieth(self):
        self.assertAlmostEqual(self._integrate(3, lambda x, y: x**2 * y), 1.0 / 60.0, places=13)

    def test_given_every_order_when_integrating_monomials_then_exact_up_to_the_order(self):
        for order in range(1, 5):
            rule = triangle_rule(order)
            self.assertTrue(np.all(rule.weights > 0.0))
            self.assertAlmostEqual(float(rule.weights.sum()), 0.5, delta=1e-14)
            self.assertEqual(rule.dimension, 2)
            for a in range(order + 1):
                for b in range(order + 1 - a):
                    with self.subTest(order=order, a=a, b=b):
                        expected = factorial(a) * factorial(b) / factorial(a + b + 2)
                        integral = self._integrate(order, lambda x, y: x**a * y**b)
                        self.assertAlmostEqual(integral, expected, delta=1e-13)

    def test_given_unsupported_order_when_triangle_rule_then_parameter_error_is_raised(self):
        with self.assertRaises(ParameterError):
            triangle_rule(5)
