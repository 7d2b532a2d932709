# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Immersed finite element method on a uniform 1D grid.

The grid does not resolve the interface alpha. On the cut element
[x_j, x_{j+1}] the hat functions phi_j and phi_{j+1} are replaced by piecewise
linear functions with a breakpoint at alpha that satisfy [phi] = 0 and
[beta phi'] = 0, so every member of the space carries the jump conditions.

A member of the space is fixed by its nodal values: on the cut element the slope
left of alpha is kappa = (c_{j+1} - c_j) / D and the slope right of alpha is
rho * kappa, with rho = beta_1 / beta_2 and D = (alpha - x_j) + rho (x_{j+1} - alpha).
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import NamedTuple, Tuple

import numpy as np

from fluxfem.exceptions import (
    AmbiguousEvaluationError,
    DegenerateBasisError,
    ParameterError,
)
from fluxfem.numerics import SparseMatrix, gauss_interval, solve_spd
from fluxfem.problems import ManufacturedProblem, PiecewiseCoefficient, PointInterface, Side

logger = logging.getLogger(__name__)

QUADRATURE_POINTS = 4


class Limit(str, Enum):
    """Which one-sided limit to take when evaluating at a breakpoint."""

    LEFT = "left"
    RIGHT = "right"
    AUTO = "auto"


@dataclass(frozen=True)
class Grid1d:
    """Uniform grid x_i = i h on [0, 1] with an interface alpha.

    The interface element j satisfies x_j <= alpha < x_{j+1}.
    """

    n: int
    alpha: float

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError(f"Grid needs at least 2 elements, got {self.n}")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"Interface alpha must lie in (0, 1), got {self.alpha}")

    @property
    def h(self) -> float:
        """Returns the grid spacing."""
        return 1.0 / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        """Returns the n + 1 grid nodes."""
        return np.arange(self.n + 1) / self.n

    @cached_property
    def interface_element(self) -> int:
        """Returns j with x_j <= alpha < x_{j+1}."""
        j = min(int(np.floor(self.alpha * self.n)), self.n - 1)
        if self.nodes[j] > self.alpha:
            j -= 1
        elif self.nodes[j + 1] <= self.alpha:
            j += 1
        return j

    @cached_property
    def breakpoints(self) -> np.ndarray:
        """Returns the nodes together with alpha, sorted and without duplicates."""
        return np.unique(np.append(self.nodes, self.alpha))

    def pieces(self) -> "Pieces1d":
        """Returns the sub-intervals between consecutive breakpoints."""
        a, b = self.breakpoints[:-1], self.breakpoints[1:]
        midpoints = 0.5 * (a + b)
        element = np.minimum(np.floor(midpoints * self.n).astype(int), self.n - 1)
        return Pieces1d(a=a, b=b, minus=midpoints < self.alpha, element=element)


class Pieces1d(NamedTuple):
    """Sub-intervals of [0, 1] on which every member of the space is linear."""

    a: np.ndarray
    b: np.ndarray
    minus: np.ndarray
    element: np.ndarray

    def gauss(self, order: int = QUADRATURE_POINTS) -> Tuple[np.ndarray, np.ndarray]:
        """Returns quadrature points and weights, one row per piece."""
        rule = gauss_interval(order)
        length = (self.b - self.a)[:, np.newaxis]
        return self.a[:, np.newaxis] + length * rule.points, length * rule.weights

    def select(self, mask: np.ndarray) -> "Pieces1d":
        """Returns the pieces selected by a boolean mask."""
        return Pieces1d(self.a[mask], self.b[mask], self.minus[mask], self.element[mask])


def uniform_grid(n: int, alpha: float) -> Grid1d:
    """Returns the uniform grid with n elements for the interface alpha."""
    return Grid1d(n=n, alpha=alpha)


@dataclass(frozen=True)
class IfemBasis:
    """Interface-modified basis functions phi_j and phi_{j+1} on the cut element."""

    grid: Grid1d
    beta_minus: float
    beta_plus: float
    rho: float
    D: float

    @property
    def j(self) -> int:
        """Returns the index of the left node of the cut element."""
        return self.grid.interface_element

    def phi(self, node: int, x: np.ndarray, limit: Limit = Limit.RIGHT) -> np.ndarray:
        """Evaluates phi_j or phi_{j+1}.

        Args:
            node: j or j + 1.
            x: Evaluation points in [0, 1].
            limit: At alpha, which one-sided value to return.

        Returns:
            np.ndarray: Basis values.
        """
        j, h, alpha = self.j, self.grid.h, self.grid.alpha
        nodes = self.grid.nodes
        x = np.asarray(x, dtype=float)
        left = (x < alpha) | ((x == alpha) & (limit is Limit.LEFT))
        if node == j:
            values = np.where(
                left,
                (nodes[j] - x) / self.D + 1.0,
                self.rho * (nodes[j + 1] - x) / self.D,
            )
            outer = (x - nodes[j - 1]) / h if j > 0 else np.zeros_like(x)
            values = np.where(x < nodes[j], outer, values)
            return np.where((x < nodes[max(j - 1, 0)]) | (x >= nodes[j + 1]), 0.0, values)
        if node == j + 1:
            values = np.where(
                left,
                (x - nodes[j]) / self.D,
                self.rho * (x - nodes[j + 1]) / self.D + 1.0,
            )
            if j + 2 <= self.grid.n:
                values = np.where(x >= nodes[j + 1], (nodes[j + 2] - x) / h, values)
                outside = (x < nodes[j]) | (x > nodes[j + 2])
            else:
                values = np.where(x >= nodes[j + 1], 1.0, values)
                outside = x < nodes[j]
            return np.where(outside, 0.0, values)
        raise ParameterError(f"Only phi_{j} and phi_{j + 1} are modified, got node {node}")

    def slopes(self, side: Side) -> Tuple[float, float]:
        """Returns the slopes of (phi_j, phi_{j+1}) on one side of alpha in the cut element."""
        if side is Side.MINUS:
            return -1.0 / self.D, 1.0 / self.D
        return -self.rho / self.D, self.rho / self.D


def build_basis(grid: Grid1d, coeff: PiecewiseCoefficient) -> IfemBasis:
    """Builds the interface-modified basis on the cut element.

    Args:
        grid: Uniform grid.
        coeff: Piecewise coefficient; its interface must be the grid's alpha.

    Returns:
        IfemBasis: The modified basis parameters.
    """
    interface = coeff.interface
    if not isinstance(interface, PointInterface) or interface.alpha != grid.alpha:
        raise ParameterError("Coefficient interface does not match the grid's alpha")
    j = grid.interface_element
    rho = coeff.rho
    D = grid.h - (coeff.beta_plus - coeff.beta_minus) / coeff.beta_plus * (
        grid.nodes[j + 1] - grid.alpha
    )
    if D <= 0.0:
        raise DegenerateBasisError(f"Degenerate immersed basis: D = {D:.3e} <= 0")
    return IfemBasis(
        grid=grid, beta_minus=coeff.beta_minus, beta_plus=coeff.beta_plus, rho=rho, D=D
    )


@dataclass(frozen=True)
class Solution1d:
    """Member of the immersed finite element space.

    Stores all nodal values (boundary values included) and the value at alpha
    implied by the jump conditions.
    """

    grid: Grid1d
    basis: IfemBasis
    coefficients: np.ndarray

    @property
    def kappa(self) -> float:
        """Returns the slope left of alpha on the cut element."""
        j = self.basis.j
        return float((self.coefficients[j + 1] - self.coefficients[j]) / self.basis.D)

    @property
    def alpha_value(self) -> float:
        """Returns the value at alpha."""
        j = self.basis.j
        return float(self.coefficients[j] + self.kappa * (self.grid.alpha - self.grid.nodes[j]))

    @cached_property
    def _breakpoint_values(self) -> np.ndarray:
        points = self.grid.breakpoints
        values = np.interp(points, self.grid.nodes, self.coefficients)
        values[np.searchsorted(points, self.grid.alpha)] = self.alpha_value
        return values

    def _piece_index(self, x: np.ndarray, side: Side) -> np.ndarray:
        points = self.grid.breakpoints
        search_side = "left" if side is Side.MINUS else "right"
        index = np.searchsorted(points, x, side=search_side) - 1
        return np.clip(index, 0, points.size - 2)

    def value(self, x: np.ndarray, side: Side = Side.PLUS) -> np.ndarray:
        """Returns the function values; continuous, so `side` only selects the piece."""
        x = np.asarray(x, dtype=float)
        index = self._piece_index(x, side)
        points, values = self.grid.breakpoints, self._breakpoint_values
        slope = (values[index + 1] - values[index]) / (points[index + 1] - points[index])
        return values[index] + slope * (x - points[index])

    def derivative(self, x: np.ndarray, side: Side = Side.PLUS) -> np.ndarray:
        """Returns the slope of the piece containing x; MINUS takes left limits."""
        index = self._piece_index(np.asarray(x, dtype=float), side)
        points, values = self.grid.breakpoints, self._breakpoint_values
        return (values[index + 1] - values[index]) / (points[index + 1] - points[index])


@dataclass(frozen=True)
class ExactSolution1d:
    """Exact solution of a manufactured problem viewed through the grid's pieces."""

    problem: ManufacturedProblem
    grid: Grid1d

    def value(self, x: np.ndarray, side: Side = Side.PLUS) -> np.ndarray:
        """Returns the exact solution of the given side's branch."""
        return self.problem.solution(side, np.asarray(x, dtype=float))

    def derivative(self, x: np.ndarray, side: Side = Side.PLUS) -> np.ndarray:
        """Returns the exact derivative of the given side's branch."""
        return self.problem.gradient(side, np.asarray(x, dtype=float))


def interpolate(
    u_node_values: np.ndarray, grid: Grid1d, coeff: PiecewiseCoefficient
) -> Solution1d:
    """Returns the immersed interpolant pi_h u of nodal values.

    Args:
        u_node_values: u(x_i) for i = 0..n, from a function continuous at alpha.
        grid: Uniform grid.
        coeff: Piecewise coefficient.

    Returns:
        Solution1d: The interpolant, which satisfies [pi_h u] = 0 and [beta (pi_h u)'] = 0.
    """
    values = np.asarray(u_node_values, dtype=float)
    if values.shape != (grid.n + 1,):
        raise ParameterError(f"Expected {grid.n + 1} nodal values, got shape {values.shape}")
    j = grid.interface_element
    denominator = coeff.beta_plus * (grid.alpha - grid.nodes[j]) - coeff.beta_minus * (
        grid.alpha - grid.nodes[j + 1]
    )
    if denominator <= 0.0:
        raise DegenerateBasisError(f"Degenerate interpolation slope denominator {denominator:.3e}")
    return Solution1d(grid=grid, basis=build_basis(grid, coeff), coefficients=values.copy())


def _local_shapes(
    pieces: Pieces1d, grid: Grid1d, basis: IfemBasis
) -> Tuple[np.ndarray, np.ndarray]:
    """Returns values at the piece start and slopes of the two local basis functions."""
    count = pieces.a.size
    start = np.zeros((count, 2))
    slope = np.zeros((count, 2))
    start[:, 0], start[:, 1] = 1.0, 0.0
    slope[:, 0], slope[:, 1] = -1.0 / grid.h, 1.0 / grid.h
    j = basis.j
    for index in np.flatnonzero(pieces.element == j):
        side = Side.MINUS if pieces.minus[index] else Side.PLUS
        slope[index] = basis.slopes(side)
        if side is Side.PLUS:
            phi_j = basis.rho * (grid.nodes[j + 1] - pieces.a[index]) / basis.D
            start[index] = (phi_j, 1.0 - phi_j)
    return start, slope


def _assemble_full(problem: ManufacturedProblem, grid: Grid1d) -> Tuple[SparseMatrix, np.ndarray]:
    """Assembles the (n + 1) x (n + 1) matrix and load before boundary elimination."""
    basis = build_basis(grid, problem.coefficient)
    pieces = grid.pieces()
    start, slope = _local_shapes(pieces, grid, basis)
    points, weights = pieces.gauss()
    offsets = points - pieces.a[:, np.newaxis]
    shapes = start[:, :, np.newaxis] + slope[:, :, np.newaxis] * offsets[:, np.newaxis, :]
    beta = problem.coefficient.values(pieces.minus)
    length = pieces.b - pieces.a
    stiffness = (beta * length)[:, np.newaxis, np.newaxis] * (
        slope[:, :, np.newaxis] * slope[:, np.newaxis, :]
    )
    mass = problem.reaction * np.einsum("pg,pkg,plg->pkl", weights, shapes, shapes)
    source = np.where(
        pieces.minus[:, np.newaxis],
        problem.source(Side.MINUS, points),
        problem.source(Side.PLUS, points),
    )
    load = np.einsum("pg,pg,pkg->pk", weights, source, shapes)

    dofs = np.stack([pieces.element, pieces.element + 1], axis=1)
    matrix = SparseMatrix(grid.n + 1, grid.n + 1)
    matrix.add_triplets(
        np.repeat(dofs, 2, axis=1), np.tile(dofs, (1, 2)), (stiffness + mass).reshape(-1, 4)
    )
    rhs = np.zeros(grid.n + 1)
    np.add.at(rhs, dofs.ravel(), load.ravel())
    return matrix.finalize(), rhs


def _boundary_values(problem: ManufacturedProblem) -> Tuple[float, float]:
    return (
        float(problem.solution(Side.MINUS, np.array(0.0))),
        float(problem.solution(Side.PLUS, np.array(1.0))),
    )


def assemble(problem: ManufacturedProblem, grid: Grid1d) -> Tuple[SparseMatrix, np.ndarray]:
    """Assembles the Galerkin system a(u_h, phi_i) = (f, phi_i) on the interior nodes.

    Elements are integrated with 4-point Gauss rules; the cut element is split at
    alpha. Dirichlet values from the exact solution are lifted into the load.

    Args:
        problem: 1D manufactured problem.
        grid: Uniform grid whose alpha matches the problem's interface.

    Returns:
        Tuple of the (n - 1) x (n - 1) SPD matrix and the load vector.
    """
    if problem.dimension != 1:
        raise ParameterError(f"Expected a 1D problem, got dimension {problem.dimension}")
    full, rhs = _assemble_full(problem, grid)
    interior = np.arange(1, grid.n)
    left, right = _boundary_values(problem)
    lifting = full.csr[:, [0, grid.n]] @ np.array([left, right])
    matrix = full.submatrix(interior, interior)
    logger.debug(
        "Assembled 1D system with %d unknowns (interface element %d)",
        grid.n - 1,
        grid.interface_element,
    )
    return matrix, (rhs - lifting)[interior]


def solve(problem: ManufacturedProblem, grid: Grid1d) -> Solution1d:
    """Computes the Galerkin solution u_h in the immersed finite element space."""
    matrix, rhs = assemble(problem, grid)
    interior = solve_spd(matrix, rhs)
    left, right = _boundary_values(problem)
    coefficients = np.concatenate([[left], interior, [right]])
    logger.info(
        "Solved 1D interface problem %s with N=%d, residual %.3e",
        problem.name,
        grid.n,
        np.linalg.norm(matrix @ interior - rhs),
    )
    return Solution1d(
        grid=grid, basis=build_basis(grid, problem.coefficient), coefficients=coefficients
    )


def _resolve_side(sol: Solution1d, x: float, side: str) -> Side:
    limit = Limit(side)
    if not 0.0 <= x <= 1.0:
        raise ParameterError(f"Evaluation point {x} is outside [0, 1]")
    if limit is Limit.AUTO:
        if x == sol.grid.alpha:
            raise AmbiguousEvaluationError(
                "Evaluation at the interface needs an explicit side ('left' or 'right')"
            )
        return Side.PLUS
    return Side.MINUS if limit is Limit.LEFT else Side.PLUS


def evaluate(sol: Solution1d, x: float, side: str = "auto") -> float:
    """Evaluates a solution at x; at alpha, `side` picks the one-sided limit."""
    return float(sol.value(np.array(x), _resolve_side(sol, x, side)))


def evaluate_derivative(sol: Solution1d, x: float, side: str = "auto") -> float:
    """Returns the slope of the piece containing x; at alpha, `side` picks the piece."""
    return float(sol.derivative(np.array(x), _resolve_side(sol, x, side)))
