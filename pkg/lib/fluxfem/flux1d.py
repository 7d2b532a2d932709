# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Postprocessed flux functionals for the 1D interface problem.

Each functional is a weighted residual of the Galerkin solution. Integrating
-(beta u')' + q u = f against the weights 1, x and 1 - x gives identities that
hold exactly for the true solution, so evaluating them with u_h recovers the
one-sided fluxes at alpha and at the boundary to second order:

    Gamma_alpha^- = ((beta u_h', 1) + (q u_h - f, x))_(0, alpha) / alpha
    Gamma_alpha^+ = ((beta u_h', -1) + (q u_h - f, 1 - x))_(alpha, 1) / (1 - alpha)
    Gamma_0 = (beta u_h', -1) + (q u_h - f, 1 - x)
    Gamma_1 = (beta u_h', 1) + (q u_h - f, x)

Gamma_alpha^- approximates beta_1 u_x^-(alpha), Gamma_alpha^+ approximates
-beta_2 u_x^+(alpha), Gamma_0 approximates -beta_1 u'(0) and Gamma_1 approximates
beta_2 u'(1).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Protocol, Tuple, Union

import numpy as np

from fluxfem.exceptions import ParameterError
from fluxfem.ifem1d import ExactSolution1d, Pieces1d, Solution1d
from fluxfem.problems import ManufacturedProblem, Side

logger = logging.getLogger(__name__)


class PiecewiseField(Protocol):
    """Anything that can be evaluated branch-wise on the grid's pieces."""

    grid: object

    def value(self, x: np.ndarray, side: Side = Side.PLUS) -> np.ndarray:
        """Returns the values of the side's branch."""

    def derivative(self, x: np.ndarray, side: Side = Side.PLUS) -> np.ndarray:
        """Returns the derivatives of the side's branch."""


Field1d = Union[Solution1d, ExactSolution1d]


@dataclass(frozen=True)
class FluxReport1d:
    """Recovered fluxes and the one-sided derivatives they imply."""

    gamma_minus: float
    gamma_plus: float
    gamma_0: float
    gamma_1: float
    beta_minus: float
    beta_plus: float

    @property
    def derivative_minus(self) -> float:
        """Returns the recovered u_x^-(alpha)."""
        return self.gamma_minus / self.beta_minus

    @property
    def derivative_plus(self) -> float:
        """Returns the recovered u_x^+(alpha)."""
        return -self.gamma_plus / self.beta_plus

    @property
    def derivative_0(self) -> float:
        """Returns the recovered u'(0)."""
        return -self.gamma_0 / self.beta_minus

    @property
    def derivative_1(self) -> float:
        """Returns the recovered u'(1)."""
        return self.gamma_1 / self.beta_plus


def _weighted_residual(
    field: PiecewiseField,
    problem: ManufacturedProblem,
    pieces: Pieces1d,
    flux_weight: float,
    weight: Callable[[np.ndarray], np.ndarray],
) -> float:
    """Returns (beta u', flux_weight) + (q u - f, weight) over the given pieces."""
    if pieces.a.size == 0:
        return 0.0
    points, weights = pieces.gauss()
    total = 0.0
    for side in (Side.MINUS, Side.PLUS):
        mask = pieces.minus if side is Side.MINUS else ~pieces.minus
        if not np.any(mask):
            continue
        x, w = points[mask], weights[mask]
        beta = problem.coefficient.beta(side)
        residual = problem.reaction * field.value(x, side) - problem.source(side, x)
        flux = beta * flux_weight * field.derivative(x, side)
        total += np.sum(w * (flux + residual * weight(x)))
    return float(total)


def _pieces(field: PiecewiseField, problem: ManufacturedProblem) -> Tuple[Pieces1d, float]:
    if problem.dimension != 1:
        raise ParameterError(f"Flux functionals need a 1D problem, got {problem.dimension}D")
    alpha = problem.interface.alpha
    if alpha <= 0.0:
        raise ParameterError(f"Interface alpha must be positive, got {alpha}")
    return field.grid.pieces(), alpha


def flux_left(sol: Field1d, problem: ManufacturedProblem) -> float:
    """Returns Gamma_alpha^-, an O(h^2) approximation of beta_1 u_x^-(alpha)."""
    pieces, alpha = _pieces(sol, problem)
    integral = _weighted_residual(sol, problem, pieces.select(pieces.minus), 1.0, lambda x: x)
    return integral / alpha


def flux_right(sol: Field1d, problem: ManufacturedProblem) -> float:
    """Returns Gamma_alpha^+, an O(h^2) approximation of -beta_2 u_x^+(alpha)."""
    pieces, alpha = _pieces(sol, problem)
    integral = _weighted_residual(
        sol, problem, pieces.select(~pieces.minus), -1.0, lambda x: 1.0 - x
    )
    return integral / (1.0 - alpha)


def flux_boundaries(sol: Field1d, problem: ManufacturedProblem) -> Tuple[float, float]:
    """Returns (Gamma_0, Gamma_1), approximations of -beta_1 u'(0) and beta_2 u'(1)."""
    pieces, _ = _pieces(sol, problem)
    gamma_0 = _weighted_residual(sol, problem, pieces, -1.0, lambda x: 1.0 - x)
    gamma_1 = _weighted_residual(sol, problem, pieces, 1.0, lambda x: x)
    return gamma_0, gamma_1


def recover_fluxes(sol: Field1d, problem: ManufacturedProblem) -> FluxReport1d:
    """Evaluates all four flux functionals.

    Args:
        sol: Galerkin solution, or the exact solution for consistency checks.
        problem: The manufactured problem the solution belongs to.

    Returns:
        FluxReport1d: Raw functionals and beta-normalized derivatives.
    """
    gamma_0, gamma_1 = flux_boundaries(sol, problem)
    report = FluxReport1d(
        gamma_minus=flux_left(sol, problem),
        gamma_plus=flux_right(sol, problem),
        gamma_0=gamma_0,
        gamma_1=gamma_1,
        beta_minus=problem.coefficient.beta_minus,
        beta_plus=problem.coefficient.beta_plus,
    )
    logger.debug("Recovered fluxes %s", report)
    return report
