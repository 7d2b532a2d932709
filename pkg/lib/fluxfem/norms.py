# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Error norms of computed solutions against manufactured exact solutions."""

import logging
from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, NonNegativeFloat

from fluxfem.exceptions import ParameterError
from fluxfem.fem2d import SIDES, Solution2d, evaluate_sides
from fluxfem.flux1d import Field1d, recover_fluxes
from fluxfem.ifem1d import Grid1d, Solution1d, interpolate
from fluxfem.mesh2d import TubeRegion, chord_quadrature, element_quadrature, extract_tube
from fluxfem.problems import CircleInterface, ManufacturedProblem, Side

logger = logging.getLogger(__name__)


class ErrorReport(BaseModel):
    """Nonnegative error quantities of one solve; quantities not measured are None.

    1D: `linf` is sampled over every piece, `linf_nodal` over the grid nodes;
    `deriv_*` compare the flux-recovered one-sided derivatives at alpha and
    `deriv_*_raw` the slopes of u_h itself; `flux_*` compare the four flux
    functionals with the exact fluxes; `interp_*` and `kappa_*` describe the
    immersed interpolant.

    2D: `flux_tube` is the L2 error of v_h against -beta grad u over the tube,
    `interface_flux` the L2 error of v_h . n over the interface; the `_raw`
    variants use -beta grad u_h instead of v_h.
    """

    model_config = ConfigDict(frozen=True)

    linf: Optional[NonNegativeFloat] = None
    linf_nodal: Optional[NonNegativeFloat] = None
    l2: Optional[NonNegativeFloat] = None
    h1_semi: Optional[NonNegativeFloat] = None
    deriv_minus: Optional[NonNegativeFloat] = None
    deriv_plus: Optional[NonNegativeFloat] = None
    deriv_minus_raw: Optional[NonNegativeFloat] = None
    deriv_plus_raw: Optional[NonNegativeFloat] = None
    flux_minus: Optional[NonNegativeFloat] = None
    flux_plus: Optional[NonNegativeFloat] = None
    flux_0: Optional[NonNegativeFloat] = None
    flux_1: Optional[NonNegativeFloat] = None
    interp_l2: Optional[NonNegativeFloat] = None
    interp_h1: Optional[NonNegativeFloat] = None
    kappa_minus: Optional[NonNegativeFloat] = None
    kappa_plus: Optional[NonNegativeFloat] = None
    flux_tube: Optional[NonNegativeFloat] = None
    flux_tube_raw: Optional[NonNegativeFloat] = None
    interface_flux: Optional[NonNegativeFloat] = None
    interface_flux_minus: Optional[NonNegativeFloat] = None
    interface_flux_plus: Optional[NonNegativeFloat] = None
    interface_flux_raw: Optional[NonNegativeFloat] = None

    def as_dict(self) -> Dict[str, float]:
        """Returns the measured quantities only."""
        return self.model_dump(exclude_none=True)


def _check_dimension(problem: ManufacturedProblem, dimension: int) -> None:
    if problem.dimension != dimension:
        raise ParameterError(
            f"Expected a {dimension}D problem, got {problem.name} ({problem.dimension}D)"
        )


def _field_errors_1d(field: Field1d, problem: ManufacturedProblem) -> Tuple[float, float, float]:
    """Returns (sampled max, L2, H1 seminorm) of field - u over the grid's pieces."""
    pieces = field.grid.pieces()
    points, weights = pieces.gauss()
    linf = l2 = h1 = 0.0
    for side in SIDES:
        mask = pieces.minus if side is Side.MINUS else ~pieces.minus
        if not np.any(mask):
            continue
        x, w = points[mask], weights[mask]
        error = field.value(x, side) - problem.solution(side, x)
        slope_error = field.derivative(x, side) - problem.gradient(side, x)
        l2 += float(np.sum(w * error**2))
        h1 += float(np.sum(w * slope_error**2))
        ends = np.concatenate([pieces.a[mask], pieces.b[mask]])
        end_error = field.value(ends, side) - problem.solution(side, ends)
        linf = max(linf, float(np.max(np.abs(error))), float(np.max(np.abs(end_error))))
    return linf, float(np.sqrt(l2)), float(np.sqrt(h1))


def error_norms_1d(sol: Solution1d, problem: ManufacturedProblem) -> ErrorReport:
    """Measures a 1D Galerkin solution.

    Args:
        sol: The immersed finite element solution.
        problem: The manufactured problem it approximates.

    Returns:
        ErrorReport: Solution norms, derivative errors at alpha and flux functional errors.
    """
    _check_dimension(problem, 1)
    alpha = problem.interface.alpha
    coefficient = problem.coefficient
    linf, l2, h1 = _field_errors_1d(sol, problem)
    nodes = sol.grid.nodes
    linf_nodal = float(np.max(np.abs(sol.coefficients - problem.u(nodes))))
    exact_minus = float(problem.gradient(Side.MINUS, np.array(alpha)))
    exact_plus = float(problem.gradient(Side.PLUS, np.array(alpha)))
    exact_0 = float(problem.gradient(Side.MINUS, np.array(0.0)))
    exact_1 = float(problem.gradient(Side.PLUS, np.array(1.0)))
    fluxes = recover_fluxes(sol, problem)
    return ErrorReport(
        linf=linf,
        linf_nodal=linf_nodal,
        l2=l2,
        h1_semi=h1,
        deriv_minus=abs(fluxes.derivative_minus - exact_minus),
        deriv_plus=abs(fluxes.derivative_plus - exact_plus),
        deriv_minus_raw=abs(float(sol.derivative(np.array(alpha), Side.MINUS)) - exact_minus),
        deriv_plus_raw=abs(float(sol.derivative(np.array(alpha), Side.PLUS)) - exact_plus),
        flux_minus=abs(fluxes.gamma_minus - coefficient.beta_minus * exact_minus),
        flux_plus=abs(fluxes.gamma_plus + coefficient.beta_plus * exact_plus),
        flux_0=abs(fluxes.gamma_0 + coefficient.beta_minus * exact_0),
        flux_1=abs(fluxes.gamma_1 - coefficient.beta_plus * exact_1),
    )


def interpolation_errors_1d(problem: ManufacturedProblem, grid: Grid1d) -> ErrorReport:
    """Measures the immersed interpolant of the exact solution.

    `kappa_minus` compares the interpolant's slope left of alpha with u_x^-(alpha)
    and `kappa_plus` its slope right of alpha with u_x^+(alpha).
    """
    _check_dimension(problem, 1)
    interpolant = interpolate(problem.u(grid.nodes), grid, problem.coefficient)
    linf, l2, h1 = _field_errors_1d(interpolant, problem)
    alpha = np.array(grid.alpha)
    kappa = interpolant.kappa
    return ErrorReport(
        linf=linf,
        interp_l2=l2,
        interp_h1=h1,
        kappa_minus=abs(kappa - float(problem.gradient(Side.MINUS, alpha))),
        kappa_plus=abs(
            problem.coefficient.rho * kappa - float(problem.gradient(Side.PLUS, alpha))
        ),
    )


def _tube_flux_errors(
    sol: Solution2d, problem: ManufacturedProblem, tube: TubeRegion
) -> Tuple[float, float]:
    """Returns the L2 errors over the tube of v_h and of -beta grad u_h.

    Cut tube triangles are split per side, each piece measured against its side.
    """
    tube_quadrature = element_quadrature(sol.mesh, problem.interface, tube.elements)
    recovered = raw = 0.0
    for side in SIDES:
        quadrature = tube_quadrature.select(tube_quadrature.minus == (side is Side.MINUS))
        if quadrature.weights.size == 0:
            continue
        x, y = quadrature.points[:, 0], quadrature.points[:, 1]
        exact = -problem.flux(side, x, y)
        v_h = sol.flux(side, quadrature.triangles, quadrature.points)
        gradient_flux = sol.gradient_flux(side, quadrature.triangles)
        recovered += float(np.sum(quadrature.weights * np.sum((v_h - exact) ** 2, axis=1)))
        raw += float(np.sum(quadrature.weights * np.sum((gradient_flux - exact) ** 2, axis=1)))
    return float(np.sqrt(recovered)), float(np.sqrt(raw))


def _interface_flux_errors(
    sol: Solution2d, problem: ManufacturedProblem
) -> Tuple[Dict[Side, float], float]:
    """Returns per-side L2 errors of v_h . n over the chords, and the raw combined error."""
    chords = chord_quadrature(sol.mesh, problem.interface)
    errors: Dict[Side, float] = {}
    raw = 0.0
    for side in SIDES:
        x, y = chords.projected[:, 0], chords.projected[:, 1]
        exact = np.sum(-problem.flux(side, x, y) * chords.normals, axis=1)
        v_h = sol.flux(side, chords.triangles, chords.projected)
        v_normal = np.sum(v_h * chords.normals, axis=1)
        gradient_normal = np.sum(
            sol.gradient_flux(side, chords.triangles) * chords.normals, axis=1
        )
        errors[side] = float(np.sqrt(np.sum(chords.weights * (v_normal - exact) ** 2)))
        raw += float(np.sum(chords.weights * (gradient_normal - exact) ** 2))
    return errors, float(np.sqrt(raw))


def error_norms_2d(
    sol: Solution2d, problem: ManufacturedProblem, tube: Optional[TubeRegion] = None
) -> ErrorReport:
    """Measures a 2D solution.

    Args:
        sol: Augmented or standard solution.
        problem: The manufactured problem it approximates.
        tube: Region for the tube flux error of standard solutions; defaults to
            the solution's own tube, or to a tube of width 3h.

    Returns:
        ErrorReport: Domain norms of u, tube and interface flux errors.
    """
    _check_dimension(problem, 2)
    interface = problem.interface
    if not isinstance(interface, CircleInterface):
        raise ParameterError("2D error norms need a circular interface")
    mesh = sol.mesh
    quadrature = element_quadrature(mesh, interface)
    exact = evaluate_sides(problem.solution, quadrature.minus, quadrature.points)
    exact_gradient = evaluate_sides(problem.gradient, quadrature.minus, quadrature.points)
    error = sol.value(quadrature.triangles, quadrature.bary) - exact
    gradient_error = sol.gradient(quadrature.triangles) - exact_gradient
    l2 = float(np.sqrt(np.sum(quadrature.weights * error**2)))
    h1 = float(np.sqrt(np.sum(quadrature.weights * np.sum(gradient_error**2, axis=1))))
    linf_nodal = float(np.max(np.abs(sol.u - problem.u(mesh.nodes[:, 0], mesh.nodes[:, 1]))))
    region = sol.tube or tube or extract_tube(mesh, interface)
    flux_tube, flux_tube_raw = _tube_flux_errors(sol, problem, region)
    values = dict(
        linf_nodal=linf_nodal,
        l2=l2,
        h1_semi=h1,
        flux_tube=flux_tube,
        flux_tube_raw=flux_tube_raw,
    )
    if not interface.is_degenerate:
        per_side, raw = _interface_flux_errors(sol, problem)
        values.update(
            interface_flux=float(np.hypot(per_side[Side.MINUS], per_side[Side.PLUS])),
            interface_flux_minus=per_side[Side.MINUS],
            interface_flux_plus=per_side[Side.PLUS],
            interface_flux_raw=raw,
        )
    logger.debug("2D errors at N = %d: %s", mesh.N, values)
    return ErrorReport(**values)
