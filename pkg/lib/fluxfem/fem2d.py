# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""P1 finite elements on a uniform triangulation with flux unknowns near the interface.

The standard Galerkin equations for u are augmented, inside the tube around the
interface, with nodal flux unknowns v and two extra weak equations:

    (beta grad u, g) + (v, g) = 0           for every P1 test function g
    (div v, w) + (q u, w) = (f, w)          for every element indicator w

Flux unknowns live on the nodes of the uncut tube triangles. Minus and plus
triangles share no node, so each flux node carries the flux of its own side;
inside a cut triangle a side's flux is the linear field of the nearest
triangle of that side, extended across.

Cut triangles enter the Galerkin rows through a laminate coefficient: the
arithmetic mean of beta along the chord, the harmonic mean across it, and a
load correction carrying the flux jump.

Columns are ordered as free u nodes, then v by flux node and component.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Literal, NamedTuple, Optional, Tuple

import numpy as np
from scipy import sparse

from fluxfem.exceptions import EmptyTubeError, GeometryError, ParameterError, RankDeficientError
from fluxfem.mesh2d import (
    ElementTag,
    TriMesh,
    TubeRegion,
    chord_quadrature,
    cut_triangles,
    element_quadrature,
    element_tags,
    whole_element_quadrature,
)
from fluxfem.numerics import (
    LeastSquaresMethod,
    SparseMatrix,
    gauss_interval,
    solve_least_squares,
    solve_spd,
)
from fluxfem.problems import CircleInterface, ManufacturedProblem, Side

logger = logging.getLogger(__name__)

SIDES = (Side.MINUS, Side.PLUS)
DEFAULT_FLUX_SAMPLES = 64
NUDGE_FRACTION = 0.01

Coupling = Literal["constrained", "unweighted"]
COUPLINGS: Tuple[str, ...] = ("constrained", "unweighted")


def _circle(problem: ManufacturedProblem) -> CircleInterface:
    if problem.dimension != 2 or not isinstance(problem.interface, CircleInterface):
        raise ParameterError(f"Problem {problem.name} is not a 2D circular interface problem")
    return problem.interface


def evaluate_sides(
    func: Callable[..., np.ndarray], minus: np.ndarray, points: np.ndarray
) -> np.ndarray:
    """Evaluates a per-side callable, choosing the branch from an explicit side mask."""
    x, y = points[:, 0], points[:, 1]
    value_minus = func(Side.MINUS, x, y)
    value_plus = func(Side.PLUS, x, y)
    mask = minus[:, np.newaxis] if np.ndim(value_minus) > 1 else minus
    return np.where(mask, value_minus, value_plus)


class FluxLayout:
    """Placement of the flux unknowns after the free u columns.

    `nodes` are the sorted flux nodes and `minus` marks those of the minus side.
    """

    def __init__(self, mesh: TriMesh, tube: Optional[TubeRegion]):
        if tube is None:
            self.nodes = np.zeros(0, dtype=np.int64)
            self.minus = np.zeros(0, dtype=bool)
        else:
            self.nodes = tube.nodes(mesh)
            self.minus = np.isin(self.nodes, tube.nodes(mesh, Side.MINUS))
        self.n_columns = 2 * self.nodes.size

    def side_mask(self, side: Side) -> np.ndarray:
        """Returns the mask of the flux nodes of one side."""
        return self.minus if side is Side.MINUS else ~self.minus

    def local_index(self, nodes: np.ndarray) -> np.ndarray:
        """Returns the position of mesh nodes within the flux nodes.

        Raises:
            GeometryError: If a node carries no flux unknowns.
        """
        nodes = np.asarray(nodes, dtype=np.int64)
        if nodes.size == 0:
            return np.zeros(nodes.shape, dtype=np.int64)
        index = np.searchsorted(self.nodes, nodes)
        clipped = np.minimum(index, max(self.nodes.size - 1, 0))
        if self.nodes.size == 0 or np.any(self.nodes[clipped] != nodes):
            raise GeometryError("Node carries no flux unknowns")
        return index

    def columns(self, nodes: np.ndarray, component: int) -> np.ndarray:
        """Returns the flux column of each node for one component."""
        return 2 * self.local_index(nodes) + component


@dataclass(frozen=True)
class RowBlock:
    """Rows of the system before Dirichlet lifting.

    `u_part` spans all mesh nodes; `v_part` spans the flux columns.
    """

    u_part: sparse.csr_matrix
    v_part: sparse.csr_matrix
    rhs: np.ndarray

    @property
    def n_rows(self) -> int:
        """Returns the number of rows."""
        return self.rhs.size

    def lifted(self, mesh: TriMesh, boundary_values: np.ndarray) -> "RowBlock":
        """Moves the boundary u columns to the right-hand side."""
        u_part = self.u_part.tocsc()
        rhs = self.rhs - u_part[:, mesh.boundary_nodes] @ boundary_values
        return RowBlock(
            u_part=sparse.csr_matrix(u_part[:, mesh.free_nodes]), v_part=self.v_part, rhs=rhs
        )


def _scatter(
    n_rows: int, n_cols: int, rows: np.ndarray, cols: np.ndarray, values: np.ndarray
) -> sparse.csr_matrix:
    matrix = SparseMatrix(n_rows, n_cols)
    matrix.add_triplets(rows, cols, values)
    return matrix.finalize().csr


class CutLaminate(NamedTuple):
    """Per cut triangle: area share of the minus side, chord normal and mean flux jump."""

    triangles: np.ndarray
    minus_fraction: np.ndarray
    normals: np.ndarray
    jump: np.ndarray

    def means(self, problem: ManufacturedProblem) -> Tuple[np.ndarray, np.ndarray]:
        """Returns the arithmetic and harmonic means of beta over each cut triangle."""
        beta_minus = problem.coefficient.beta_minus
        beta_plus = problem.coefficient.beta_plus
        theta = self.minus_fraction
        arithmetic = theta * beta_minus + (1.0 - theta) * beta_plus
        harmonic = 1.0 / (theta / beta_minus + (1.0 - theta) / beta_plus)
        return arithmetic, harmonic

    def jump_load(self, problem: ManufacturedProblem) -> np.ndarray:
        """Returns the normal flux offset (1 - theta) (1 - beta_h / beta_plus) [beta du/dn]."""
        _, harmonic = self.means(problem)
        share = 1.0 - self.minus_fraction
        return share * (1.0 - harmonic / problem.coefficient.beta_plus) * self.jump


def cut_laminates(problem: ManufacturedProblem, mesh: TriMesh) -> CutLaminate:
    """Collects the laminate data of every triangle cut by the interface."""
    interface = _circle(problem)
    cuts = cut_triangles(mesh, interface)
    if not cuts:
        return CutLaminate(np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros((0, 2)), np.zeros(0))
    triangles = np.fromiter(cuts.keys(), dtype=np.int64, count=len(cuts))
    chords = np.array([cut.chord for cut in cuts.values()])
    rule = gauss_interval(2)
    points = chords[:, np.newaxis, 0] + rule.points[np.newaxis, :, np.newaxis] * (
        chords[:, np.newaxis, 1] - chords[:, np.newaxis, 0]
    )
    projected = interface.project(points.reshape(-1, 2))
    jump = problem.flux_jump(projected[:, 0], projected[:, 1]).reshape(len(cuts), -1)
    return CutLaminate(
        triangles=triangles,
        minus_fraction=np.array([cut.minus_fraction for cut in cuts.values()]),
        normals=np.array([cut.normal for cut in cuts.values()]),
        jump=jump @ rule.weights,
    )


def element_coefficients(
    problem: ManufacturedProblem, mesh: TriMesh, laminates: Optional[CutLaminate] = None
) -> np.ndarray:
    """Returns the (n_triangles, 2, 2) coefficient tensor of every triangle.

    Uncut triangles get beta_s times the identity. A cut triangle with chord
    normal n gets beta_a (I - n n^T) + beta_h n n^T, beta_a and beta_h being the
    area-weighted arithmetic and harmonic means of beta.
    """
    interface = _circle(problem)
    laminates = laminates if laminates is not None else cut_laminates(problem, mesh)
    minus = element_tags(mesh, interface) == int(ElementTag.MINUS)
    tensors = problem.coefficient.values(minus)[:, np.newaxis, np.newaxis] * np.eye(2)
    if laminates.triangles.size:
        arithmetic, harmonic = laminates.means(problem)
        normal_part = np.einsum("ki,kj->kij", laminates.normals, laminates.normals)
        tensors[laminates.triangles] = (
            arithmetic[:, np.newaxis, np.newaxis] * (np.eye(2) - normal_part)
            + harmonic[:, np.newaxis, np.newaxis] * normal_part
        )
    return tensors


def _local_mass(areas: np.ndarray) -> np.ndarray:
    return areas[:, np.newaxis, np.newaxis] / 12.0 * (np.ones((3, 3)) + np.eye(3))


def assemble_galerkin_rows(problem: ManufacturedProblem, mesh: TriMesh) -> RowBlock:
    """Assembles (B grad u, grad phi) + (q u, phi) = (f, phi) - <[beta du/dn], phi>.

    One row per free node. B is beta on uncut triangles and the laminate tensor
    on cut ones, whose load also carries the laminate's jump offset. Cut
    triangles are split along the interface chord for the load; the flux jump
    enters through a line integral over the chords.

    Args:
        problem: 2D manufactured problem.
        mesh: The triangulation.

    Returns:
        RowBlock: Unlifted rows over all u columns, no flux columns.
    """
    interface = _circle(problem)
    triangles = mesh.triangles
    laminates = cut_laminates(problem, mesh)
    tensors = element_coefficients(problem, mesh, laminates)
    stiffness = np.einsum("tac,tcd,tbd->tab", mesh.gradients, tensors, mesh.gradients)
    local = mesh.areas[:, np.newaxis, np.newaxis] * stiffness
    local += problem.reaction * _local_mass(mesh.areas)
    rows = np.broadcast_to(triangles[:, :, np.newaxis], local.shape)
    cols = np.broadcast_to(triangles[:, np.newaxis, :], local.shape)
    full = _scatter(mesh.n_nodes, mesh.n_nodes, rows, cols, local)

    quadrature = element_quadrature(mesh, interface)
    source = evaluate_sides(problem.source, quadrature.minus, quadrature.points)
    load_values = (quadrature.weights * source)[:, np.newaxis] * quadrature.bary
    load = np.bincount(
        triangles[quadrature.triangles].ravel(), load_values.ravel(), mesh.n_nodes
    )
    chords = chord_quadrature(mesh, interface)
    if chords.weights.size:
        jump = problem.flux_jump(chords.projected[:, 0], chords.projected[:, 1])
        jump_values = (chords.weights * jump)[:, np.newaxis] * chords.bary
        load -= np.bincount(triangles[chords.triangles].ravel(), jump_values.ravel(), mesh.n_nodes)
    if laminates.triangles.size:
        cut = laminates.triangles
        normal_slopes = np.einsum("kad,kd->ka", mesh.gradients[cut], laminates.normals)
        offsets = (mesh.areas[cut] * laminates.jump_load(problem))[:, np.newaxis] * normal_slopes
        load -= np.bincount(triangles[cut].ravel(), offsets.ravel(), mesh.n_nodes)
    logger.debug(
        "Galerkin rows: %d quadrature points, %d interface points, %d laminate triangles",
        quadrature.weights.size,
        chords.weights.size,
        laminates.triangles.size,
    )
    free = mesh.free_nodes
    return RowBlock(
        u_part=sparse.csr_matrix(full[free, :]),
        v_part=sparse.csr_matrix((free.size, 0)),
        rhs=load[free],
    )


def _flux_element_betas(problem: ManufacturedProblem, tube: TubeRegion) -> np.ndarray:
    minus = tube.tags[tube.flux_elements] == int(ElementTag.MINUS)
    return problem.coefficient.values(minus).astype(float)


def assemble_flux_identity_rows(
    problem: ManufacturedProblem,
    mesh: TriMesh,
    tube: TubeRegion,
    layout: Optional[FluxLayout] = None,
) -> RowBlock:
    """Assembles (beta_s grad u, g) + (v, g) = 0 for the test functions g of the flux nodes.

    Integrals run over the flux elements, each with the coefficient of its side.
    Rows are ordered by flux node and component, like the flux columns.
    """
    layout = layout or FluxLayout(mesh, tube)
    elements = tube.flux_elements
    triangles = mesh.triangles[elements]
    areas = mesh.areas[elements]
    betas = _flux_element_betas(problem, tube)
    mass = _local_mass(areas)
    local = layout.local_index(triangles.ravel()).reshape(triangles.shape)
    u_triplets, v_triplets = [], []
    for component in range(2):
        test_rows = np.broadcast_to((2 * local + component)[:, :, np.newaxis], mass.shape)
        # (beta d_c lambda_b, lambda_a)_T = beta d_c lambda_b |T| / 3
        coupling = (betas * areas / 3.0)[:, np.newaxis, np.newaxis] * mesh.gradients[elements][
            :, np.newaxis, :, component
        ]
        u_cols = np.broadcast_to(triangles[:, np.newaxis, :], mass.shape)
        v_cols = np.broadcast_to((2 * local + component)[:, np.newaxis, :], mass.shape)
        u_triplets.append((test_rows, u_cols, np.broadcast_to(coupling, mass.shape)))
        v_triplets.append((test_rows, v_cols, mass))
    u_part = _scatter(layout.n_columns, mesh.n_nodes, *_flatten(u_triplets))
    v_part = _scatter(layout.n_columns, layout.n_columns, *_flatten(v_triplets))
    logger.debug("Flux identity rows: %d", u_part.shape[0])
    return RowBlock(u_part=u_part, v_part=v_part, rhs=np.zeros(u_part.shape[0]))


def _flatten(triplets):
    return tuple(np.concatenate([np.ravel(part) for part in column]) for column in zip(*triplets))


def assemble_divergence_rows(
    problem: ManufacturedProblem,
    mesh: TriMesh,
    tube: TubeRegion,
    layout: Optional[FluxLayout] = None,
) -> RowBlock:
    """Assembles |T| div v + (q u, 1)_T = (f_s, 1)_T for every flux element T of side s."""
    layout = layout or FluxLayout(mesh, tube)
    elements = tube.flux_elements
    n_rows = elements.size
    triangles = mesh.triangles[elements]
    areas = mesh.areas[elements]
    row_index = np.repeat(np.arange(n_rows), 3)
    u_values = np.repeat(problem.reaction * areas / 3.0, 3)
    u_part = _scatter(n_rows, mesh.n_nodes, row_index, triangles.ravel(), u_values)
    v_cols = np.concatenate([layout.columns(triangles.ravel(), c) for c in range(2)])
    v_values = np.concatenate(
        [(areas[:, np.newaxis] * mesh.gradients[elements, :, c]).ravel() for c in range(2)]
    )
    v_rows = np.concatenate([row_index, row_index])
    v_part = _scatter(n_rows, layout.n_columns, v_rows, v_cols, v_values)
    tris, _, points, weights = whole_element_quadrature(mesh, elements)
    source = evaluate_sides(problem.source, tube.tags[tris] == int(ElementTag.MINUS), points)
    rhs = np.bincount(np.searchsorted(elements, tris), weights * source, minlength=n_rows)
    logger.debug("Divergence rows: %d", n_rows)
    return RowBlock(u_part=u_part, v_part=v_part, rhs=rhs[:n_rows])


def boundary_values(problem: ManufacturedProblem, mesh: TriMesh) -> np.ndarray:
    """Returns the Dirichlet data at the boundary nodes."""
    points = mesh.nodes[mesh.boundary_nodes]
    return problem.u(points[:, 0], points[:, 1])


@dataclass(frozen=True)
class Solution2d:
    """Nodal u on all mesh nodes and nodal v, shape (n_flux_nodes, 2), on the flux nodes."""

    problem: ManufacturedProblem
    mesh: TriMesh
    u: np.ndarray
    v: np.ndarray
    layout: FluxLayout
    tube: Optional[TubeRegion] = None

    @property
    def is_augmented(self) -> bool:
        """Returns whether the solution carries flux unknowns."""
        return self.tube is not None

    def value(self, triangles: np.ndarray, bary: np.ndarray) -> np.ndarray:
        """Returns u_h at points given by parent triangle and barycentric coordinates."""
        return np.sum(self.u[self.mesh.triangles[triangles]] * bary, axis=1)

    def gradient(self, triangles: np.ndarray) -> np.ndarray:
        """Returns the constant grad u_h of each triangle as a (k, 2) array."""
        nodal = self.u[self.mesh.triangles[triangles]]
        return np.einsum("ka,kac->kc", nodal, self.mesh.gradients[triangles])

    def gradient_flux(self, side: Side, triangles: np.ndarray) -> np.ndarray:
        """Returns -beta_s grad u_h, the flux computed from u_h alone."""
        return -self.problem.coefficient.beta(side) * self.gradient(triangles)

    def side_flux(self, side: Side) -> np.ndarray:
        """Returns the nodal v of one side's flux nodes."""
        return self.v[self.layout.side_mask(side)]

    def flux(self, side: Side, triangles: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Returns v_h of one side at points lying in the given triangles, as a (k, 2) array.

        Points in triangles without that side's unknowns use the linear field of
        the nearest flux element of the side. Standard solutions fall back to
        -beta_s grad u_h.

        Raises:
            GeometryError: If the side has no flux element.
        """
        if not self.is_augmented:
            return self.gradient_flux(side, triangles)
        carriers = self.tube.carriers(self.mesh, side, triangles)
        bary = self.mesh.barycentric(carriers, points)
        nodes = self.mesh.triangles[carriers]
        local = self.layout.local_index(nodes.ravel()).reshape(nodes.shape)
        return np.einsum("ka,kac->kc", bary, self.v[local])


@dataclass(frozen=True)
class AugmentedSystem2d:
    """Lifted rectangular system with its row partition and column layout."""

    problem: ManufacturedProblem
    mesh: TriMesh
    tube: Optional[TubeRegion]
    layout: FluxLayout
    matrix: SparseMatrix
    rhs: np.ndarray
    boundary_values: np.ndarray
    n_galerkin: int
    n_flux_identity: int
    n_divergence: int

    @property
    def n_free(self) -> int:
        """Returns the number of u columns."""
        return self.mesh.free_nodes.size

    @property
    def shape(self):
        """Returns (n_rows, n_cols)."""
        return self.matrix.shape

    def residual(self, x: np.ndarray) -> np.ndarray:
        """Returns b - A x."""
        return self.rhs - self.matrix @ x

    def galerkin_block(self) -> SparseMatrix:
        """Returns the Galerkin rows restricted to the u columns."""
        rows = np.arange(self.n_galerkin)
        return self.matrix.submatrix(rows, np.arange(self.n_free))

    def coupling_block(self) -> SparseMatrix:
        """Returns the flux identity and divergence rows restricted to the u columns."""
        rows = np.arange(self.n_galerkin, self.shape[0])
        return self.matrix.submatrix(rows, np.arange(self.n_free))

    def flux_block(self) -> SparseMatrix:
        """Returns the flux identity and divergence rows restricted to the v columns."""
        rows = np.arange(self.n_galerkin, self.shape[0])
        return self.matrix.submatrix(rows, np.arange(self.n_free, self.shape[1]))

    def unpack(self, x: np.ndarray) -> Solution2d:
        """Splits a solution vector into nodal u, with boundary data, and nodal v."""
        u = np.empty(self.mesh.n_nodes)
        u[self.mesh.boundary_nodes] = self.boundary_values
        u[self.mesh.free_nodes] = x[: self.n_free]
        v = x[self.n_free :].reshape(-1, 2)
        return Solution2d(self.problem, self.mesh, u, v, self.layout, self.tube)

    def pack(self, solution: Solution2d) -> np.ndarray:
        """Returns the solution vector of a nodal solution with this layout."""
        return np.concatenate([solution.u[self.mesh.free_nodes], solution.v.ravel()])


def build_augmented_system(
    problem: ManufacturedProblem, mesh: TriMesh, tube: Optional[TubeRegion] = None
) -> AugmentedSystem2d:
    """Assembles and lifts the full system.

    Args:
        problem: 2D manufactured problem.
        mesh: The triangulation.
        tube: Tube carrying flux unknowns; None gives the standard square system.

    Returns:
        AugmentedSystem2d: Galerkin rows first, then flux identity and divergence rows.

    Raises:
        EmptyTubeError: If every tube triangle is cut.
    """
    if tube is not None and tube.flux_elements.size == 0:
        raise EmptyTubeError(
            f"All {tube.elements.size} tube triangles are cut; widen the tube (h = {mesh.h:.3e})"
        )
    layout = FluxLayout(mesh, tube)
    boundary = boundary_values(problem, mesh)
    galerkin = assemble_galerkin_rows(problem, mesh).lifted(mesh, boundary)
    blocks = [(galerkin.u_part, sparse.csr_matrix((galerkin.n_rows, layout.n_columns)))]
    rhs = [galerkin.rhs]
    n_flux = n_divergence = 0
    if tube is not None:
        flux = assemble_flux_identity_rows(problem, mesh, tube, layout).lifted(mesh, boundary)
        divergence = assemble_divergence_rows(problem, mesh, tube, layout).lifted(mesh, boundary)
        blocks += [(flux.u_part, flux.v_part), (divergence.u_part, divergence.v_part)]
        rhs += [flux.rhs, divergence.rhs]
        n_flux, n_divergence = flux.n_rows, divergence.n_rows
    if layout.n_columns:
        combined = sparse.bmat([list(block) for block in blocks], format="csr")
    else:
        combined = galerkin.u_part
    matrix = SparseMatrix.from_csr(combined)
    logger.info(
        "Assembled %s system of shape %s (N = %d)",
        "augmented" if tube is not None else "standard",
        matrix.shape,
        mesh.N,
    )
    return AugmentedSystem2d(
        problem=problem,
        mesh=mesh,
        tube=tube,
        layout=layout,
        matrix=matrix,
        rhs=np.concatenate(rhs),
        boundary_values=boundary,
        n_galerkin=galerkin.n_rows,
        n_flux_identity=n_flux,
        n_divergence=n_divergence,
    )


def _solve_constrained(system: AugmentedSystem2d, method: LeastSquaresMethod) -> np.ndarray:
    """Solves the Galerkin rows exactly, then fits v to the remaining rows."""
    u_free = solve_spd(system.galerkin_block(), system.rhs[: system.n_galerkin])
    flux_rhs = system.rhs[system.n_galerkin :] - system.coupling_block() @ u_free
    v = solve_least_squares(system.flux_block(), flux_rhs, method)
    return np.concatenate([u_free, v])


def solve_augmented(
    problem: ManufacturedProblem,
    mesh: TriMesh,
    tube: TubeRegion,
    method: LeastSquaresMethod = "sparse-qr",
    coupling: Coupling = "constrained",
) -> Solution2d:
    """Solves the augmented system.

    With "constrained" coupling the Galerkin rows hold exactly and v minimizes
    the residual of the flux rows; "unweighted" minimizes the residual of the
    whole rectangular system at once.

    Raises:
        ParameterError: On an unknown coupling.
        RankDeficientError: With the tube size and cut count added to the message.
    """
    if coupling not in COUPLINGS:
        raise ParameterError(f"Unknown coupling: {coupling}")
    system = build_augmented_system(problem, mesh, tube)
    try:
        if coupling == "constrained":
            x = _solve_constrained(system, method)
        else:
            x = solve_least_squares(system.matrix, system.rhs, method)
    except RankDeficientError as e:
        raise RankDeficientError(
            f"{e} (tube of {tube.elements.size} triangles, {tube.cut_elements.size} cut, "
            f"epsilon {tube.epsilon:.3e}, N = {mesh.N})",
            smallest=e.smallest,
            largest=e.largest,
        ) from e
    logger.info(
        "Augmented solve (%s, %s) at N = %d, residual %.3e",
        method,
        coupling,
        mesh.N,
        np.linalg.norm(system.residual(x)),
    )
    return system.unpack(x)


def solve_standard_fem(problem: ManufacturedProblem, mesh: TriMesh) -> Solution2d:
    """Solves the square Galerkin system without flux unknowns."""
    system = build_augmented_system(problem, mesh)
    x = solve_spd(system.matrix, system.rhs)
    logger.info("Standard FEM solve at N = %d with %d unknowns", mesh.N, x.size)
    return system.unpack(x)


def interpolate_exact(
    problem: ManufacturedProblem, mesh: TriMesh, tube: Optional[TubeRegion] = None
) -> Solution2d:
    """Returns the nodal interpolants of the exact u and of v = -beta_s grad u_s.

    Each flux node takes the branch of the side it lies on.
    """
    _circle(problem)
    layout = FluxLayout(mesh, tube)
    u = problem.u(mesh.nodes[:, 0], mesh.nodes[:, 1])
    v = np.zeros((layout.nodes.size, 2))
    for side in SIDES:
        mask = layout.side_mask(side)
        points = mesh.nodes[layout.nodes[mask]]
        v[mask] = -problem.flux(side, points[:, 0], points[:, 1]).reshape(-1, 2)
    return Solution2d(problem, mesh, u, v, layout, tube)


class InterfaceFluxSamples(NamedTuple):
    """Per-side flux samples at points of the interface.

    `v_normal` holds v_h . n and `beta_grad_normal` holds beta_s grad u_h . n,
    both keyed by side; normals point to the plus side.
    """

    points: np.ndarray
    normals: np.ndarray
    v_normal: Dict[Side, np.ndarray]
    beta_grad_normal: Dict[Side, np.ndarray]


def extract_interface_flux(
    sol: Solution2d, interface: CircleInterface, n_samples: int = DEFAULT_FLUX_SAMPLES
) -> InterfaceFluxSamples:
    """Samples both sides' fluxes at points spaced uniformly in angle on the circle.

    Each sample is nudged off the circle by h / 100 along the normal toward the
    requested side. v_h comes from the side's flux element nearest the triangle
    containing the nudged point; the raw flux from that triangle itself.

    Raises:
        ParameterError: If the interface has zero radius or n_samples < 1.
        GeometryError: If a nudged sample leaves the mesh or a side has no flux element.
    """
    if interface.is_degenerate:
        raise ParameterError("Interface flux needs a circle of positive radius")
    if n_samples < 1:
        raise ParameterError(f"Need at least one sample, got {n_samples}")
    theta = 2.0 * np.pi * np.arange(n_samples) / n_samples
    points = interface.point(theta)
    normals = interface.normal(points[:, 0], points[:, 1])
    delta = NUDGE_FRACTION * sol.mesh.h
    v_normal, beta_grad_normal = {}, {}
    for side in SIDES:
        sign = -1.0 if side is Side.MINUS else 1.0
        nudged = points + sign * delta * normals
        triangles = sol.mesh.locate(nudged)
        v_normal[side] = np.sum(sol.flux(side, triangles, nudged) * normals, axis=1)
        beta = sol.problem.coefficient.beta(side)
        beta_grad_normal[side] = beta * np.sum(sol.gradient(triangles) * normals, axis=1)
    return InterfaceFluxSamples(points, normals, v_normal, beta_grad_normal)
