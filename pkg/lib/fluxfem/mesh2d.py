# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Uniform triangulation of a square and the geometry of a circular interface on it.

Covers the tube of triangles around the interface and the split of the
triangles it cuts.

Cell (i, k) with corners a = (i, k), b = (i + 1, k), c = (i + 1, k + 1) and
d = (i, k + 1) is split along the diagonal a-c into the triangles (a, b, c) and
(a, c, d). Node (i, k) has index k (N + 1) + i.
"""

import logging
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from fluxfem.exceptions import EmptyTubeError, GeometryError, ParameterError
from fluxfem.numerics import gauss_interval, triangle_area, triangle_rule
from fluxfem.problems import CircleInterface, Side, Square

logger = logging.getLogger(__name__)

MIN_MESH_LINES = 4
DEFAULT_TUBE_MULTIPLIER = 3.0


@dataclass(frozen=True)
class TriMesh:
    """Conforming uniform triangulation of a square."""

    domain: Square
    N: int
    nodes: np.ndarray
    triangles: np.ndarray

    @property
    def h(self) -> float:
        """Returns the spacing between mesh lines."""
        return self.domain.side / self.N

    @property
    def n_nodes(self) -> int:
        """Returns the number of nodes."""
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        """Returns the number of triangles."""
        return self.triangles.shape[0]

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        """Returns the sorted indices of nodes on the boundary of the square."""
        index = np.arange(self.N + 1)
        i, k = np.meshgrid(index, index)
        on_boundary = (i == 0) | (i == self.N) | (k == 0) | (k == self.N)
        return np.flatnonzero(on_boundary.ravel())

    @cached_property
    def free_nodes(self) -> np.ndarray:
        """Returns the sorted indices of nodes not on the boundary."""
        return np.setdiff1d(np.arange(self.n_nodes), self.boundary_nodes)

    @cached_property
    def centroids(self) -> np.ndarray:
        """Returns the (n_triangles, 2) centroids."""
        return self.nodes[self.triangles].mean(axis=1)

    @cached_property
    def areas(self) -> np.ndarray:
        """Returns the triangle areas."""
        p = self.nodes[self.triangles]
        cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (
            p[:, 2, 0] - p[:, 0, 0]
        ) * (p[:, 1, 1] - p[:, 0, 1])
        return 0.5 * np.abs(cross)

    @cached_property
    def gradients(self) -> np.ndarray:
        """Returns the constant gradients of the three barycentric functions.

        Shape (n_triangles, 3, 2); entry [t, a] is grad lambda_a on triangle t.
        """
        p = self.nodes[self.triangles]
        x, y = p[:, :, 0], p[:, :, 1]
        twice_area = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (
            y[:, 1] - y[:, 0]
        )
        gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        return np.stack([gx, gy], axis=-1) / twice_area[:, np.newaxis, np.newaxis]

    def barycentric(self, triangles, points: np.ndarray) -> np.ndarray:
        """Returns the (k, 3) barycentric coordinates of points with respect to triangles.

        `triangles` is one index shared by all points or one index per point;
        points outside their triangle get coordinates of the affine extension.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        triangles = np.broadcast_to(np.asarray(triangles, dtype=np.int64), points.shape[:1])
        offsets = points - self.nodes[self.triangles[triangles, 0]]
        lambdas_12 = np.einsum("kd,kad->ka", offsets, self.gradients[triangles, 1:])
        return np.column_stack([1.0 - lambdas_12.sum(axis=1), lambdas_12])

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Returns the index of the triangle containing each point.

        Raises:
            GeometryError: If a point lies outside the square.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        local = (points - self.domain.lower) / self.h
        tolerance = 1e-12
        if np.any(local < -tolerance) or np.any(local > self.N + tolerance):
            raise GeometryError("Sample point lies outside the mesh")
        cell = np.clip(np.floor(local).astype(int), 0, self.N - 1)
        fraction = local - cell
        upper = fraction[:, 1] > fraction[:, 0]
        return 2 * (cell[:, 1] * self.N + cell[:, 0]) + upper.astype(int)


def build_mesh(domain: Square, N: int) -> TriMesh:
    """Triangulates the square with N mesh lines per direction.

    Args:
        domain: The square.
        N: Number of cells per direction, at least 4.

    Returns:
        TriMesh: (N + 1)^2 nodes and 2 N^2 triangles.
    """
    if N < MIN_MESH_LINES:
        raise ParameterError(f"Mesh needs N >= {MIN_MESH_LINES}, got {N}")
    coordinates = np.linspace(domain.lower, domain.upper, N + 1)
    x, y = np.meshgrid(coordinates, coordinates)
    nodes = np.column_stack([x.ravel(), y.ravel()])
    i, k = np.meshgrid(np.arange(N), np.arange(N))
    a = (k * (N + 1) + i).ravel()
    b, c, d = a + 1, a + N + 2, a + N + 1
    triangles = np.empty((2 * N * N, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([a, b, c])
    triangles[1::2] = np.column_stack([a, c, d])
    logger.debug("Built %dx%d mesh with %d triangles", N, N, triangles.shape[0])
    return TriMesh(domain=domain, N=N, nodes=nodes, triangles=triangles)


class ElementTag(IntEnum):
    """Position of a triangle relative to the interface, stored as int8 codes."""

    MINUS = 0
    PLUS = 1
    CUT = 2

    @classmethod
    def of(cls, side: Side) -> "ElementTag":
        """Returns the tag of the triangles lying wholly on one side."""
        return cls.MINUS if side is Side.MINUS else cls.PLUS


def element_tags(mesh: TriMesh, interface: CircleInterface) -> np.ndarray:
    """Returns the int8 ElementTag code of every triangle from the vertex signs of the level set.

    Vertices with a non-negative level set count as plus.
    """
    level = interface.level_set(mesh.nodes[:, 0], mesh.nodes[:, 1])[mesh.triangles]
    minus = level < 0.0
    tags = np.full(mesh.n_triangles, int(ElementTag.PLUS), dtype=np.int8)
    tags[minus.all(axis=1)] = int(ElementTag.MINUS)
    tags[minus.any(axis=1) & ~minus.all(axis=1)] = int(ElementTag.CUT)
    return tags


@dataclass(frozen=True)
class TubeRegion:
    """Triangles within distance epsilon of the interface, with side tags.

    Flux unknowns live on the uncut tube triangles ("flux elements"). Their
    minus and plus nodes are disjoint, so every flux node carries the flux of
    the side it lies on.
    """

    epsilon: float
    elements: np.ndarray
    tags: np.ndarray
    whole_domain: bool

    @cached_property
    def cut_elements(self) -> np.ndarray:
        """Returns the tube triangles crossed by the interface."""
        return self.elements[self.tags[self.elements] == int(ElementTag.CUT)]

    @cached_property
    def flux_elements(self) -> np.ndarray:
        """Returns the tube triangles lying wholly on one side."""
        return self.elements[self.tags[self.elements] != int(ElementTag.CUT)]

    def side_elements(self, side: Side) -> np.ndarray:
        """Returns the flux elements of one side."""
        return self.elements[self.tags[self.elements] == int(ElementTag.of(side))]

    def nodes(self, mesh: TriMesh, side: Optional[Side] = None) -> np.ndarray:
        """Returns the sorted flux nodes, or those of one side."""
        elements = self.flux_elements if side is None else self.side_elements(side)
        return np.unique(mesh.triangles[elements])

    def carriers(self, mesh: TriMesh, side: Side, triangles: np.ndarray) -> np.ndarray:
        """Maps triangles to the flux element of a side whose linear field covers them.

        Flux elements of the side map to themselves; any other triangle maps to
        the side's flux element with the nearest centroid.

        Raises:
            GeometryError: If the side has no flux element.
        """
        candidates = self.side_elements(side)
        if candidates.size == 0:
            raise GeometryError(f"No tube triangle carries {side.value} flux unknowns")
        triangles = np.asarray(triangles, dtype=np.int64)
        unique, inverse = np.unique(triangles, return_inverse=True)
        mapped = unique.copy()
        missing = np.flatnonzero(~np.isin(unique, candidates))
        if missing.size:
            tree = cKDTree(mesh.centroids[candidates])
            _, nearest = tree.query(mesh.centroids[unique[missing]])
            mapped[missing] = candidates[nearest]
        return mapped[inverse].reshape(triangles.shape)


def extract_tube(
    mesh: TriMesh, interface: CircleInterface, epsilon: Optional[float] = None
) -> TubeRegion:
    """Selects the triangles whose centroid lies within epsilon of the interface.

    Args:
        mesh: The triangulation.
        interface: Circle; a zero radius selects the whole domain.
        epsilon: Tube half-width, defaults to 3h; None with a zero radius or
            `numpy.inf` also select the whole domain.

    Returns:
        TubeRegion: Tube triangles and their side tags.
    """
    tags = element_tags(mesh, interface)
    if interface.is_degenerate or (epsilon is not None and np.isinf(epsilon)):
        elements = np.arange(mesh.n_triangles)
        logger.debug("Tube covers the whole domain (%d triangles)", elements.size)
        return TubeRegion(epsilon=np.inf, elements=elements, tags=tags, whole_domain=True)
    if epsilon is None:
        epsilon = DEFAULT_TUBE_MULTIPLIER * mesh.h
    if epsilon <= 0.0:
        raise ParameterError(f"Tube half-width must be positive, got {epsilon}")
    centroids = mesh.centroids
    distance = np.abs(interface.level_set(centroids[:, 0], centroids[:, 1]))
    elements = np.flatnonzero(distance <= epsilon)
    if elements.size == 0:
        raise EmptyTubeError(
            f"No triangle centroid lies within {epsilon:.3e} of the interface (h = {mesh.h:.3e})"
        )
    logger.debug(
        "Tube of half-width %.3e holds %d triangles, %d cut",
        epsilon,
        elements.size,
        int(np.sum(tags[elements] == int(ElementTag.CUT))),
    )
    return TubeRegion(epsilon=epsilon, elements=elements, tags=tags, whole_domain=False)


class CutPiece(NamedTuple):
    """Sub-triangle of a cut triangle lying on one side of the interface chord."""

    vertices: np.ndarray
    side: Side


class CutTriangle(NamedTuple):
    """Split of a triangle by the chord joining its two edge-circle intersections.

    `minus_fraction` is the share of the triangle's area on the minus side and
    `normal` the unit normal of the chord pointing to the plus side.
    """

    pieces: List[CutPiece]
    chord: np.ndarray
    minus_fraction: float
    normal: np.ndarray


def _edge_intersection(p: np.ndarray, q: np.ndarray, interface: CircleInterface) -> np.ndarray:
    """Returns the point of segment p-q on the circle, p and q on opposite sides."""
    direction = q - p
    offset = p - np.asarray(interface.center, dtype=float)
    a = direction @ direction
    b = 2.0 * direction @ offset
    c = offset @ offset - interface.radius**2
    root = np.sqrt(max(b * b - 4.0 * a * c, 0.0))
    candidates = np.array([(-b - root) / (2.0 * a), (-b + root) / (2.0 * a)])
    on_segment = candidates[(candidates >= -1e-12) & (candidates <= 1.0 + 1e-12)]
    if on_segment.size:
        t = on_segment[0]
    else:
        t = candidates[np.argmin(np.abs(candidates - 0.5))]
    return p + float(np.clip(t, 0.0, 1.0)) * direction


def _chord_normal(p1: np.ndarray, p2: np.ndarray, interface: CircleInterface) -> np.ndarray:
    """Returns the unit normal of chord p1-p2 pointing away from the center.

    Degenerate chords fall back to the radial direction at their midpoint.
    """
    center = np.asarray(interface.center, dtype=float)
    midpoint = 0.5 * (p1 + p2)
    tangent = p2 - p1
    length = float(np.hypot(*tangent))
    if length <= 1e-14 * max(interface.radius, 1.0):
        return interface.normal(midpoint[0], midpoint[1])
    normal = np.array([tangent[1], -tangent[0]]) / length
    return normal if normal @ (midpoint - center) >= 0.0 else -normal


def split_triangle(vertices: np.ndarray, interface: CircleInterface) -> CutTriangle:
    """Splits a cut triangle into sub-triangles on each side of the interface chord.

    The vertex alone on its side keeps a sub-triangle; the opposite quadrilateral
    is split into two sub-triangles.

    Args:
        vertices: (3, 2) vertex coordinates.
        interface: The circle.

    Returns:
        CutTriangle: Pieces with their sides and the chord end points.
    """
    vertices = np.asarray(vertices, dtype=float)
    minus = interface.level_set(vertices[:, 0], vertices[:, 1]) < 0.0
    if minus.all() or not minus.any():
        raise GeometryError("Triangle is not cut by the interface")
    lone_mask = minus if minus.sum() == 1 else ~minus
    lone = int(np.flatnonzero(lone_mask)[0])
    v0, v1, v2 = vertices[lone], vertices[(lone + 1) % 3], vertices[(lone + 2) % 3]
    p1 = _edge_intersection(v0, v1, interface)
    p2 = _edge_intersection(v0, v2, interface)
    lone_side = Side.MINUS if minus[lone] else Side.PLUS
    pieces = [
        CutPiece(np.array([v0, p1, p2]), lone_side),
        CutPiece(np.array([p1, v1, v2]), lone_side.other),
        CutPiece(np.array([p1, v2, p2]), lone_side.other),
    ]
    minus_area = sum(triangle_area(p.vertices) for p in pieces if p.side is Side.MINUS)
    minus_fraction = float(np.clip(minus_area / triangle_area(vertices), 0.0, 1.0))
    return CutTriangle(
        pieces=pieces,
        chord=np.array([p1, p2]),
        minus_fraction=minus_fraction,
        normal=_chord_normal(p1, p2, interface),
    )


def cut_triangles(
    mesh: TriMesh, interface: CircleInterface, elements: Optional[np.ndarray] = None
) -> Dict[int, CutTriangle]:
    """Returns {triangle index: CutTriangle} for the cut triangles among `elements`.

    All triangles of the mesh are considered when `elements` is None.
    """
    if interface.is_degenerate:
        return {}
    tags = element_tags(mesh, interface)
    candidates = np.arange(mesh.n_triangles) if elements is None else np.asarray(elements)
    cut = candidates[tags[candidates] == int(ElementTag.CUT)]
    return {
        int(t): split_triangle(mesh.nodes[mesh.triangles[t]], interface) for t in np.sort(cut)
    }


class ElementQuadrature(NamedTuple):
    """Quadrature points over a set of triangles, cut triangles split per side.

    `bary` holds the barycentric coordinates of each point in its parent triangle.
    """

    triangles: np.ndarray
    bary: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    minus: np.ndarray

    def select(self, mask: np.ndarray) -> "ElementQuadrature":
        """Returns the points where mask holds."""
        return ElementQuadrature(*(field[mask] for field in self))


def whole_element_quadrature(
    mesh: TriMesh, elements: np.ndarray, order: int = 3
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Returns (triangles, bary, points, weights) of a rule mapped to whole triangles."""
    rule = triangle_rule(order)
    elements = np.asarray(elements, dtype=np.int64)
    vertices = mesh.nodes[mesh.triangles[elements]]
    points = np.einsum("kv,tvd->tkd", rule.points, vertices).reshape(-1, 2)
    weights = (rule.weights[np.newaxis, :] * 2.0 * mesh.areas[elements][:, np.newaxis]).ravel()
    triangles = np.repeat(elements, rule.weights.size)
    bary = np.tile(rule.points, (elements.size, 1))
    return triangles, bary, points, weights


def element_quadrature(
    mesh: TriMesh,
    interface: CircleInterface,
    elements: Optional[np.ndarray] = None,
    order: int = 3,
) -> ElementQuadrature:
    """Builds quadrature over triangles, splitting cut triangles along the chord.

    Args:
        mesh: The triangulation.
        interface: The circle deciding the side of every point.
        elements: Triangles to cover, all of them when None.
        order: Triangle rule order used on whole triangles and on pieces.

    Returns:
        ElementQuadrature: Points tagged with the side they belong to.
    """
    if elements is None:
        elements = np.arange(mesh.n_triangles)
    elements = np.asarray(elements, dtype=np.int64)
    tags = element_tags(mesh, interface)
    whole = elements[tags[elements] != int(ElementTag.CUT)]
    triangles, bary, points, weights = whole_element_quadrature(mesh, whole, order)
    minus = np.repeat(tags[whole] == int(ElementTag.MINUS), triangle_rule(order).weights.size)
    parts = [(triangles, bary, points, weights, minus)]
    rule = triangle_rule(order)
    for t, cut in cut_triangles(mesh, interface, elements).items():
        for piece in cut.pieces:
            piece_points, piece_weights = rule.map_to_triangle(piece.vertices)
            parts.append(
                (
                    np.full(piece_weights.size, t, dtype=np.int64),
                    mesh.barycentric(t, piece_points),
                    piece_points,
                    piece_weights,
                    np.full(piece_weights.size, piece.side is Side.MINUS),
                )
            )
    merged = [np.concatenate(column) for column in zip(*parts)]
    return ElementQuadrature(*merged)


class ChordQuadrature(NamedTuple):
    """Gauss points on the inscribed polyline of the interface."""

    triangles: np.ndarray
    bary: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    projected: np.ndarray
    normals: np.ndarray


def interface_polyline(mesh: TriMesh, interface: CircleInterface) -> List[Tuple[int, np.ndarray]]:
    """Returns (triangle, chord) pairs forming the inscribed polyline of the interface."""
    return [(t, cut.chord) for t, cut in cut_triangles(mesh, interface).items()]


def chord_quadrature(
    mesh: TriMesh, interface: CircleInterface, order: int = 2
) -> ChordQuadrature:
    """Builds Gauss points on every chord joining the edge-circle intersections.

    Each point also carries its radial projection onto the circle and the
    circle's normal there.
    """
    rule = gauss_interval(order)
    parts = []
    for t, (start, end) in interface_polyline(mesh, interface):
        points = start + rule.points[:, np.newaxis] * (end - start)
        weights = rule.weights * float(np.hypot(*(end - start)))
        parts.append((np.full(rule.order, t), mesh.barycentric(t, points), points, weights))
    if not parts:
        empty = np.zeros((0, 2))
        return ChordQuadrature(
            np.zeros(0, dtype=np.int64), np.zeros((0, 3)), empty, np.zeros(0), empty, empty
        )
    triangles, bary, points, weights = (np.concatenate(column) for column in zip(*parts))
    projected = interface.project(points)
    normals = interface.normal(projected[:, 0], projected[:, 1])
    return ChordQuadrature(triangles.astype(np.int64), bary, points, weights, projected, normals)

