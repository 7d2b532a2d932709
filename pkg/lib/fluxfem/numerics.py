# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Numerical substrate shared by the 1D and 2D solvers.

Contains the triplet-assembled `SparseMatrix`, the symmetric positive definite
direct solve, the rectangular least-squares solve and the Gauss rules on the
unit interval and the reference triangle.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Literal, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import sparse
from scipy.sparse.linalg import lsqr, splu

from fluxfem.exceptions import DimensionError, NotSPDError, ParameterError, RankDeficientError

logger = logging.getLogger(__name__)

LeastSquaresMethod = Literal["svd", "sparse-qr", "normal-cg"]
LEAST_SQUARES_METHODS: Tuple[str, ...] = ("svd", "sparse-qr", "normal-cg")

RANK_TOLERANCE = 1e-12
SYMMETRY_TOLERANCE = 1e-12
DENSE_SVD_MAX_COLUMNS = 2000
MAX_INTERVAL_ORDER = 10


class SparseMatrix:
    """Sparse matrix assembled from (row, col, value) triplets.

    Triplets are accumulated until `finalize` is called; duplicates are summed and
    exact zeros dropped, after which the matrix is read-only and backed by
    compressed row storage with sorted column indices.
    """

    def __init__(self, n_rows: int, n_cols: int):
        if n_rows < 0 or n_cols < 0:
            raise DimensionError(f"Invalid matrix shape ({n_rows}, {n_cols})")
        self.n_rows = n_rows
        self.n_cols = n_cols
        self._rows: list = []
        self._cols: list = []
        self._values: list = []
        self._csr: Optional[sparse.csr_matrix] = None

    @classmethod
    def from_csr(cls, matrix: sparse.spmatrix) -> "SparseMatrix":
        """Returns a finalized matrix wrapping a scipy sparse matrix.

        Args:
            matrix: Any scipy sparse matrix.

        Returns:
            SparseMatrix: Finalized copy of the matrix.
        """
        coo = sparse.coo_matrix(matrix)
        result = cls(*coo.shape)
        result.add_triplets(coo.row, coo.col, coo.data)
        return result.finalize()

    @classmethod
    def from_dense(cls, array: Sequence[Sequence[float]]) -> "SparseMatrix":
        """Returns a finalized matrix holding the nonzeros of a dense array."""
        return cls.from_csr(sparse.csr_matrix(np.asarray(array, dtype=float)))

    @property
    def shape(self) -> Tuple[int, int]:
        """Returns the (n_rows, n_cols) pair."""
        return self.n_rows, self.n_cols

    @property
    def finalized(self) -> bool:
        """Returns whether the triplets were already coalesced."""
        return self._csr is not None

    @property
    def csr(self) -> sparse.csr_matrix:
        """Returns the compressed row storage of a finalized matrix."""
        if self._csr is None:
            raise RuntimeError("Matrix must be finalized before it can be used")
        return self._csr

    def add(self, row: int, col: int, value: float) -> None:
        """Adds a single triplet."""
        self.add_triplets([row], [col], [value])

    def add_triplets(self, rows: Iterable[int], cols: Iterable[int], values: Iterable[float]):
        """Adds a batch of triplets.

        Args:
            rows: Row indices.
            cols: Column indices, same length as rows.
            values: Values, same length as rows.
        """
        if self._csr is not None:
            raise RuntimeError("Matrix already finalized")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if not rows.size == cols.size == values.size:
            raise DimensionError("Triplet arrays must have the same length")
        if rows.size and (rows.min() < 0 or rows.max() >= self.n_rows):
            raise DimensionError(f"Row index out of range for {self.n_rows} rows")
        if cols.size and (cols.min() < 0 or cols.max() >= self.n_cols):
            raise DimensionError(f"Column index out of range for {self.n_cols} columns")
        self._rows.append(rows)
        self._cols.append(cols)
        self._values.append(values)

    def add_block(self, rows: Sequence[int], cols: Sequence[int], block: np.ndarray) -> None:
        """Scatters a dense element block into the matrix."""
        block = np.asarray(block, dtype=float)
        row_index, col_index = np.meshgrid(rows, cols, indexing="ij")
        self.add_triplets(row_index, col_index, block)

    def finalize(self) -> "SparseMatrix":
        """Coalesces the triplets into compressed row storage.

        Returns:
            SparseMatrix: self, to allow chaining.
        """
        if self._csr is not None:
            return self
        empty = np.zeros(0)
        rows = np.concatenate(self._rows) if self._rows else empty.astype(np.int64)
        cols = np.concatenate(self._cols) if self._cols else empty.astype(np.int64)
        values = np.concatenate(self._values) if self._values else empty
        csr = sparse.coo_matrix((values, (rows, cols)), shape=self.shape).tocsr()
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        self._csr = csr
        self._rows, self._cols, self._values = [], [], []
        return self

    def row_entries(self, row: int) -> Tuple[np.ndarray, np.ndarray]:
        """Returns the (columns, values) stored in a row, columns increasing."""
        csr = self.csr
        start, stop = csr.indptr[row], csr.indptr[row + 1]
        return csr.indices[start:stop].copy(), csr.data[start:stop].copy()

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> "SparseMatrix":
        """Returns the finalized submatrix on the given rows and columns."""
        return SparseMatrix.from_csr(self.csr[rows, :][:, cols])

    def to_dense(self) -> np.ndarray:
        """Returns a dense copy."""
        return self.csr.toarray()

    def __matmul__(self, vector: np.ndarray) -> np.ndarray:
        return self.csr @ np.asarray(vector, dtype=float)


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature points and weights on a reference cell.

    Interval rules carry points in [0, 1]; triangle rules carry barycentric
    coordinates (one row of three per point) on the triangle (0,0), (1,0), (0,1).
    """

    points: np.ndarray
    weights: np.ndarray
    order: int

    @property
    def dimension(self) -> int:
        """Returns 1 for interval rules and 2 for triangle rules."""
        return 1 if self.points.ndim == 1 else 2

    def integrate_interval(self, func: Callable[[np.ndarray], np.ndarray], a: float, b: float):
        """Integrates a vectorized function over [a, b] with an interval rule."""
        x = a + (b - a) * self.points
        return (b - a) * float(np.dot(self.weights, func(x)))

    def map_to_triangle(self, vertices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Maps a triangle rule onto a physical triangle.

        Args:
            vertices: (3, 2) array of vertex coordinates.

        Returns:
            Tuple of (points (k, 2), weights (k,)) scaled by the triangle's area.
        """
        vertices = np.asarray(vertices, dtype=float)
        area = triangle_area(vertices)
        return self.points @ vertices, self.weights * (2.0 * area)


def triangle_area(vertices: np.ndarray) -> float:
    """Returns the unsigned area of a triangle given as a (3, 2) array."""
    (x0, y0), (x1, y1), (x2, y2) = np.asarray(vertices, dtype=float)
    return 0.5 * abs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))


def gauss_interval(order: int) -> QuadratureRule:
    """Returns the Gauss-Legendre rule with `order` points mapped to [0, 1].

    Args:
        order: Number of points, between 1 and 10.

    Returns:
        QuadratureRule: Exact for polynomials of degree up to 2 * order - 1.
    """
    if not 1 <= order <= MAX_INTERVAL_ORDER:
        raise ParameterError(
            f"Interval quadrature order must be in [1, {MAX_INTERVAL_ORDER}], got {order}"
        )
    points, weights = leggauss(order)
    return QuadratureRule(points=0.5 * (points + 1.0), weights=0.5 * weights, order=order)


_A4, _B4 = 0.445948490915965, 0.091576213509771
_W4A, _W4B = 0.223381589678011, 0.109951743655322


def _symmetric_orbit(a: float) -> np.ndarray:
    b = 1.0 - 2.0 * a
    return np.array([[b, a, a], [a, b, a], [a, a, b]])


def triangle_rule(order: int) -> QuadratureRule:
    """Returns a positive-weight rule on the reference triangle.

    Order 1 is the centroid rule, order 2 the three-point interior rule and
    orders 3 and 4 share the six-point degree-4 rule.

    Args:
        order: Polynomial degree to integrate exactly, in {1, 2, 3, 4}.

    Returns:
        QuadratureRule: Barycentric points and weights summing to 1/2.
    """
    if order == 1:
        points = np.array([[1.0, 1.0, 1.0]]) / 3.0
        weights = np.array([0.5])
    elif order == 2:
        points = _symmetric_orbit(1.0 / 6.0)
        weights = np.full(3, 1.0 / 6.0)
    elif order in (3, 4):
        points = np.vstack([_symmetric_orbit(_A4), _symmetric_orbit(_B4)])
        weights = 0.5 * np.array([_W4A] * 3 + [_W4B] * 3)
        weights *= 0.5 / weights.sum()
    else:
        raise ParameterError(f"Triangle quadrature order must be in {{1, 2, 3, 4}}, got {order}")
    return QuadratureRule(points=points, weights=weights, order=order)


def _check_vector(matrix: SparseMatrix, b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.shape != (matrix.n_rows,):
        raise DimensionError(
            f"Right-hand side of shape {b.shape} does not match {matrix.n_rows} rows"
        )
    return b


def solve_spd(matrix: SparseMatrix, b: np.ndarray) -> np.ndarray:
    """Solves a sparse symmetric positive definite system.

    The factorization is a sparse LU with symmetric ordering and diagonal
    pivoting, so its pivots are those of an LDL^T factorization; any
    non-positive pivot means the matrix is not positive definite.

    Args:
        matrix: Square, symmetric positive definite matrix.
        b: Right-hand side.

    Returns:
        np.ndarray: The solution vector.
    """
    if matrix.n_rows != matrix.n_cols:
        raise DimensionError(f"SPD solve needs a square matrix, got {matrix.shape}")
    b = _check_vector(matrix, b)
    if matrix.n_rows == 0:
        return np.zeros(0)
    csr = matrix.csr
    scale = abs(csr).max()
    asymmetry = abs(csr - csr.T).max() if csr.nnz else 0.0
    if asymmetry > SYMMETRY_TOLERANCE * scale:
        raise NotSPDError(f"Matrix is not symmetric (max asymmetry {asymmetry:.3e})")
    if np.any(csr.diagonal() <= 0.0):
        raise NotSPDError("Matrix has a non-positive diagonal entry")
    try:
        factor = splu(
            csr.tocsc(),
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError as e:
        raise NotSPDError(f"Factorization failed: {e}") from e
    pivots = factor.U.diagonal()
    if np.any(pivots <= 0.0):
        raise NotSPDError("Factorization encountered a non-positive pivot")
    x = factor.solve(b)
    logger.debug(
        "SPD solve of size %d, pivot ratio %.3e", matrix.n_rows, pivots.min() / pivots.max()
    )
    return x


def _solve_dense_svd(matrix: SparseMatrix, b: np.ndarray) -> np.ndarray:
    if matrix.n_cols > DENSE_SVD_MAX_COLUMNS:
        raise ParameterError(
            f"Dense SVD is limited to {DENSE_SVD_MAX_COLUMNS} columns, got {matrix.n_cols}; "
            "use sparse-qr or normal-cg"
        )
    u, s, vt = np.linalg.svd(matrix.to_dense(), full_matrices=False)
    if s.size and s[-1] <= RANK_TOLERANCE * s[0]:
        rank = int(np.sum(s > RANK_TOLERANCE * s[0]))
        raise RankDeficientError(
            f"Matrix is rank deficient: numerical rank {rank} of {matrix.n_cols} columns, "
            f"smallest singular value {s[-1]:.3e}",
            smallest=float(s[-1]),
            largest=float(s[0]),
        )
    return vt.T @ ((u.T @ b) / s)


def _equilibrate_columns(matrix: SparseMatrix) -> Tuple[sparse.csr_matrix, np.ndarray]:
    """Returns A D with unit column norms and the diagonal of D."""
    csr = matrix.csr
    norms = np.sqrt(np.asarray(csr.multiply(csr).sum(axis=0)).ravel())
    if np.any(norms == 0.0):
        empty = int(np.flatnonzero(norms == 0.0)[0])
        raise RankDeficientError(
            f"Matrix is rank deficient: column {empty} is identically zero",
            smallest=0.0,
            largest=float(norms.max()),
        )
    scaling = 1.0 / norms
    return sparse.csr_matrix(csr @ sparse.diags(scaling)), scaling


def _solve_sparse_augmented(matrix: SparseMatrix, b: np.ndarray) -> np.ndarray:
    """Solves min |Ax - b| through the augmented system [[I, A], [A^T, 0]].

    The columns are equilibrated first, then the KKT system is factorized by a
    sparse LU (SuperLU, COLAMD ordering). No QR factorization is formed; the
    method keeps the name "sparse-qr" for the sparse direct path. Small LU
    pivots flag a rank-deficient A.
    """
    scaled, scaling = _equilibrate_columns(matrix)
    m, n = matrix.shape
    kkt = sparse.bmat([[sparse.identity(m, format="csr"), scaled], [scaled.T, None]], format="csc")
    rhs = np.concatenate([b, np.zeros(n)])
    try:
        factor = splu(kkt, permc_spec="COLAMD")
    except RuntimeError as e:
        raise RankDeficientError(
            f"Matrix is rank deficient: augmented system is singular ({e})",
            smallest=0.0,
            largest=1.0,
        ) from e
    pivots = np.abs(factor.U.diagonal())
    smallest, largest = float(pivots.min()), float(pivots.max())
    if smallest <= RANK_TOLERANCE * largest:
        raise RankDeficientError(
            f"Matrix is rank deficient: pivot ratio {smallest / largest:.3e} is below "
            f"{RANK_TOLERANCE:.0e}",
            smallest=smallest,
            largest=largest,
        )
    logger.debug("Augmented factorization pivot ratio %.3e", smallest / largest)
    return factor.solve(rhs)[m:] * scaling


def _solve_normal_cg(matrix: SparseMatrix, b: np.ndarray) -> np.ndarray:
    """Solves the least-squares problem with LSQR, i.e. CG on the normal equations."""
    scaled, scaling = _equilibrate_columns(matrix)
    result = lsqr(
        scaled,
        b,
        atol=1e-13,
        btol=1e-13,
        conlim=1.0 / RANK_TOLERANCE,
        iter_lim=max(20 * matrix.n_cols, 1000),
    )
    x, istop, iterations, acond = result[0] * scaling, result[1], result[2], result[6]
    if istop == 3 or acond >= 1.0 / RANK_TOLERANCE:
        raise RankDeficientError(
            f"Matrix is rank deficient: condition estimate {acond:.3e} exceeds "
            f"{1.0 / RANK_TOLERANCE:.0e}",
            smallest=1.0,
            largest=float(acond),
        )
    if istop == 7:
        logger.warning("LSQR stopped at the iteration limit (%d iterations)", iterations)
    logger.debug("LSQR finished in %d iterations, stop reason %d", iterations, istop)
    return x


def solve_least_squares(
    matrix: SparseMatrix, b: np.ndarray, method: LeastSquaresMethod = "sparse-qr"
) -> np.ndarray:
    """Solves min |Ax - b|_2 for a matrix with at least as many rows as columns.

    Args:
        matrix: Rectangular matrix with n_rows >= n_cols and full column rank.
        b: Right-hand side.
        method: "svd" (dense, small systems only), "sparse-qr" (sparse LU of
            the augmented KKT system, not an actual QR) or "normal-cg" (LSQR).

    Returns:
        np.ndarray: The least-squares solution.
    """
    if method not in LEAST_SQUARES_METHODS:
        raise ParameterError(f"Unknown least-squares method: {method}")
    if matrix.n_rows < matrix.n_cols:
        raise DimensionError(
            f"Least squares needs n_rows >= n_cols, got {matrix.n_rows} < {matrix.n_cols}"
        )
    b = _check_vector(matrix, b)
    if method == "svd":
        x = _solve_dense_svd(matrix, b)
    elif method == "sparse-qr":
        x = _solve_sparse_augmented(matrix, b)
    else:
        x = _solve_normal_cg(matrix, b)
    logger.debug(
        "Least-squares solve (%s) of shape %s, residual %.3e",
        method,
        matrix.shape,
        np.linalg.norm(matrix @ x - b),
    )
    return x
