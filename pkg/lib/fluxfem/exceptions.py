# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Exceptions raised by the fluxfem library."""

from typing import Any, Optional, Sequence


class FluxFemError(Exception):
    """Base class for all fluxfem errors."""


class ParameterError(FluxFemError, ValueError):
    """Raised when an input parameter is outside its admissible range."""


class DimensionError(FluxFemError, ValueError):
    """Raised when matrix or vector shapes are incompatible."""


class NotSPDError(FluxFemError, RuntimeError):
    """Raised when a matrix handed to the SPD solver is not symmetric positive definite."""


class RankDeficientError(FluxFemError, RuntimeError):
    """Raised when a least-squares matrix does not have full column rank."""

    def __init__(self, message: str, smallest: float, largest: float):
        """Init."""
        super().__init__(message)
        self.smallest = smallest
        self.largest = largest

    @property
    def ratio(self) -> float:
        """Returns the ratio between the smallest and the largest singular value or pivot."""
        return self.smallest / self.largest if self.largest else 0.0


class DegenerateBasisError(FluxFemError, RuntimeError):
    """Raised when the interface-modified basis cannot be built."""


class AmbiguousEvaluationError(FluxFemError, ValueError):
    """Raised when a one-sided quantity is requested at the interface without a side."""


class EmptyTubeError(FluxFemError, RuntimeError):
    """Raised when no element falls inside the tube around the interface."""


class GeometryError(FluxFemError, RuntimeError):
    """Raised when a point cannot be located in the mesh or the tube."""


class StudyError(FluxFemError, RuntimeError):
    """Raised when one or more runs of a refinement study failed.

    The partially filled table is kept so that callers can still emit it.
    """

    def __init__(self, message: str, table: Any, failed: Optional[Sequence[int]] = None):
        """Init."""
        super().__init__(message)
        self.table = table
        self.failed = list(failed or [])
