# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Manufactured interface problems.

Each problem carries the piecewise-constant coefficient, the interface, the exact
solution with its per-side gradient, the analytically derived source and the flux
jump [beta du/dn] on the interface. Sources are never obtained by numerical
differentiation.

The minus side is the left interval (0, alpha) in 1D and the disk inside the
circle in 2D; it carries beta_minus. Normals on the interface point into the
plus side.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from fluxfem.exceptions import ParameterError

logger = logging.getLogger(__name__)

TRIG_DOMAIN_HALF_WIDTH = 1.1
R2R4_DOMAIN_HALF_WIDTH = 1.5
PROBLEM_IDS = ("quartic-1d", "trig-2d", "r2r4-2d")


class Side(str, Enum):
    """Side of the interface."""

    MINUS = "minus"
    PLUS = "plus"

    @property
    def other(self) -> "Side":
        """Returns the opposite side."""
        return Side.PLUS if self is Side.MINUS else Side.MINUS


class PointInterface(BaseModel):
    """Interface point alpha inside the unit interval."""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(gt=0.0, lt=1.0, description="Interface location in (0, 1).")

    def minus_mask(self, x: np.ndarray) -> np.ndarray:
        """Returns True where x lies on the minus (left) side."""
        return np.asarray(x, dtype=float) < self.alpha


class CircleInterface(BaseModel):
    """Circular interface given by the zero level set |x - center| - radius.

    A zero radius means there is no interface: every point is on the plus side
    and a tube around it covers the whole domain.
    """

    model_config = ConfigDict(frozen=True)

    center: Tuple[float, float] = (0.0, 0.0)
    radius: float = Field(ge=0.0, description="Radius of the circle; 0 disables the interface.")

    @property
    def is_degenerate(self) -> bool:
        """Returns whether the interface is the zero-radius convention."""
        return self.radius == 0.0

    def level_set(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Returns the signed distance to the circle, negative inside."""
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        return np.hypot(dx, dy) - self.radius

    def minus_mask(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Returns True where (x, y) lies strictly inside the circle."""
        return self.level_set(x, y) < 0.0

    def point(self, theta: np.ndarray) -> np.ndarray:
        """Returns the points of the circle at the given angles as a (k, 2) array."""
        theta = np.asarray(theta, dtype=float)
        return np.stack(
            [
                self.center[0] + self.radius * np.cos(theta),
                self.center[1] + self.radius * np.sin(theta),
            ],
            axis=-1,
        )

    def normal(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Returns the unit normal pointing to the plus side, as a (..., 2) array."""
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        r = np.hypot(dx, dy)
        return np.stack([dx / r, dy / r], axis=-1)

    def project(self, points: np.ndarray) -> np.ndarray:
        """Returns the radial projection of (k, 2) points onto the circle."""
        points = np.asarray(points, dtype=float)
        normals = self.normal(points[:, 0], points[:, 1])
        return np.asarray(self.center) + self.radius * normals


class Square(BaseModel):
    """Axis-aligned square [lower, upper]^2."""

    model_config = ConfigDict(frozen=True)

    lower: float
    upper: float

    @model_validator(mode="after")
    def _check_bounds(self) -> "Square":
        if self.upper <= self.lower:
            raise ValueError(f"Square upper bound {self.upper} must exceed lower {self.lower}")
        return self

    @property
    def side(self) -> float:
        """Returns the side length."""
        return self.upper - self.lower

    @property
    def area(self) -> float:
        """Returns the area."""
        return self.side**2

    def contains_circle(self, interface: CircleInterface) -> bool:
        """Returns whether the circle lies strictly inside the square."""
        cx, cy = interface.center
        r = interface.radius
        return min(cx, cy) - r > self.lower and max(cx, cy) + r < self.upper


Interface = Union[PointInterface, CircleInterface]


class PiecewiseCoefficient(BaseModel):
    """Piecewise-constant diffusion coefficient beta and its interface."""

    model_config = ConfigDict(frozen=True)

    beta_minus: float = Field(gt=0.0, description="beta_1, inside or left of the interface.")
    beta_plus: float = Field(gt=0.0, description="beta_2, outside or right of the interface.")
    interface: Interface

    @property
    def rho(self) -> float:
        """Returns the ratio beta_1 / beta_2."""
        return self.beta_minus / self.beta_plus

    def beta(self, side: Side) -> float:
        """Returns the coefficient on a side."""
        return self.beta_minus if side is Side.MINUS else self.beta_plus

    def values(self, minus_mask: np.ndarray) -> np.ndarray:
        """Returns beta pointwise given a minus-side mask."""
        return np.where(minus_mask, self.beta_minus, self.beta_plus)


SideFunction = Callable[..., np.ndarray]


@dataclass(frozen=True)
class ManufacturedProblem:
    """Interface problem with a known exact solution.

    The per-side callables take the side first and then the coordinates
    (`x` in 1D, `x, y` in 2D) as arrays. Gradients in 2D are returned with a
    trailing axis of length 2.
    """

    name: str
    dimension: int
    coefficient: PiecewiseCoefficient
    reaction: float
    solution: SideFunction
    gradient: SideFunction
    source: SideFunction
    flux_jump: Callable[..., np.ndarray]
    domain: Union[Tuple[float, float], Square] = (0.0, 1.0)
    parameters: dict = field(default_factory=dict)

    @property
    def interface(self) -> Interface:
        """Returns the interface descriptor."""
        return self.coefficient.interface

    def minus_mask(self, *coords: np.ndarray) -> np.ndarray:
        """Returns True for points on the minus side."""
        return self.interface.minus_mask(*coords)

    def side_of(self, *point: float) -> Side:
        """Returns the side of a single point; points on the interface are plus."""
        minus = self.minus_mask(*(np.asarray(c, dtype=float) for c in point))
        return Side.MINUS if bool(minus) else Side.PLUS

    def _select(self, func: SideFunction, coords: Tuple[np.ndarray, ...]) -> np.ndarray:
        coords = tuple(np.asarray(c, dtype=float) for c in coords)
        minus = self.minus_mask(*coords)
        value_minus = func(Side.MINUS, *coords)
        value_plus = func(Side.PLUS, *coords)
        if np.ndim(value_minus) > np.ndim(minus):
            minus = minus[..., np.newaxis]
        return np.where(minus, value_minus, value_plus)

    def u(self, *coords: np.ndarray) -> np.ndarray:
        """Returns the exact solution, choosing the side from the coordinates."""
        return self._select(self.solution, coords)

    def grad(self, *coords: np.ndarray) -> np.ndarray:
        """Returns the exact gradient (derivative in 1D), side chosen from the coordinates."""
        return self._select(self.gradient, coords)

    def f(self, *coords: np.ndarray) -> np.ndarray:
        """Returns the source term, side chosen from the coordinates."""
        return self._select(self.source, coords)

    def beta(self, *coords: np.ndarray) -> np.ndarray:
        """Returns the coefficient at the coordinates."""
        return self.coefficient.values(self.minus_mask(*coords))

    def flux(self, side: Side, *coords: np.ndarray) -> np.ndarray:
        """Returns beta grad u on a side (beta u' in 1D)."""
        return self.coefficient.beta(side) * self.gradient(side, *coords)


def _coefficient(
    beta_minus: float, beta_plus: float, interface: Interface
) -> PiecewiseCoefficient:
    try:
        return PiecewiseCoefficient(
            beta_minus=beta_minus, beta_plus=beta_plus, interface=interface
        )
    except ValidationError as e:
        raise ParameterError(f"Invalid coefficients ({beta_minus}, {beta_plus}): {e}") from e


def _point_interface(alpha: float) -> PointInterface:
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"Interface alpha must lie in (0, 1), got {alpha}")
    return PointInterface(alpha=alpha)


def _circle_interface(radius: float) -> CircleInterface:
    if radius < 0.0:
        raise ParameterError(f"Interface radius must be non-negative, got {radius}")
    return CircleInterface(radius=radius)


def _check_reaction(q: float) -> float:
    if q < 0.0:
        raise ParameterError(f"Reaction coefficient q must be non-negative, got {q}")
    return float(q)


def _zero_jump(*coords: np.ndarray) -> np.ndarray:
    return np.zeros_like(np.asarray(coords[0], dtype=float))


def quartic_problem_1d(
    alpha: float, beta_minus: float, beta_plus: float, q: float = 0.0
) -> ManufacturedProblem:
    """Returns the quartic 1D problem u = x^4 / beta with a homogeneous flux jump.

    u = x^4 / beta_minus on (0, alpha) and
    u = x^4 / beta_plus + (1 / beta_minus - 1 / beta_plus) alpha^4 on (alpha, 1),
    so that -(beta u')' = -12 x^2; a constant reaction q adds q u to the source.

    Args:
        alpha: Interface location in (0, 1).
        beta_minus: Coefficient on (0, alpha).
        beta_plus: Coefficient on (alpha, 1).
        q: Constant non-negative reaction coefficient.

    Returns:
        ManufacturedProblem: The 1D problem.
    """
    interface = _point_interface(alpha)
    coefficient = _coefficient(beta_minus, beta_plus, interface)
    q = _check_reaction(q)
    shift = (1.0 / beta_minus - 1.0 / beta_plus) * alpha**4

    def solution(side: Side, x: np.ndarray) -> np.ndarray:
        if side is Side.MINUS:
            return x**4 / beta_minus
        return x**4 / beta_plus + shift

    def gradient(side: Side, x: np.ndarray) -> np.ndarray:
        return 4.0 * x**3 / coefficient.beta(side)

    def source(side: Side, x: np.ndarray) -> np.ndarray:
        return -12.0 * x**2 + q * solution(side, x)

    return ManufacturedProblem(
        name="quartic-1d",
        dimension=1,
        coefficient=coefficient,
        reaction=q,
        solution=solution,
        gradient=gradient,
        source=source,
        flux_jump=_zero_jump,
        parameters={"alpha": alpha, "beta_minus": beta_minus, "beta_plus": beta_plus, "q": q},
    )


def linear_problem_1d(
    alpha: float, beta_minus: float, beta_plus: float, flux: float = 1.0
) -> ManufacturedProblem:
    """Returns the piecewise-linear member of the immersed space with u(0) = 0.

    The solution has slope flux / beta on each side, so both jump conditions hold
    and f = 0, q = 0.
    """
    interface = _point_interface(alpha)
    coefficient = _coefficient(beta_minus, beta_plus, interface)

    def solution(side: Side, x: np.ndarray) -> np.ndarray:
        if side is Side.MINUS:
            return flux * x / beta_minus
        return flux * alpha / beta_minus + flux * (x - alpha) / beta_plus

    def gradient(side: Side, x: np.ndarray) -> np.ndarray:
        return np.full_like(np.asarray(x, dtype=float), flux / coefficient.beta(side))

    def source(side: Side, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(x, dtype=float))

    return ManufacturedProblem(
        name="linear-1d",
        dimension=1,
        coefficient=coefficient,
        reaction=0.0,
        solution=solution,
        gradient=gradient,
        source=source,
        flux_jump=_zero_jump,
        parameters={"alpha": alpha, "beta_minus": beta_minus, "beta_plus": beta_plus},
    )


def trig_problem_2d(
    beta_minus: float = 100.0, beta_plus: float = 1.0, q_const: float = 0.0, R_gamma: float = 0.9
) -> ManufacturedProblem:
    """Returns u = sin x cos y on [-1.1, 1.1]^2 with a circular coefficient jump.

    The solution is smooth across the circle of radius R_gamma while the flux
    beta grad u jumps by (beta_plus - beta_minus) du/dn.

    Args:
        beta_minus: Coefficient inside the circle.
        beta_plus: Coefficient outside the circle.
        q_const: Constant non-negative reaction coefficient.
        R_gamma: Radius of the interface; 0 means no interface.

    Returns:
        ManufacturedProblem: The 2D problem.
    """
    interface = _circle_interface(R_gamma)
    coefficient = _coefficient(beta_minus, beta_plus, interface)
    q = _check_reaction(q_const)
    domain = Square(lower=-TRIG_DOMAIN_HALF_WIDTH, upper=TRIG_DOMAIN_HALF_WIDTH)
    if not interface.is_degenerate and not domain.contains_circle(interface):
        raise ParameterError(f"Interface radius {R_gamma} does not fit inside the domain")

    def solution(side: Side, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.sin(x) * np.cos(y)

    def gradient(side: Side, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.stack([np.cos(x) * np.cos(y), -np.sin(x) * np.sin(y)], axis=-1)

    def source(side: Side, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return (2.0 * coefficient.beta(side) + q) * np.sin(x) * np.cos(y)

    def flux_jump(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        normal_derivative = np.sum(gradient(Side.PLUS, x, y) * interface.normal(x, y), axis=-1)
        return (beta_plus - beta_minus) * normal_derivative

    return ManufacturedProblem(
        name="trig-2d",
        dimension=2,
        coefficient=coefficient,
        reaction=q,
        solution=solution,
        gradient=gradient,
        source=source,
        flux_jump=flux_jump,
        domain=domain,
        parameters={
            "beta_minus": beta_minus,
            "beta_plus": beta_plus,
            "q": q,
            "r_gamma": R_gamma,
        },
    )


def r2r4_problem_2d(beta_minus: float, beta_plus: float) -> ManufacturedProblem:
    """Returns u = r^2 inside and u = r^4 outside the unit circle on [-1.5, 1.5]^2.

    The solution is continuous but the flux jump 4 beta_plus - 2 beta_minus is
    non-homogeneous.
    """
    interface = _circle_interface(1.0)
    coefficient = _coefficient(beta_minus, beta_plus, interface)
    domain = Square(lower=-R2R4_DOMAIN_HALF_WIDTH, upper=R2R4_DOMAIN_HALF_WIDTH)

    def solution(side: Side, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        r2 = x**2 + y**2
        return r2 if side is Side.MINUS else r2**2

    def gradient(side: Side, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        scale = 2.0 if side is Side.MINUS else 4.0 * (x**2 + y**2)
        return np.stack([scale * x, scale * y], axis=-1)

    def source(side: Side, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if side is Side.MINUS:
            return np.full_like(np.asarray(x, dtype=float), -4.0 * beta_minus)
        return -16.0 * beta_plus * (x**2 + y**2)

    def flux_jump(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.full_like(np.asarray(x, dtype=float), 4.0 * beta_plus - 2.0 * beta_minus)

    return ManufacturedProblem(
        name="r2r4-2d",
        dimension=2,
        coefficient=coefficient,
        reaction=0.0,
        solution=solution,
        gradient=gradient,
        source=source,
        flux_jump=flux_jump,
        domain=domain,
        parameters={"beta_minus": beta_minus, "beta_plus": beta_plus},
    )


def linear_problem_2d(
    a: float, b: float, c: float, beta: float = 1.0, R_gamma: float = 0.5
) -> ManufacturedProblem:
    """Returns the global linear solution u = a + b x + c y with a continuous coefficient."""
    interface = _circle_interface(R_gamma)
    coefficient = _coefficient(beta, beta, interface)
    domain = Square(lower=-TRIG_DOMAIN_HALF_WIDTH, upper=TRIG_DOMAIN_HALF_WIDTH)

    def solution(side: Side, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return a + b * np.asarray(x, dtype=float) + c * np.asarray(y, dtype=float)

    def gradient(side: Side, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        ones = np.ones_like(np.asarray(x, dtype=float))
        return np.stack([b * ones, c * ones], axis=-1)

    def source(side: Side, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(x, dtype=float))

    return ManufacturedProblem(
        name="linear-2d",
        dimension=2,
        coefficient=coefficient,
        reaction=0.0,
        solution=solution,
        gradient=gradient,
        source=source,
        flux_jump=_zero_jump,
        domain=domain,
        parameters={"a": a, "b": b, "c": c, "beta": beta, "r_gamma": R_gamma},
    )


def build_problem(problem_id: str, **params: float) -> ManufacturedProblem:
    """Returns a problem by its command-line identifier.

    Args:
        problem_id: One of "quartic-1d", "trig-2d" or "r2r4-2d".
        params: alpha, beta_minus, beta_plus, q and r_gamma as applicable.

    Returns:
        ManufacturedProblem: The requested problem.
    """
    beta_minus = params.get("beta_minus", 2.0 if problem_id == "quartic-1d" else 100.0)
    beta_plus = params.get("beta_plus", 10.0 if problem_id == "quartic-1d" else 1.0)
    if problem_id == "quartic-1d":
        return quartic_problem_1d(
            params.get("alpha", 1.0 / 3.0), beta_minus, beta_plus, q=params.get("q", 0.0)
        )
    if problem_id == "trig-2d":
        return trig_problem_2d(
            beta_minus, beta_plus, q_const=params.get("q", 0.0), R_gamma=params.get("r_gamma", 0.9)
        )
    if problem_id == "r2r4-2d":
        return r2r4_problem_2d(beta_minus, beta_plus)
    raise ParameterError(f"Unknown problem {problem_id!r}, expected one of {PROBLEM_IDS}")
