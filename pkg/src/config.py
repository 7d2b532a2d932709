# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Run configuration of refinement studies and its YAML file format.

A configuration file holds one top-level section per named run:

    table-1:
      problem: quartic-1d
      alpha: 0.3333333333333333
      beta_minus: 2
      beta_plus: 10
      n_list: [16, 32, 64, 128, 256, 512, 1024]
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from fluxfem.exceptions import ParameterError
from fluxfem.fem2d import Coupling
from fluxfem.numerics import LeastSquaresMethod
from fluxfem.problems import ManufacturedProblem, build_problem

logger = logging.getLogger(__name__)

DEFAULT_N_LIST_1D = [16, 32, 64, 128, 256, 512, 1024]
DEFAULT_N_LIST_2D = [8, 16, 32, 64, 128]
DEFAULT_QUANTITIES = {
    ("quartic-1d", "galerkin"): ["linf", "deriv_minus", "l2", "h1_semi"],
    ("quartic-1d", "interpolation"): ["interp_l2", "interp_h1", "kappa_minus"],
    ("2d", "galerkin"): ["l2", "h1_semi", "flux_tube", "interface_flux"],
}
KNOWN_QUANTITIES = (
    "linf",
    "linf_nodal",
    "l2",
    "h1_semi",
    "deriv_minus",
    "deriv_plus",
    "deriv_minus_raw",
    "deriv_plus_raw",
    "flux_minus",
    "flux_plus",
    "flux_0",
    "flux_1",
    "interp_l2",
    "interp_h1",
    "kappa_minus",
    "kappa_plus",
    "flux_tube",
    "flux_tube_raw",
    "interface_flux",
    "interface_flux_minus",
    "interface_flux_plus",
    "interface_flux_raw",
)


class RunConfig(BaseModel):
    """Parameters of one refinement study."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    problem: Literal["quartic-1d", "trig-2d", "r2r4-2d"] = "quartic-1d"
    kind: Literal["galerkin", "interpolation"] = "galerkin"
    alpha: float = Field(default=1.0 / 3.0, gt=0.0, lt=1.0)
    beta_minus: Optional[float] = Field(default=None, gt=0.0)
    beta_plus: Optional[float] = Field(default=None, gt=0.0)
    q: float = Field(default=0.0, ge=0.0)
    r_gamma: Optional[float] = Field(default=None, ge=0.0)
    eps_mult: float = Field(default=3.0, gt=0.0)
    whole_tube: bool = False
    n_list: Optional[List[int]] = None
    method: LeastSquaresMethod = "sparse-qr"
    coupling: Coupling = "constrained"
    baseline: bool = True
    out: Optional[Path] = None
    format: Literal["csv", "markdown"] = "csv"
    quantities: Optional[List[str]] = None

    @field_validator("n_list")
    @classmethod
    def _check_n_list(cls, value: Optional[List[int]]) -> Optional[List[int]]:
        if value is None:
            return value
        if not value:
            raise ValueError("n_list must not be empty")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError(f"n_list must be strictly increasing, got {value}")
        return value

    @field_validator("quantities")
    @classmethod
    def _check_quantities(cls, value: Optional[List[str]]) -> Optional[List[str]]:
        unknown = [name for name in value or [] if name not in KNOWN_QUANTITIES]
        if unknown:
            raise ValueError(f"Unknown quantities {unknown}")
        return value

    @model_validator(mode="after")
    def _check_combination(self) -> "RunConfig":
        if self.dimension == 2 and self.kind == "interpolation":
            raise ValueError("The interpolation study is only available in 1D")
        smallest = 2 if self.dimension == 1 else 4
        if self.n_list is not None and self.n_list[0] < smallest:
            raise ValueError(f"{self.problem} needs N >= {smallest}, got {self.n_list[0]}")
        if self.q != 0.0 and self.problem == "r2r4-2d":
            raise ValueError("The r2r4-2d problem has no reaction term")
        return self

    @property
    def dimension(self) -> int:
        """Returns the spatial dimension of the problem."""
        return 1 if self.problem == "quartic-1d" else 2

    @property
    def refinements(self) -> List[int]:
        """Returns the N list, defaulting per dimension."""
        if self.n_list is not None:
            return list(self.n_list)
        return list(DEFAULT_N_LIST_1D if self.dimension == 1 else DEFAULT_N_LIST_2D)

    @property
    def tracked_quantities(self) -> List[str]:
        """Returns the error columns to tabulate."""
        if self.quantities:
            return list(self.quantities)
        key = (self.problem, self.kind) if self.dimension == 1 else ("2d", self.kind)
        return list(DEFAULT_QUANTITIES[key])

    def build_problem(self) -> ManufacturedProblem:
        """Returns the manufactured problem these parameters describe."""
        params: Dict[str, float] = {}
        if self.dimension == 1:
            params.update(alpha=self.alpha, q=self.q)
        elif self.problem == "trig-2d":
            params.update(q=self.q)
            if self.r_gamma is not None:
                params.update(r_gamma=self.r_gamma)
        if self.beta_minus is not None:
            params.update(beta_minus=self.beta_minus)
        if self.beta_plus is not None:
            params.update(beta_plus=self.beta_plus)
        return build_problem(self.problem, **params)


def load_configs(path: Path) -> Dict[str, RunConfig]:
    """Reads every named run of a YAML configuration file.

    Args:
        path: YAML file with one mapping per run name.

    Returns:
        dict: Run name to validated RunConfig, in file order.
    """
    with open(path) as config_file:
        content = yaml.safe_load(config_file)
    if not isinstance(content, dict):
        raise ParameterError(f"{path} must contain a mapping of run names to settings")
    configs = {}
    for name, section in content.items():
        if not isinstance(section, dict):
            raise ParameterError(f"Run {name} in {path} is not a mapping")
        configs[str(name)] = RunConfig(**section)
    logger.debug("Loaded %d runs from %s", len(configs), path)
    return configs


def resolve_config(
    path: Optional[Path], run: Optional[str], overrides: Mapping[str, Any]
) -> RunConfig:
    """Builds a RunConfig from an optional file section and command-line overrides.

    Overrides that are None are ignored.

    Raises:
        ParameterError: If the run is missing from the file, or a run is named
            without a file.
    """
    settings: Dict[str, Any] = {}
    if path is not None:
        configs = load_configs(path)
        if run is None:
            if len(configs) != 1:
                raise ParameterError(f"{path} holds several runs, choose one with --run")
            run = next(iter(configs))
        if run not in configs:
            raise ParameterError(f"No run named {run} in {path}")
        settings = configs[run].model_dump(exclude_unset=True)
    elif run is not None:
        raise ParameterError("--run needs --config")
    settings.update({key: value for key, value in overrides.items() if value is not None})
    return RunConfig(**settings)

