# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Grid refinement studies: solve at each N, measure errors and estimate orders."""

import logging
import math
from pathlib import Path
from typing import Dict, List, Literal, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from jinja2 import Environment, FileSystemLoader  # type: ignore[import]
from pydantic import BaseModel, ConfigDict, Field

from config import RunConfig
from fluxfem.exceptions import FluxFemError, ParameterError, StudyError
from fluxfem.fem2d import solve_augmented, solve_standard_fem
from fluxfem.ifem1d import solve, uniform_grid
from fluxfem.mesh2d import build_mesh, extract_tube
from fluxfem.norms import ErrorReport, error_norms_1d, error_norms_2d, interpolation_errors_1d
from fluxfem.problems import ManufacturedProblem

logger = logging.getLogger(__name__)

TEMPLATES_DIR = Path(__file__).parent / "templates"
ERROR_FORMAT = "{:.3e}"
ORDER_FORMAT = "{:.3f}"
REPORT_FORMAT = "{:.6e}"
UNDER_RESOLVED_RADIUS_FACTOR = 4.0
OutputFormat = Literal["csv", "markdown"]
FAILED = "failed"
NORM_LABELS = {
    "linf": "max abs(u - u_h)",
    "linf_nodal": "max abs(u - u_h) at nodes",
    "l2": "L2(u - u_h)",
    "h1_semi": "H1 seminorm(u - u_h)",
    "deriv_minus": "abs error of recovered du/dx at alpha-",
    "deriv_plus": "abs error of recovered du/dx at alpha+",
    "deriv_minus_raw": "abs error of du_h/dx at alpha-",
    "deriv_plus_raw": "abs error of du_h/dx at alpha+",
    "flux_minus": "abs error of flux functional at alpha-",
    "flux_plus": "abs error of flux functional at alpha+",
    "flux_0": "abs error of flux functional at 0",
    "flux_1": "abs error of flux functional at 1",
    "interp_l2": "L2(u - I_h u)",
    "interp_h1": "H1 seminorm(u - I_h u)",
    "kappa_minus": "abs error of interpolant slope at alpha-",
    "kappa_plus": "abs error of interpolant slope at alpha+",
    "flux_tube": "L2 over tube(v_h + beta grad u)",
    "flux_tube_raw": "L2 over tube(beta grad u_h - beta grad u)",
    "interface_flux": "L2 over interface(v_h.n + beta grad u.n)",
    "interface_flux_minus": "L2 over interface minus side(v_h.n + beta grad u.n)",
    "interface_flux_plus": "L2 over interface plus side(v_h.n + beta grad u.n)",
    "interface_flux_raw": "L2 over interface(beta grad u_h.n - beta grad u.n)",
}
SOLVER_FAILURES = (FluxFemError, np.linalg.LinAlgError, RuntimeError)


class OrderEstimate(BaseModel):
    """Orders between consecutive refinements and their average.

    `orders[k]` compares row k with row k - 1, so `orders[0]` is always None.
    """

    model_config = ConfigDict(frozen=True)

    orders: List[Optional[float]]
    average: Optional[float]
    degenerate: List[int] = Field(default_factory=list)
    excluded: List[int] = Field(default_factory=list)


def estimate_orders(
    errors: Sequence[float], ns: Sequence[int], skip_first: bool = False
) -> OrderEstimate:
    """Estimates p_k = log(E_{k-1} / E_k) / log(N_k / N_{k-1}).

    Args:
        errors: Errors in refinement order.
        ns: The matching N values, strictly increasing.
        skip_first: Leave the first transition out of the average.

    Returns:
        OrderEstimate: Orders, the average over defined entries and the indices of
            entries that are degenerate (a non-positive or non-finite error) or
            excluded from the average.
    """
    if len(errors) != len(ns):
        raise ParameterError(f"Got {len(errors)} errors for {len(ns)} values of N")
    if len(errors) < 2:
        raise ParameterError("Orders need at least two refinements")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ParameterError(f"N values must be strictly increasing, got {list(ns)}")
    orders: List[Optional[float]] = [None]
    degenerate = []
    for k in range(1, len(errors)):
        coarse, fine = errors[k - 1], errors[k]
        if not (math.isfinite(coarse) and math.isfinite(fine)) or coarse <= 0.0 or fine <= 0.0:
            orders.append(None)
            degenerate.append(k)
            continue
        orders.append(math.log(coarse / fine) / math.log(ns[k] / ns[k - 1]))
    excluded = [1] if skip_first and len(errors) > 2 else []
    defined = [p for k, p in enumerate(orders) if p is not None and k not in excluded]
    average = float(np.mean(defined)) if defined else None
    if degenerate:
        logger.warning("Orders at rows %s are degenerate and left out of the average", degenerate)
    return OrderEstimate(orders=orders, average=average, degenerate=degenerate, excluded=excluded)


class StudyRow(BaseModel):
    """Errors of one method at one N; `failure` is set when the solve failed."""

    n: int
    method: str
    errors: Dict[str, float]
    orders: Dict[str, Optional[float]] = Field(default_factory=dict)
    failure: Optional[str] = None


class ConvergenceTable(BaseModel):
    """Rows of a refinement study with per-method average orders."""

    title: str
    quantities: List[str]
    rows: List[StudyRow] = Field(default_factory=list)
    averages: Dict[str, Dict[str, Optional[float]]] = Field(default_factory=dict)
    notes: List[str] = Field(default_factory=list)

    @property
    def methods(self) -> List[str]:
        """Returns the methods in order of first appearance."""
        return list(dict.fromkeys(row.method for row in self.rows))

    def method_rows(self, method: str) -> List[StudyRow]:
        """Returns the rows of one method in refinement order."""
        return [row for row in self.rows if row.method == method]

    def to_frame(self) -> pd.DataFrame:
        """Returns the formatted table, one error and one order column per quantity."""
        records = []
        for row in self.rows:
            record = {"N": row.n, "method": row.method}
            for name in self.quantities:
                error = row.errors.get(name, math.nan)
                order = row.orders.get(name)
                record[f"{name}_error"] = "" if math.isnan(error) else ERROR_FORMAT.format(error)
                record[f"{name}_order"] = "" if order is None else ORDER_FORMAT.format(order)
            record["failure"] = row.failure or ""
            records.append(record)
        columns = ["N", "method"]
        for name in self.quantities:
            columns += [f"{name}_error", f"{name}_order"]
        frame = pd.DataFrame.from_records(records, columns=columns + ["failure"])
        if not frame["failure"].astype(bool).any():
            frame = frame.drop(columns="failure")
        return frame


def _under_resolved(config: RunConfig, problem: ManufacturedProblem) -> bool:
    """Returns whether the coarsest 2D mesh is too coarse for the interface radius."""
    if config.dimension != 2 or problem.interface.is_degenerate:
        return False
    h = problem.domain.side / config.refinements[0]
    return problem.interface.radius < UNDER_RESOLVED_RADIUS_FACTOR * h


def _solve_row(config: RunConfig, problem: ManufacturedProblem, n: int) -> Dict[str, ErrorReport]:
    """Returns the error report of every method at one refinement."""
    if config.dimension == 1:
        grid = uniform_grid(n, config.alpha)
        if config.kind == "interpolation":
            return {"interpolation": interpolation_errors_1d(problem, grid)}
        return {"ifem": error_norms_1d(solve(problem, grid), problem)}
    mesh = build_mesh(problem.domain, n)
    epsilon = math.inf if config.whole_tube else config.eps_mult * mesh.h
    tube = extract_tube(mesh, problem.interface, epsilon)
    reports = {
        "augmented": error_norms_2d(
            solve_augmented(problem, mesh, tube, config.method, config.coupling), problem
        )
    }
    if config.baseline:
        reports["standard"] = error_norms_2d(solve_standard_fem(problem, mesh), problem, tube)
    return reports


def _fill_orders(table: ConvergenceTable, skip_first: bool) -> None:
    for method in table.methods:
        if method == FAILED:
            continue
        rows = table.method_rows(method)
        table.averages[method] = {}
        for name in table.quantities:
            if len(rows) < 2:
                table.averages[method][name] = None
                continue
            errors = [row.errors.get(name, math.nan) for row in rows]
            estimate = estimate_orders(errors, [row.n for row in rows], skip_first)
            for row, order in zip(rows, estimate.orders):
                row.orders[name] = order
            table.averages[method][name] = estimate.average


def run_study(config: RunConfig, title: Optional[str] = None) -> ConvergenceTable:
    """Runs a refinement study and writes its table when an output path is set.

    A refinement whose solve raises a FluxFemError, a numpy LinAlgError or a
    RuntimeError from the sparse factorizations is recorded as failed, and the
    remaining ones still run.

    Args:
        config: The study parameters.
        title: Table heading, defaults to the problem identifier.

    Returns:
        ConvergenceTable: One row per method and N with orders and averages.

    Raises:
        StudyError: Carrying the partial table and the failing N values.
    """
    problem = config.build_problem()
    table = ConvergenceTable(title=title or problem.name, quantities=config.tracked_quantities)
    failed = []
    for n in config.refinements:
        try:
            reports = _solve_row(config, problem, n)
        except SOLVER_FAILURES as e:
            logger.error("Refinement N = %d of %s failed: %s", n, table.title, e)
            failed.append(n)
            table.rows.append(StudyRow(n=n, method=FAILED, errors={}, failure=str(e)))
            continue
        for method, report in reports.items():
            measured = report.as_dict()
            errors = {name: measured.get(name, math.nan) for name in table.quantities}
            table.rows.append(StudyRow(n=n, method=method, errors=errors))
        logger.info("Finished N = %d of %s", n, table.title)
    skip_first = _under_resolved(config, problem)
    if skip_first:
        note = "first transition left out of the averages: coarsest mesh under-resolves Gamma"
        logger.warning("%s: %s", table.title, note)
        table.notes.append(note)
    _fill_orders(table, skip_first)
    if config.out is not None:
        emit(table, config.format, config.out)
    if failed:
        raise StudyError(f"{table.title}: refinements {failed} failed", table, failed)
    return table


def _render(**context) -> str:
    environment = Environment(loader=FileSystemLoader(TEMPLATES_DIR))
    return environment.get_template("convergence_table.md.j2").render(**context)


def render_markdown(table: ConvergenceTable) -> str:
    """Renders a table with the same formatted values as the CSV output."""
    frame = table.to_frame()
    averages = {
        method: {
            name: "" if value is None else ORDER_FORMAT.format(value)
            for name, value in values.items()
        }
        for method, values in table.averages.items()
    }
    return _render(
        title=table.title,
        columns=list(frame.columns),
        rows=frame.astype(str).values.tolist(),
        quantities=table.quantities,
        averages=averages,
        notes=table.notes,
    )


def _csv_header(column: str) -> str:
    """Appends the measured norm to error columns, e.g. `l2_error[L2(u - u_h)]`."""
    name, _, suffix = column.rpartition("_")
    if suffix != "error" or name not in NORM_LABELS:
        return column
    return f"{column}[{NORM_LABELS[name]}]"


def emit(table: ConvergenceTable, fmt: OutputFormat, path: Path) -> Path:
    """Writes a table as CSV or markdown.

    CSV error columns name the norm they hold in brackets.

    Raises:
        ParameterError: If the table has no rows or the format is unknown.
        OSError: If the path cannot be written.
    """
    if not table.rows:
        raise ParameterError("Cannot emit an empty table")
    path = Path(path)
    if fmt == "csv":
        frame = table.to_frame()
        frame.columns = [_csv_header(column) for column in frame.columns]
        frame.to_csv(path, index=False, lineterminator="\n")
    elif fmt == "markdown":
        path.write_text(render_markdown(table))
    else:
        raise ParameterError(f"Unknown output format {fmt}")
    logger.info("Wrote %s table to %s", fmt, path)
    return path


def summarize(tables: Mapping[str, ConvergenceTable]) -> pd.DataFrame:
    """Returns one row per study and method with the average order of each quantity."""
    records = []
    for name, table in tables.items():
        for method, averages in table.averages.items():
            record = {"study": name, "method": method}
            for quantity, value in averages.items():
                record[quantity] = "" if value is None else ORDER_FORMAT.format(value)
            records.append(record)
    return pd.DataFrame.from_records(records).fillna("")


def report_frame(reports: Mapping[str, Mapping[str, float]]) -> pd.DataFrame:
    """Returns one row per quantity and one column per method of single solves."""
    quantities = list(dict.fromkeys(name for values in reports.values() for name in values))
    records = []
    for name in quantities:
        record = {"quantity": name}
        for method, values in reports.items():
            value = values.get(name)
            record[method] = "" if value is None else REPORT_FORMAT.format(value)
        records.append(record)
    return pd.DataFrame.from_records(records, columns=["quantity", *reports])


def emit_frame(frame: pd.DataFrame, fmt: OutputFormat, path: Path, title: str) -> Path:
    """Writes an already formatted frame as CSV or a markdown table.

    Raises:
        ParameterError: If the format is unknown.
    """
    path = Path(path)
    if fmt == "csv":
        frame.to_csv(path, index=False, lineterminator="\n")
    elif fmt == "markdown":
        content = _render(
            title=title,
            columns=list(frame.columns),
            rows=frame.astype(str).values.tolist(),
            averages={},
            notes=[],
        )
        path.write_text(content)
    else:
        raise ParameterError(f"Unknown output format {fmt}")
    logger.info("Wrote %s to %s", title, path)
    return path


def emit_summary(summary: pd.DataFrame, fmt: OutputFormat, path: Path) -> Path:
    """Writes the summary of average orders as CSV or a markdown table."""
    return emit_frame(summary, fmt, path, "Average orders")
