#!/usr/bin/env python3
# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Command-line front end for solves and refinement studies."""

import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
from pydantic import ValidationError

from config import RunConfig, load_configs, resolve_config
from fluxfem.exceptions import FluxFemError, StudyError
from fluxfem.fem2d import COUPLINGS, extract_interface_flux, solve_augmented, solve_standard_fem
from fluxfem.flux1d import recover_fluxes
from fluxfem.ifem1d import solve, uniform_grid
from fluxfem.mesh2d import build_mesh, extract_tube
from fluxfem.norms import error_norms_1d, error_norms_2d
from fluxfem.numerics import LEAST_SQUARES_METHODS
from study import (
    ConvergenceTable,
    emit_frame,
    emit_summary,
    estimate_orders,
    render_markdown,
    report_frame,
    run_study,
    summarize,
)

logger = logging.getLogger(__name__)

DEFAULT_STUDIES_FILE = Path(__file__).resolve().parent.parent / "studies.yaml"
SUFFIXES = {"csv": ".csv", "markdown": ".md"}


def _parse_list(value: Optional[str], kind=float) -> Optional[List[Any]]:
    if value is None:
        return None
    try:
        return [kind(item) for item in value.replace(" ", "").split(",") if item]
    except ValueError as e:
        raise click.BadParameter(f"Expected a comma-separated list, got {value!r}") from e


def _echo_report(values: Dict[str, float]) -> None:
    for name, value in values.items():
        click.echo(f"{name:<22} {value:.6e}")


def _write_report(reports: Dict[str, Dict[str, float]], fmt: str, out: Path, title: str):
    try:
        emit_frame(report_frame(reports), fmt, out, title)
    except OSError as e:
        raise click.ClickException(f"Cannot write {out}: {e}") from e
    click.echo(f"Wrote {out}")


def _run_and_show(config: RunConfig, title: Optional[str] = None) -> ConvergenceTable:
    try:
        table = run_study(config, title)
    except StudyError as e:
        if config.out is None and e.table.rows:
            click.echo(render_markdown(e.table))
        raise click.ClickException(str(e)) from e
    if config.out is None:
        click.echo(render_markdown(table))
    return table


common_options = [
    click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path)),
    click.option("--run", "run_name", help="Section of the config file to run."),
    click.option("--beta-minus", type=float, help="Coefficient on the minus side."),
    click.option("--beta-plus", type=float, help="Coefficient on the plus side."),
    click.option("--q", type=float, help="Constant reaction coefficient, q >= 0."),
    click.option("--n-list", help="Comma-separated refinements, e.g. 16,32,64."),
    click.option("--out", type=click.Path(path_type=Path), help="Output file."),
    click.option("--format", "fmt", type=click.Choice(["csv", "markdown"])),
]

two_d_options = [
    click.option("--problem", type=click.Choice(["trig-2d", "r2r4-2d"])),
    click.option("--r-gamma", type=float, help="Interface radius; 0 removes the interface."),
    click.option("--eps-mult", type=float, help="Tube half-width in units of h."),
    click.option("--whole-tube/--thin-tube", default=None, help="Use the whole domain as tube."),
    click.option("--method", type=click.Choice(LEAST_SQUARES_METHODS)),
    click.option(
        "--coupling",
        type=click.Choice(COUPLINGS),
        help="Solve u from the Galerkin rows first, or everything in one least-squares solve.",
    ),
    click.option("--baseline/--no-baseline", default=None, help="Also run standard FEM."),
]

output_options = [
    click.option("--out", type=click.Path(path_type=Path), help="Also write the report here."),
    click.option(
        "--format", "fmt", type=click.Choice(["csv", "markdown"]), default="csv", show_default=True
    ),
]


def _apply(options):
    def decorator(func):
        for option in reversed(options):
            func = option(func)
        return func

    return decorator


@click.group()
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"]),
    default="INFO",
    show_default=True,
)
def main(log_level: str):
    """Interface problem solvers with flux recovery and refinement studies."""
    logging.basicConfig(
        level=getattr(logging, log_level),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--alpha", type=float, default=1.0 / 3.0, show_default=True)
@click.option("--beta-minus", type=float, default=2.0, show_default=True)
@click.option("--beta-plus", type=float, default=10.0, show_default=True)
@click.option("--q", type=float, default=0.0, show_default=True)
@click.option("--n", type=int, default=64, show_default=True)
@_apply(output_options)
def solve1d(
    alpha: float,
    beta_minus: float,
    beta_plus: float,
    q: float,
    n: int,
    out: Optional[Path],
    fmt: str,
):
    """Solve the 1D interface problem once and print errors and recovered fluxes."""
    try:
        config = RunConfig(
            problem="quartic-1d", alpha=alpha, beta_minus=beta_minus, beta_plus=beta_plus, q=q
        )
        problem = config.build_problem()
        sol = solve(problem, uniform_grid(n, alpha))
        report = error_norms_1d(sol, problem)
        fluxes = recover_fluxes(sol, problem)
    except (FluxFemError, ValidationError) as e:
        raise click.ClickException(str(e)) from e
    values = {
        **report.as_dict(),
        "gamma_minus": fluxes.gamma_minus,
        "gamma_plus": fluxes.gamma_plus,
        "gamma_0": fluxes.gamma_0,
        "gamma_1": fluxes.gamma_1,
    }
    _echo_report(values)
    if out is not None:
        _write_report({"ifem": values}, fmt, out, f"{problem.name} N = {n}")


@main.command()
@_apply(common_options)
@click.option(
    "--problem",
    type=click.Choice(["quartic-1d"]),
    help="The 1D problem; the 1D solve is square, so the least-squares --method is 2D only.",
)
@click.option("--kind", type=click.Choice(["galerkin", "interpolation"]))
@click.option("--alpha", type=float, help="Interface location in (0, 1).")
def study1d(
    config_path, run_name, beta_minus, beta_plus, q, n_list, out, fmt, problem, kind, alpha
):
    """Run a 1D refinement study."""
    overrides = dict(
        problem=problem,
        kind=kind,
        alpha=alpha,
        beta_minus=beta_minus,
        beta_plus=beta_plus,
        q=q,
        n_list=_parse_list(n_list, int),
        out=out,
        format=fmt,
    )
    if config_path is None and problem is None:
        overrides["problem"] = "quartic-1d"
    try:
        config = resolve_config(config_path, run_name, overrides)
    except (FluxFemError, ValidationError) as e:
        raise click.ClickException(str(e)) from e
    if config.dimension != 1:
        raise click.ClickException(f"{config.problem} is not a 1D problem")
    _run_and_show(config, run_name)


@main.command()
@_apply(two_d_options)
@click.option("--beta-minus", type=float, help="Coefficient inside the circle.")
@click.option("--beta-plus", type=float, help="Coefficient outside the circle.")
@click.option("--q", type=float, help="Constant reaction coefficient, q >= 0.")
@click.option("--n", type=int, default=32, show_default=True)
@click.option("--samples", type=int, default=16, show_default=True)
@_apply(output_options)
def solve2d(
    problem,
    r_gamma,
    eps_mult,
    whole_tube,
    method,
    coupling,
    baseline,
    beta_minus,
    beta_plus,
    q,
    n,
    samples,
    out,
    fmt,
):
    """Solve a 2D problem once and print errors and interface flux samples."""
    overrides = dict(
        problem=problem or "trig-2d",
        r_gamma=r_gamma,
        eps_mult=eps_mult,
        whole_tube=whole_tube,
        method=method,
        coupling=coupling,
        baseline=baseline,
        beta_minus=beta_minus,
        beta_plus=beta_plus,
        q=q,
    )
    try:
        config = resolve_config(None, None, overrides)
        manufactured = config.build_problem()
        mesh = build_mesh(manufactured.domain, n)
        epsilon = float("inf") if config.whole_tube else config.eps_mult * mesh.h
        tube = extract_tube(mesh, manufactured.interface, epsilon)
        sol = solve_augmented(manufactured, mesh, tube, config.method, config.coupling)
        reports = {"augmented": error_norms_2d(sol, manufactured).as_dict()}
        _echo_report(reports["augmented"])
        if config.baseline:
            standard = solve_standard_fem(manufactured, mesh)
            reports["standard"] = error_norms_2d(standard, manufactured, tube).as_dict()
            click.echo("standard FEM:")
            _echo_report(reports["standard"])
        if not manufactured.interface.is_degenerate:
            flux = extract_interface_flux(sol, manufactured.interface, samples)
            click.echo("theta_index  side   v.n            beta grad u.n")
            for side, values in flux.v_normal.items():
                for k, value in enumerate(values):
                    gradient = flux.beta_grad_normal[side][k]
                    click.echo(f"{k:<12d} {side.value:<6} {value: .6e}  {gradient: .6e}")
    except (FluxFemError, ValidationError) as e:
        raise click.ClickException(str(e)) from e
    if out is not None:
        _write_report(reports, fmt, out, f"{manufactured.name} N = {n}")


@main.command()
@_apply(common_options)
@_apply(two_d_options)
def study2d(
    config_path,
    run_name,
    beta_minus,
    beta_plus,
    q,
    n_list,
    out,
    fmt,
    problem,
    r_gamma,
    eps_mult,
    whole_tube,
    method,
    coupling,
    baseline,
):
    """Run a 2D refinement study of the augmented method."""
    overrides = dict(
        problem=problem,
        beta_minus=beta_minus,
        beta_plus=beta_plus,
        q=q,
        n_list=_parse_list(n_list, int),
        out=out,
        format=fmt,
        r_gamma=r_gamma,
        eps_mult=eps_mult,
        whole_tube=whole_tube,
        method=method,
        coupling=coupling,
        baseline=baseline,
    )
    if config_path is None and problem is None:
        overrides["problem"] = "trig-2d"
    try:
        config = resolve_config(config_path, run_name, overrides)
    except (FluxFemError, ValidationError) as e:
        raise click.ClickException(str(e)) from e
    if config.dimension != 2:
        raise click.ClickException(f"{config.problem} is not a 2D problem")
    _run_and_show(config, run_name)


@main.command()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, path_type=Path),
    default=DEFAULT_STUDIES_FILE,
    show_default=True,
)
@click.option(
    "--out-dir", type=click.Path(file_okay=False, path_type=Path), default=Path("tables")
)
@click.option("--format", "fmt", type=click.Choice(["csv", "markdown"]), default="markdown")
@click.option("--only", multiple=True, help="Run only these sections; repeatable.")
def tables(config_path: Path, out_dir: Path, fmt: str, only):
    """Regenerate every study of a configuration file plus a summary of average orders."""
    try:
        configs = load_configs(config_path)
    except (FluxFemError, ValidationError) as e:
        raise click.ClickException(str(e)) from e
    unknown = sorted(set(only) - set(configs))
    if unknown:
        raise click.ClickException(f"Unknown sections {unknown} in {config_path}")
    out_dir.mkdir(parents=True, exist_ok=True)
    results: Dict[str, ConvergenceTable] = {}
    failures = []
    for name, config in configs.items():
        if only and name not in only:
            continue
        path = out_dir / f"{name}{SUFFIXES[fmt]}"
        config = config.model_copy(update={"out": path, "format": fmt})
        try:
            results[name] = run_study(config, name)
        except StudyError as e:
            results[name] = e.table
            failures.append(name)
        click.echo(f"Wrote {path}")
    summary_path = out_dir / f"summary{SUFFIXES[fmt]}"
    emit_summary(summarize(results), fmt, summary_path)
    click.echo(f"Wrote {summary_path}")
    if failures:
        raise click.ClickException(f"Studies with failed refinements: {failures}")


@main.command()
@click.option("--errors", required=True, help="Comma-separated errors, coarsest first.")
@click.option("--n-list", required=True, help="Comma-separated N values.")
@click.option("--skip-first", is_flag=True, help="Leave the first transition out of the average.")
def orders(errors: str, n_list: str, skip_first: bool):
    """Estimate convergence orders from an error sequence."""
    try:
        estimate = estimate_orders(_parse_list(errors), _parse_list(n_list, int), skip_first)
    except FluxFemError as e:
        raise click.ClickException(str(e)) from e
    for n, error, order in zip(_parse_list(n_list, int), _parse_list(errors), estimate.orders):
        click.echo(f"{n:>6d} {error:.3e} {'' if order is None else f'{order:.3f}'}")
    average = "n/a" if estimate.average is None else f"{estimate.average:.3f}"
    click.echo(f"average {average}")


if __name__ == "__main__":
    main()
