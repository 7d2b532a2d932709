#!/usr/bin/env python3
# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Refinement studies of studies.yaml checked against their expected convergence orders."""

import itertools
import logging
from pathlib import Path

import numpy as np
import pytest

from config import load_configs  # type: ignore[import]
from fluxfem.fem2d import build_augmented_system, solve_augmented
from fluxfem.mesh2d import build_mesh, extract_tube
from fluxfem.norms import error_norms_2d
from fluxfem.numerics import DENSE_SVD_MAX_COLUMNS
from fluxfem.problems import r2r4_problem_2d, trig_problem_2d
from study import run_study  # type: ignore[import]

logger = logging.getLogger(__name__)

STUDIES = load_configs(Path(__file__).resolve().parents[2] / "studies.yaml")
ORDER_AGREEMENT = 0.25
SOLVER_AGREEMENT = 1e-6


@pytest.fixture(scope="module")
def averages():
    """Runs each named study once per module and returns its average orders by method."""
    cache = {}

    def run(name):
        if name not in cache:
            table = run_study(STUDIES[name].model_copy(update={"out": None}), name)
            logger.info("%s: %s", name, table.averages)
            cache[name] = table.averages
        return cache[name]

    return run


def test_given_quartic_1d_problem_when_refined_then_solution_and_derivative_are_second_order(
    averages,
):
    orders = averages("table-1")["ifem"]

    assert 1.75 <= orders["linf"] <= 2.25
    assert 1.85 <= orders["deriv_minus"] <= 2.35


def test_given_quartic_1d_problem_when_interpolated_then_interpolation_rates_hold(averages):
    orders = averages("interpolation-1d")["interpolation"]

    assert orders["interp_l2"] >= 1.75
    assert orders["interp_h1"] >= 0.75
    assert orders["kappa_minus"] >= 0.4


def test_given_reaction_when_flux_functionals_are_refined_then_they_converge(averages):
    orders = averages("flux-functionals-1d")["ifem"]

    assert orders["flux_minus"] >= 1.75
    assert orders["flux_plus"] >= 1.75


@pytest.mark.parametrize("name", ["table-2-3", "table-5"])
def test_given_trig_problem_when_refined_then_augmented_flux_beats_standard_gradient(
    averages, name
):
    orders = averages(name)

    assert 1.7 <= orders["augmented"]["l2"] <= 2.2
    assert orders["augmented"]["flux_tube"] >= 1.3
    assert orders["augmented"]["flux_tube"] - orders["standard"]["h1_semi"] >= 0.3


@pytest.mark.parametrize(
    "names",
    [
        ("table-6-3h", "table-6-10h", "table-6-whole"),
        ("table-2-3", "table-4-r099", "table-4-r0"),
    ],
)
def test_given_tube_widths_and_interface_locations_when_refined_then_orders_agree(
    averages, names
):
    for first, second in itertools.combinations(names, 2):
        for quantity in ("l2", "flux_tube"):
            a = averages(first)["augmented"][quantity]
            b = averages(second)["augmented"][quantity]
            assert abs(a - b) <= ORDER_AGREEMENT, f"{quantity}: {first} {a}, {second} {b}"


@pytest.mark.parametrize("name", ["table-6-3h", "table-6-reversed"])
def test_given_nonhomogeneous_jump_when_refined_then_flux_improves_on_standard_fem(
    averages, name
):
    orders = averages(name)
    flux = orders["augmented"]["flux_tube"]

    assert 1.7 <= orders["augmented"]["l2"] <= 2.2
    assert flux >= 1.2 or flux - orders["standard"]["h1_semi"] >= 0.2


@pytest.mark.parametrize(
    "problem",
    [
        trig_problem_2d(),
        trig_problem_2d(q_const=1.0),
        r2r4_problem_2d(1.0, 1000.0),
    ],
    ids=["trig", "trig-reaction", "r2r4"],
)
@pytest.mark.parametrize("n", [8, 16])
def test_given_small_system_when_solved_by_svd_and_sparse_qr_then_results_agree(problem, n):
    mesh = build_mesh(problem.domain, n)
    tube = extract_tube(mesh, problem.interface)
    if build_augmented_system(problem, mesh, tube).shape[1] > DENSE_SVD_MAX_COLUMNS:
        pytest.skip("System too large for the dense path")

    by_svd = solve_augmented(problem, mesh, tube, "svd")
    by_qr = solve_augmented(problem, mesh, tube, "sparse-qr")

    assert np.linalg.norm(by_svd.u - by_qr.u) <= SOLVER_AGREEMENT * np.linalg.norm(by_svd.u)
    svd_errors = error_norms_2d(by_svd, problem).as_dict()
    qr_errors = error_norms_2d(by_qr, problem).as_dict()
    assert svd_errors.keys() == qr_errors.keys()
    for name, value in svd_errors.items():
        assert abs(value - qr_errors[name]) <= SOLVER_AGREEMENT * max(1.0, value), name


def test_given_same_configuration_when_run_twice_then_tables_are_identical():
    config = STUDIES["table-1"].model_copy(update={"out": None, "n_list": [16, 32, 64]})

    first, second = run_study(config), run_study(config)

    assert first.to_frame().equals(second.to_frame())
