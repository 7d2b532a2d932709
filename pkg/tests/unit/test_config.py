# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

import tempfile
import unittest
from pathlib import Path

from pydantic import ValidationError

from config import RunConfig, load_configs, resolve_config  # type: ignore[import]
from fluxfem.exceptions import ParameterError

TWO_RUNS = """
table-1:
  problem: quartic-1d
  beta_minus: 2
  beta_plus: 10
  n_list: [16, 32, 64]
table-2-3:
  problem: trig-2d
  beta_minus: 100
  beta_plus: 1
  r_gamma: 0.9
  n_list: [8, 16]
"""


class TestRunConfig(unittest.TestCase):
    def test_given_no_settings_when_config_is_built_then_1d_defaults_are_used(self):
        config = RunConfig()

        self.assertEqual(config.dimension, 1)
        self.assertEqual(config.refinements, [16, 32, 64, 128, 256, 512, 1024])
        self.assertEqual(config.tracked_quantities, ["linf", "deriv_minus", "l2", "h1_semi"])
        self.assertEqual(config.method, "sparse-qr")
        self.assertEqual(config.coupling, "constrained")

    def test_given_2d_problem_when_config_is_built_then_2d_defaults_are_used(self):
        config = RunConfig(problem="r2r4-2d")

        self.assertEqual(config.refinements, [8, 16, 32, 64, 128])
        self.assertIn("flux_tube", config.tracked_quantities)

    def test_given_invalid_settings_when_config_is_built_then_validation_error_is_raised(self):
        for settings in (
            {"n_list": [32, 16]},
            {"n_list": []},
            {"n_list": [1, 2]},
            {"problem": "trig-2d", "n_list": [2, 4]},
            {"problem": "trig-2d", "kind": "interpolation"},
            {"problem": "r2r4-2d", "q": 1.0},
            {"quantities": ["energy"]},
            {"alpha": 1.0},
            {"beta_minus": 0.0},
            {"eps_mult": -1.0},
            {"coupling": "weighted"},
            {"tolerance": 1e-3},
        ):
            with self.subTest(settings=settings):
                with self.assertRaises(ValidationError):
                    RunConfig(**settings)

    def test_given_config_when_build_problem_then_parameters_are_forwarded(self):
        config = RunConfig(problem="trig-2d", beta_minus=10.0, beta_plus=2.0, r_gamma=0.5, q=1.0)

        problem = config.build_problem()

        self.assertEqual(problem.coefficient.beta_minus, 10.0)
        self.assertEqual(problem.coefficient.beta_plus, 2.0)
        self.assertEqual(problem.interface.radius, 0.5)
        self.assertEqual(problem.reaction, 1.0)

    def test_given_frozen_config_when_modified_then_validation_error_is_raised(self):
        config = RunConfig()

        with self.assertRaises(ValidationError):
            config.q = 1.0  # type: ignore[misc]


class TestLoadConfigs(unittest.TestCase):
    def setUp(self):
        self.tmp_dir = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp_dir.cleanup)
        self.path = Path(self.tmp_dir.name) / "studies.yaml"
        self.path.write_text(TWO_RUNS)

    def test_given_yaml_file_when_load_configs_then_runs_are_returned_in_file_order(self):
        configs = load_configs(self.path)

        self.assertEqual(list(configs), ["table-1", "table-2-3"])
        self.assertEqual(configs["table-2-3"].r_gamma, 0.9)

    def test_given_file_without_mapping_when_load_configs_then_parameter_error_is_raised(self):
        self.path.write_text("- 1\n- 2\n")

        with self.assertRaises(ParameterError):
            load_configs(self.path)

    def test_given_run_and_overrides_when_resolve_config_then_overrides_win(self):
        config = resolve_config(self.path, "table-1", {"beta_plus": 20.0, "q": None})

        self.assertEqual(config.beta_minus, 2.0)
        self.assertEqual(config.beta_plus, 20.0)
        self.assertEqual(config.q, 0.0)
        self.assertEqual(config.n_list, [16, 32, 64])

    def test_given_several_runs_and_no_name_when_resolve_config_then_parameter_error(self):
        with self.assertRaises(ParameterError):
            resolve_config(self.path, None, {})

    def test_given_unknown_run_when_resolve_config_then_parameter_error_is_raised(self):
        with self.assertRaises(ParameterError):
            resolve_config(self.path, "table-9", {})

    def test_given_run_without_file_when_resolve_config_then_parameter_error_is_raised(self):
        with self.assertRaises(ParameterError):
            resolve_config(None, "table-1", {})

    def test_given_repository_studies_when_loaded_then_every_run_validates(self):
        configs = load_configs(Path(__file__).resolve().parents[2] / "studies.yaml")

        self.assertIn("table-1", configs)
        self.assertTrue(all(config.out is None for config in configs.values()))
