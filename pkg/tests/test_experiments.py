import math

import numpy as np
import pytest
from freezegun import freeze_time

from greybox_gp import (
    DegenerateData,
    IllConditionedKernel,
    InvalidArgument,
    PipelineError,
    TrainingSet,
    read_mask,
    read_report,
    read_training_set,
    run_experiment,
    write_mask,
)
from greybox_gp._config import (
    ExperimentConfig,
    PlateBoundaryParams,
    SdofSubnyquistParams,
    parse_config,
)
from greybox_gp._experiments import generate, output_dir
from greybox_gp._experiments._beam import modal_breakdown, principal_modes
from greybox_gp._experiments._bridge import split_by_time
from greybox_gp._experiments._common import split_every, stage
from greybox_gp._experiments._plate import grid_mask, grid_stride, strip_mask
from greybox_gp._experiments._plate import simulate as simulate_plate
from greybox_gp._experiments._sdof import frequency_zone, simulate
from greybox_gp._io import dump_report

SMALL_PLATE = {
    "nx": 20,
    "ny": 20,
    "spacing": 1.0 / 21,
    "true_modes": 10,
    "model_modes": 20,
    "densities": [0.5, 0.25],
}


def small_config(experiment, seed=1, n_starts=2, **params):
    return parse_config(
        {
            "schema_version": 1,
            "experiment": experiment,
            "seed": seed,
            "params": params,
            "optimizer": {"n_starts": n_starts},
        }
    )


class TestStage(object):
    def test_wraps_library_errors(self):
        with pytest.raises(PipelineError) as exc_info:
            with stage("fit:se"):
                raise DegenerateData("constant targets")
        assert exc_info.value.stage == "fit:se"
        assert isinstance(exc_info.value.__cause__, DegenerateData)
        assert str(exc_info.value) == "[fit:se] constant targets"

    def test_keeps_the_innermost_stage(self):
        with pytest.raises(PipelineError) as exc_info:
            with stage("outer"):
                with stage("inner"):
                    raise DegenerateData("x")
        assert exc_info.value.stage == "inner"

    def test_other_errors_pass_through(self):
        with pytest.raises(KeyError):
            with stage("x"):
                raise KeyError("y")


class TestHelpers(object):
    def test_split_every(self):
        train, test = split_every(7, 3)
        assert list(train) == [0, 3, 6]
        assert list(test) == [1, 2, 4, 5]

    def test_frequency_zone(self):
        t = np.arange(100) * 0.5
        lo, hi = frequency_zone(t, 2)
        assert lo == pytest.approx(2 * math.pi)
        assert hi == pytest.approx(4 * math.pi)
        lo, hi = frequency_zone(t, 1)
        assert lo == pytest.approx(2 * math.pi / t[-1])
        assert hi == pytest.approx(2 * math.pi)

    def test_split_by_time(self):
        t = np.arange(100.0)
        data = TrainingSet(np.column_stack([t, t]), t)
        train, test = split_by_time(data, 0.2, 0.2)
        assert train.X[:, 0].max() < test.X[:, 0].min()
        assert len(train) == 20
        assert len(test) == 20

    def test_split_by_time_fractions(self):
        data = TrainingSet(np.arange(10.0), np.arange(10.0))
        with pytest.raises(ValueError):
            split_by_time(data, 0.7, 0.5)

    def test_strip_mask(self, square_domain):
        points = square_domain.interior_points()
        inside = strip_mask(points, square_domain, (1.0 / 3.0, 2.0 / 3.0))
        extent = 23 * square_domain.spacing
        assert np.all(points[inside, 0] >= extent / 3)
        assert np.all(points[inside, 0] <= 2 * extent / 3)
        assert 0 < inside.sum() < len(points)

    @pytest.mark.parametrize(
        "density, stride", [(1.0, 1), (0.5, 1), (0.25, 2), (0.06, 4), (0.016, 8)]
    )
    def test_grid_stride(self, density, stride):
        assert grid_stride(density) == stride

    @pytest.mark.parametrize("density", [0.0, 1.5])
    def test_grid_stride_rejects(self, density):
        with pytest.raises(InvalidArgument):
            grid_stride(density)

    def test_grid_mask(self, square_domain):
        points = square_domain.interior_points()
        on_grid = grid_mask(square_domain, 4)
        assert on_grid.sum() == 36
        nodes = np.rint(points[on_grid] / square_domain.spacing).astype(int)
        assert np.all(nodes % 4 == 0)
        assert grid_mask(square_domain, 1).all()

    def test_plate_field_scale(self):
        p = PlateBoundaryParams(
            nx=20,
            ny=20,
            spacing=1.0 / 21,
            true_modes=30,
            model_modes=12,
            signal_variance=2.0,
        )
        basis, field, data = simulate_plate(p, 3)
        inside = basis.domain.mask
        assert basis.size == 12
        assert np.mean(field[inside] ** 2) == pytest.approx(2.0)
        assert np.all(field[inside] > 0)
        assert np.all(field[~inside] == 0)
        assert np.std(data.y - field[inside]) == pytest.approx(0.01, rel=0.2)

    def test_principal_modes_of_separable_field(self):
        t = np.linspace(0, 1, 30)
        x = np.linspace(0, 1, 12)
        field = np.outer(np.sin(5 * t), x**2)
        field += 0.1 * np.outer(np.cos(3 * t), np.sin(np.pi * x))
        spatial, temporal = principal_modes(field, 2)
        assert spatial.shape == (12, 2)
        assert temporal.shape == (30, 2)
        assert np.allclose(temporal @ spatial.T, field)

    def test_modal_breakdown_of_exact_prediction(self, rng):
        field = rng.standard_normal((20, 6))
        breakdown = modal_breakdown(field, field.copy(), 2)
        assert set(breakdown) == {
            "spatial_mode1_nmse",
            "temporal_mode1_nmse",
            "spatial_mode2_nmse",
            "temporal_mode2_nmse",
        }
        assert all(v == pytest.approx(0.0, abs=1e-20) for v in breakdown.values())

    def test_modal_breakdown_ignores_mode_sign(self, rng):
        field = rng.standard_normal((20, 6))
        spatial, temporal = principal_modes(field, 1)
        rank_one = temporal @ spatial.T
        breakdown = modal_breakdown(rank_one, -rank_one, 1)
        assert breakdown["spatial_mode1_nmse"] == pytest.approx(0.0, abs=1e-20)

    def test_output_dir(self):
        config = ExperimentConfig.builtin("bridge-mean")
        assert str(output_dir(config)) == "out/bridge-mean"
        assert str(output_dir(config.replace(output_dir="results"))) == "results"
        assert str(output_dir(config, "elsewhere")) == "elsewhere"


class TestGenerate(object):
    def test_plate_from_mask_file(self, tmp_path):
        mask = np.ones((12, 12), dtype=bool)
        mask[4:7, 4:7] = False
        write_mask(tmp_path / "plate.mask", mask)
        config = parse_config(
            {
                "schema_version": 1,
                "experiment": "plate-boundary",
                "seed": 2,
                "params": {
                    "mask_file": "plate.mask",
                    "spacing": 1.0 / 13,
                    "true_modes": 5,
                    "model_modes": 10,
                },
            },
            base_dir=str(tmp_path),
        )
        data = generate(config)
        assert len(data) == mask.sum()
        assert data.meta["columns"] == ["x", "y"]

    def test_sdof_observations_are_seeded(self):
        config = small_config("sdof-subnyquist", n_samples=100)
        a = generate(config)
        b = generate(config)
        c = generate(config.replace(seed=2))
        assert np.array_equal(a.y, b.y)
        assert not np.array_equal(a.y, c.y)
        assert a.X[1, 0] == pytest.approx(0.075)

    def test_sdof_is_released_free(self):
        truth, data = simulate(SdofSubnyquistParams(), 3)
        y = truth.values[:, 0]
        assert abs(y[0]) <= 1.0
        assert np.abs(y[:100]).max() > 100 * np.abs(y[-100:]).max()
        assert np.std(data.y - y) == pytest.approx(0.01, rel=0.1)

    def test_beam_training_window(self):
        config = small_config("beam-product", n_steps=40, n_sensors=4)
        data = generate(config)
        # every second step over the first half, four sensors each
        assert len(data) == 10 * 4
        assert data.X[:, 0].max() < 20 * 0.01
        assert np.all(data.X[:, 1] > 0)


class TestRunExperiment(object):
    def test_sdof_without_subsampling(self, tmp_path):
        config = small_config(
            "sdof-subnyquist",
            n_samples=200,
            keep_every=1,
            frequency_zone=1,
            noise_std=0.0,
            n_starts=5,
        )
        report = run_experiment(config, tmp_path)
        assert {m.name for m in report.models} == {"se", "sdof", "hybrid"}
        for m in report.models:
            assert m.nmse < 0.01
        assert report.comparisons["n_train"] == report.comparisons["n_test"] == 200

    def test_bridge_writes_artifacts(self, tmp_path):
        report = run_experiment(small_config("bridge-mean", n_days=60), tmp_path)
        for name in (
            "report.json",
            "training.csv",
            "predictions_zero-mean.csv",
            "predictions_linear-mean.csv",
        ):
            assert (tmp_path / name).exists()
        assert [m.role for m in report.models] == ["baseline", "physics"]
        saved = read_report(tmp_path / "report.json")
        assert saved.to_dict(False) == report.to_dict(False)
        training = read_training_set(tmp_path / "training.csv", "displacement")
        assert training.meta["columns"] == ["time", "temperature"]

    def test_beam_small(self, tmp_path):
        config = small_config(
            "beam-product", n_steps=60, n_sensors=4, n_prediction_points=10
        )
        report = run_experiment(config, tmp_path)
        assert [m.name for m in report.models] == ["se-se", "mdof-se"]
        for m in report.models:
            assert "spatial_mode2_nmse" in m.breakdown
        assert len(report.comparisons["modal_frequencies_estimate"]) == 2
        assert (tmp_path / "spatial_modes.csv").exists()
        assert (tmp_path / "temporal_modes.csv").exists()

    def test_plate_small(self, tmp_path):
        report = run_experiment(small_config("plate-boundary", **SMALL_PLATE), tmp_path)
        assert [m.name for m in report.models] == [
            "se-d0.5",
            "constrained-d0.5",
            "se-d0.25",
            "constrained-d0.25",
        ]
        dense, sparse = report.comparisons["d0.5"], report.comparisons["d0.25"]
        assert dense["stride"] == 1
        assert dense["mse_ratio_in_strip"] is None
        assert sparse["stride"] == 2
        assert sparse["n_train"] < dense["n_train"]
        assert sparse["mse_ratio_in_strip"] > 0
        assert dense["mse_constrained"] >= 0
        mask = read_mask(tmp_path / "mask.txt")
        assert mask.shape == (20, 20)
        assert not mask.all()

    def test_errors_name_their_stage(self, mocker, tmp_path):
        mocker.patch(
            "greybox_gp._experiments._common.optimize",
            side_effect=IllConditionedKernel("not positive definite"),
        )
        with pytest.raises(PipelineError) as exc_info:
            run_experiment(small_config("bridge-mean", n_days=60), tmp_path)
        assert exc_info.value.stage == "fit:zero-mean"
        assert isinstance(exc_info.value.__cause__, IllConditionedKernel)

    def test_invalid_params_are_tagged(self, tmp_path):
        with pytest.raises(PipelineError) as exc_info:
            run_experiment(small_config("sdof-subnyquist", keep_every=0), tmp_path)
        assert exc_info.value.stage == "sdof-subnyquist"

    @freeze_time("2024-01-01 12:00:00")
    def test_reports_are_byte_identical(self, tmp_path):
        config = small_config("bridge-mean", n_days=60)
        first = run_experiment(config, tmp_path / "a")
        second = run_experiment(config, tmp_path / "b")
        assert first.runtime_seconds == 0.0
        assert (tmp_path / "a" / "report.json").read_bytes() == (
            tmp_path / "b" / "report.json"
        ).read_bytes()
        assert dump_report(first, False) == dump_report(second, False)


@pytest.mark.slow
class TestAcceptance(object):
    """Full-size runs with the built-in defaults."""

    def test_sdof_subnyquist(self, tmp_path):
        report = run_experiment(ExperimentConfig.builtin("sdof-subnyquist", 7), tmp_path)
        se, sdof = report.model("se"), report.model("sdof")
        assert sdof.nmse <= 0.1
        assert se.nmse >= 5 * sdof.nmse
        assert report.comparisons["natural_frequency_relative_error"] <= 0.05

    def test_bridge_mean(self, tmp_path):
        report = run_experiment(ExperimentConfig.builtin("bridge-mean", 11), tmp_path)
        assert report.model("linear-mean").nmse <= 0.25 * report.model("zero-mean").nmse

    def test_beam_product(self, tmp_path):
        report = run_experiment(ExperimentConfig.builtin("beam-product", 3), tmp_path)
        grey = report.model("mdof-se").breakdown
        assert grey["spatial_mode1_nmse"] <= 0.05
        assert grey["spatial_mode1_nmse"] < grey["spatial_mode2_nmse"]
        assert report.comparisons["temporal_mode1_ratio"] >= 2.0

    def test_plate_boundary(self, tmp_path):
        config = ExperimentConfig.builtin("plate-boundary", 5)
        report = run_experiment(config, tmp_path)
        in_strip = []
        for density in config.params.densities:
            summary = report.comparisons[f"d{density:g}"]
            assert summary["fraction_constrained_not_worse"] >= 0.8
            assert summary["mse_constrained"] < summary["mse_se"]
            in_strip.append(summary["mse_ratio_in_strip"])
        assert in_strip == sorted(in_strip)

    @pytest.mark.parametrize(
        "experiment", ["sdof-subnyquist", "bridge-mean", "beam-product", "plate-boundary"]
    )
    def test_deterministic(self, tmp_path, experiment):
        config = ExperimentConfig.builtin(experiment, 2)
        first = run_experiment(config, tmp_path / "a")
        second = run_experiment(config, tmp_path / "b")
        assert dump_report(first, False) == dump_report(second, False)
