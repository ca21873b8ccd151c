"""
Temperature-driven displacement with a physics-informed prior mean.

Both models see (time, temperature) inputs and train on the start of the
series only. The grey-box model carries a linear-in-temperature mean fitted
on the training data, so it keeps tracking the trend once the temperature
leaves the training range; the zero-mean model falls back to zero.
"""
from pathlib import Path

import numpy as np

from .._config import BridgeMeanParams, ExperimentConfig
from .._exceptions import InvalidArgument
from .._io import write_training_set
from .._kernels import SquaredExponential, WhiteNoise
from .._means import fit_linear_mean
from .._metrics import MetricsReport
from .._models import TrainingSet
from .._oracles import BridgeSeriesConfig, synth_bridge_series
from ._common import evaluate, fit_model, stage

COLUMNS = ["time", "temperature"]


def generate(p: BridgeMeanParams, seed: int) -> TrainingSet:
    generator = BridgeSeriesConfig(
        samples_per_day=p.samples_per_day,
        residual_amplitude=p.residual_amplitude,
        noise_std=p.noise_std,
    )
    return synth_bridge_series(seed, p.n_days, generator)


def split_by_time(data: TrainingSet, train_fraction: float, test_fraction: float):
    """First ``train_fraction`` of the span for training, last ``test_fraction`` for testing."""
    if not (0 < train_fraction and 0 < test_fraction and train_fraction + test_fraction <= 1):
        raise InvalidArgument("train and test fractions must be positive and sum to <= 1")
    t = data.X[:, 0]
    start, span = t.min(), t.max() - t.min()
    train = np.nonzero(t < start + train_fraction * span)[0]
    test = np.nonzero(t >= start + (1.0 - test_fraction) * span)[0]
    return data.subset(train), data.subset(test)


def run(config: ExperimentConfig, out: Path) -> MetricsReport:
    p: BridgeMeanParams = config.params
    with stage("generate"):
        data = generate(p, config.seed)
        train, test = split_by_time(data, p.train_fraction, p.test_fraction)

    with stage("fit:mean"):
        mean = fit_linear_mean(train.X, train.y, covariate_slice=1)
    residual_var = float(np.var(train.y - mean(train.X)))
    var_y = float(np.var(train.y))

    zero_model, zero_result = fit_model(
        "zero-mean",
        SquaredExponential(var_y, (1.0, 1.0)) + WhiteNoise(0.1 * var_y),
        None,
        train,
        config.optimization_spec(),
    )
    physics_model, physics_result = fit_model(
        "linear-mean",
        SquaredExponential(residual_var, (1.0, 1.0)) + WhiteNoise(0.1 * residual_var),
        mean,
        train,
        config.optimization_spec(),
    )

    include_noise = config.include_noise_variance
    zero_metrics, _ = evaluate(
        "zero-mean", "baseline", zero_model, zero_result, test, out, include_noise, COLUMNS
    )
    physics_metrics, _ = evaluate(
        "linear-mean",
        "physics",
        physics_model,
        physics_result,
        test,
        out,
        include_noise,
        COLUMNS,
    )
    physics_metrics.breakdown.update(
        slope=mean.weights[0], intercept=mean.intercept
    )

    with stage("write"):
        write_training_set(out / "training.csv", train, target="displacement")

    temperature = data.X[:, 1]
    comparisons = {
        "slope_true": data.meta["slope"],
        "slope_estimate": mean.weights[0],
        "physics_over_zero_nmse": physics_metrics.nmse / zero_metrics.nmse,
        "train_temperature_range": [
            float(train.X[:, 1].min()),
            float(train.X[:, 1].max()),
        ],
        "series_temperature_range": [float(temperature.min()), float(temperature.max())],
        "n_train": len(train),
        "n_test": len(test),
    }
    return MetricsReport(
        config.experiment, config.seed, [zero_metrics, physics_metrics], comparisons=comparisons
    )
