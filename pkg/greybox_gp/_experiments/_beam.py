"""
Spatio-temporal regression of a cantilever's impulse response.

Eight sensors are observed at every second step over the first half of the
record. The grey-box model is the product of an MDOF covariance in time
and an SE covariance along the beam; the baseline replaces the MDOF factor
with an SE. Predictions over a dense spatial grid and the full history are
broken down into principal modes of the true field.
"""
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from .._config import BeamProductParams, ExperimentConfig
from .._exceptions import InvalidArgument
from .._io import write_columns, write_training_set
from .._kernels import Mdof, ProductAcrossSlices, SquaredExponential, WhiteNoise
from .._metrics import MetricsReport, metric_nmse
from .._models import TrainingSet
from .._oracles import BeamSpec, sensor_grid, simulate_beam, stack_field
from .._params import SdofParams
from .._types import Array
from .._utils import derive_seeds
from ._common import evaluate, fit_model, stage

COLUMNS = ["time", "x"]


def beam_spec(p: BeamProductParams) -> BeamSpec:
    return BeamSpec(
        length=p.length,
        n_modes=p.n_modes,
        damping_ratios=p.damping_ratio,
        fundamental_frequency=p.fundamental_frequency,
    )


def generate(p: BeamProductParams, seed: int) -> TrainingSet:
    """Noisy sensor readings over the training window."""
    spec = beam_spec(p)
    sensors = sensor_grid(spec, p.n_sensors)
    field = simulate_beam(spec, p.dt, p.n_steps, sensors)
    n_train = int(round(p.train_fraction * p.n_steps))
    steps = np.arange(0, n_train, p.time_stride)
    X = stack_field(field.times[steps], sensors)
    clean = field.values[steps].ravel()
    rng = np.random.default_rng(derive_seeds(seed, 1)[0])
    y = clean + p.noise_std * rng.standard_normal(clean.size)
    meta = dict(field.meta, noise_std=p.noise_std, columns=COLUMNS)
    return TrainingSet(X, y, meta)


def principal_modes(field: Array, n_modes: int) -> Tuple[Array, Array]:
    """
    Spatial modes (unit-norm columns) and temporal coefficients of the
    leading ``n_modes`` singular triplets of an (n_t, n_x) field.
    """
    U, s, Vt = np.linalg.svd(field, full_matrices=False)
    return Vt[:n_modes].T, U[:, :n_modes] * s[:n_modes]


def modal_breakdown(truth: Array, predicted: Array, n_modes: int) -> Dict[str, float]:
    """
    Per-mode NMSE of the prediction. Spatial modes are compared after sign
    alignment; temporal modes are the prediction projected onto the true
    spatial modes.
    """
    spatial, temporal = principal_modes(truth, n_modes)
    pred_spatial, _ = principal_modes(predicted, n_modes)
    out = {}
    for i in range(n_modes):
        estimate = pred_spatial[:, i]
        if estimate @ spatial[:, i] < 0:
            estimate = -estimate
        out[f"spatial_mode{i + 1}_nmse"] = metric_nmse(spatial[:, i], estimate)
        out[f"temporal_mode{i + 1}_nmse"] = metric_nmse(
            temporal[:, i], predicted @ spatial[:, i]
        )
    return out


def run(config: ExperimentConfig, out: Path) -> MetricsReport:
    p: BeamProductParams = config.params
    if p.time_stride < 1 or not 0 < p.train_fraction <= 1:
        raise InvalidArgument("time_stride must be >= 1 and train_fraction in (0, 1]")
    spec = beam_spec(p)
    with stage("generate"):
        train = generate(p, config.seed)
        x_dense = np.linspace(0.0, spec.length, p.n_prediction_points)
        truth = simulate_beam(spec, p.dt, p.n_steps, x_dense)
        test = TrainingSet(stack_field(truth.times, x_dense), truth.values.ravel())

    var_y = float(np.var(train.y))
    noise = max(p.noise_std**2, 1e-4 * var_y)
    zeta0 = 0.05
    modes = [
        SdofParams(w, zeta0, var_y / p.n_modes * zeta0 * w**3) for w in spec.frequencies
    ]
    lo, hi = p.frequency_band
    band = {
        f"k0.f0.mode{i}.natural_frequency": (lo * w, hi * w)
        for i, w in enumerate(spec.frequencies)
    }
    spatial_scale = 0.5 * spec.length

    # The product's overall scale is carried by the temporal factor.
    grey = ProductAcrossSlices([(Mdof(modes), 0), (_unit_se(spatial_scale), 1)])
    black = ProductAcrossSlices(
        [
            (SquaredExponential(var_y, 2.0 * np.pi / spec.frequencies[0] / 4.0), 0),
            (_unit_se(spatial_scale), 1),
        ]
    )
    grey_model, grey_result = fit_model(
        "mdof-se",
        grey + WhiteNoise(noise),
        None,
        train,
        config.optimization_spec(bounds=band),
    )
    black_model, black_result = fit_model(
        "se-se", black + WhiteNoise(noise), None, train, config.optimization_spec()
    )

    include_noise = config.include_noise_variance
    metrics = []
    n_t, n_x = truth.values.shape
    for name, role, model, result in (
        ("se-se", "baseline", black_model, black_result),
        ("mdof-se", "physics", grey_model, grey_result),
    ):
        scores, prediction = evaluate(
            name, role, model, result, test, out, include_noise, COLUMNS, p.predict_chunk
        )
        with stage(f"metrics:{name}"):
            scores.breakdown.update(
                modal_breakdown(
                    truth.values, prediction.mean.reshape(n_t, n_x), p.n_modes
                )
            )
        metrics.append(scores)

    with stage("write"):
        write_training_set(out / "training.csv", train)
        spatial, temporal = principal_modes(truth.values, p.n_modes)
        write_columns(
            out / "spatial_modes.csv",
            x=x_dense,
            **{f"mode{i + 1}": spatial[:, i] for i in range(p.n_modes)},
        )
        write_columns(
            out / "temporal_modes.csv",
            time=truth.times,
            **{f"mode{i + 1}": temporal[:, i] for i in range(p.n_modes)},
        )

    black_scores, grey_scores = metrics
    comparisons = {
        "modal_frequencies_true": list(spec.frequencies),
        "modal_frequencies_estimate": [
            grey_result.best_params[f"k0.f0.mode{i}.natural_frequency"]
            for i in range(p.n_modes)
        ],
        "temporal_mode1_ratio": black_scores.breakdown["temporal_mode1_nmse"]
        / grey_scores.breakdown["temporal_mode1_nmse"],
        "n_train": len(train),
        "n_test": len(test),
    }
    return MetricsReport(config.experiment, config.seed, metrics, comparisons=comparisons)


def _unit_se(length_scale: float) -> SquaredExponential:
    return SquaredExponential(1.0, length_scale, fixed=("signal_variance",))
