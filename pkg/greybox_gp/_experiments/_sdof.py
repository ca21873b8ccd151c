"""
Sub-Nyquist identification of an oscillator.

The SDOF system is released from a displaced state (optionally with white
noise forcing on top) and observed at every ``keep_every``-th sample, which
puts the training spacing beyond half the natural period. The SDOF covariance
still recovers the oscillation, because its frequency is searched in the
Nyquist zone of the training spacing that contains it.
"""
import math
from pathlib import Path
from typing import Tuple

import numpy as np

from .._config import ExperimentConfig, SdofSubnyquistParams
from .._exceptions import InvalidArgument
from .._io import write_columns, write_training_set, write_trajectory
from .._kernels import Sdof, SquaredExponential, WhiteNoise, prior_influence
from .._metrics import MetricsReport
from .._models import TrainingSet, Trajectory
from .._oracles import SdofSystem, simulate_sdof
from .._types import Array, Bounds
from .._utils import derive_seeds
from ._common import evaluate, fit_model, split_every, stage


def _system(p: SdofSubnyquistParams) -> SdofSystem:
    return SdofSystem.from_modal(
        p.natural_frequency, p.damping_ratio, p.mass, p.forcing_variance
    )


def _initial_state(p: SdofSubnyquistParams, phase: float) -> Tuple[float, float]:
    """State at t=0 of y = A·e^{-ζω_n t}·cos(ω_d t + phase)."""
    decay = p.damping_ratio * p.natural_frequency
    omega_d = p.natural_frequency * math.sqrt(1.0 - p.damping_ratio**2)
    a = p.initial_amplitude
    return a * math.cos(phase), -a * (decay * math.cos(phase) + omega_d * math.sin(phase))


def simulate(p: SdofSubnyquistParams, seed: int) -> Tuple[Trajectory, TrainingSet]:
    """
    The clean response and its noisy observation. The oscillator is released
    at a seeded phase and, when ``forcing_variance`` is positive, keeps being
    driven by white noise.
    """
    sim_seed, noise_seed = derive_seeds(seed, 2)
    rng = np.random.default_rng(noise_seed)
    start = _initial_state(p, rng.uniform(0.0, 2.0 * math.pi))
    truth = simulate_sdof(
        _system(p), p.dt, p.n_samples, int(sim_seed.generate_state(1)[0]), start
    )
    observed = truth.values[:, 0] + p.noise_std * rng.standard_normal(p.n_samples)
    meta = dict(truth.meta, noise_std=p.noise_std, columns=["time"])
    return truth, TrainingSet(truth.times, observed, meta)


def generate(p: SdofSubnyquistParams, seed: int) -> TrainingSet:
    return simulate(p, seed)[1]


def frequency_zone(times: Array, zone: int) -> Bounds:
    """
    Bounds on ω_n covering Nyquist zone ``zone`` of the sample spacing,
    never below one cycle over the record.
    """
    spacing = float(np.min(np.diff(np.unique(times))))
    span = float(times.max() - times.min())
    lower = max((zone - 1) * math.pi / spacing, 2.0 * math.pi / span)
    return lower, zone * math.pi / spacing


def run(config: ExperimentConfig, out: Path) -> MetricsReport:
    p: SdofSubnyquistParams = config.params
    if p.keep_every < 1 or p.frequency_zone < 1:
        raise InvalidArgument("keep_every and frequency_zone must be >= 1")
    with stage("generate"):
        truth, data = simulate(p, config.seed)
        train_idx, test_idx = split_every(len(data), p.keep_every)
        if test_idx.size == 0:
            # Nothing withheld: score on the training support.
            test_idx = train_idx
        train = data.subset(train_idx)
        clean = truth.values[:, 0]
        test = TrainingSet(data.X[test_idx], clean[test_idx])

    var_y = float(np.var(train.y))
    noise = max(p.noise_std**2, 1e-4 * var_y)
    w_lo, w_hi = frequency_zone(train.X[:, 0], p.frequency_zone)
    w0 = 0.5 * (w_lo + w_hi)
    zeta0 = 0.1
    sdof = Sdof(w0, zeta0, var_y * zeta0 * w0**3)

    se_model, se_result = fit_model(
        "se",
        SquaredExponential(var_y, p.se_length_scale) + WhiteNoise(noise),
        None,
        train,
        config.optimization_spec(),
    )
    sdof_model, sdof_result = fit_model(
        "sdof",
        sdof + WhiteNoise(noise),
        None,
        train,
        config.optimization_spec(bounds={"k0.natural_frequency": (w_lo, w_hi)}),
    )
    hybrid_model, hybrid_result = fit_model(
        "hybrid",
        sdof + SquaredExponential(0.1 * var_y, 5.0 * p.se_length_scale) + WhiteNoise(noise),
        None,
        train,
        config.optimization_spec(bounds={"k0.natural_frequency": (w_lo, w_hi)}),
    )

    include_noise = config.include_noise_variance
    metrics = [
        evaluate(name, role, model, result, test, out, include_noise, ["time"])[0]
        for name, role, model, result in (
            ("se", "baseline", se_model, se_result),
            ("sdof", "physics", sdof_model, sdof_result),
            ("hybrid", "physics", hybrid_model, hybrid_result),
        )
    ]

    with stage("write"):
        write_training_set(out / "training.csv", train)
        write_trajectory(out / "truth.csv", truth)
        x0 = train.X[len(train) // 2]
        write_columns(
            out / "influence.csv",
            time=data.X[:, 0],
            se=prior_influence(se_model.kernel, x0, data.X),
            sdof=prior_influence(sdof_model.kernel, x0, data.X),
        )

    estimate = sdof_result.best_params["k0.natural_frequency"]
    se_nmse, sdof_nmse = metrics[0].nmse, metrics[1].nmse
    comparisons = {
        "natural_frequency_true": p.natural_frequency,
        "natural_frequency_estimate": estimate,
        "natural_frequency_relative_error": abs(estimate - p.natural_frequency)
        / p.natural_frequency,
        "natural_frequency_bounds": [w_lo, w_hi],
        "se_over_sdof_nmse": se_nmse / sdof_nmse if sdof_nmse > 0 else None,
        "training_spacing": float(p.dt * p.keep_every),
        "n_train": len(train),
        "n_test": len(test),
    }
    return MetricsReport(config.experiment, config.seed, metrics, comparisons=comparisons)
