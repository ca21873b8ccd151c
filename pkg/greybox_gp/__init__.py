from ._boundary import (
    BoundaryConstrained,
    GridDomain,
    ReducedRankBasis,
    build_basis,
    eval_constrained,
    se_spectral_density_2d,
    synth_plate_field,
    wrap_as_kernel,
)
from ._config import ExperimentConfig, load_config
from ._engine import FittedGp, fit, log_marginal_likelihood, predict
from ._exceptions import (
    ConfigError,
    DegenerateData,
    GreyboxError,
    IllConditionedKernel,
    InvalidArgument,
    NumericError,
    OptimizationFailed,
    ParseError,
    PipelineError,
)
from ._experiments import run_experiment
from ._io import (
    read_mask,
    read_predictions,
    read_report,
    read_training_set,
    write_mask,
    write_predictions,
    write_report,
    write_training_set,
    write_trajectory,
)
from ._kernels import (
    Kernel,
    Mdof,
    ProductAcrossSlices,
    Sdof,
    SquaredExponential,
    Sum,
    WhiteNoise,
    combine_product,
    combine_sum,
    eval_mdof,
    eval_sdof,
    eval_se,
    gram,
    kernel_param_gradient,
    prior_influence,
    se_with_noise,
)
from ._means import LinearMean, MeanFunction, ZeroMean, eval_mean, fit_linear_mean
from ._metrics import MetricsReport, ModelMetrics, metric_log_loss, metric_nmse
from ._models import Prediction, TrainingSet, Trajectory
from ._optimize import (
    OptimizationResult,
    OptimizationSpec,
    aoptimize,
    default_bounds,
    optimize,
)
from ._oracles import (
    BeamSpec,
    BridgeSeriesConfig,
    SdofSystem,
    beam_modal_response,
    beam_mode_shapes,
    project_onto_modes,
    simulate_beam,
    simulate_sdof,
    simulate_sdof_batch,
    synth_bridge_series,
)
from ._params import ModalSet, SdofParams, SeParams
from ._serializer import dumps_model, loads_model

__all__ = [
    "BeamSpec",
    "BoundaryConstrained",
    "BridgeSeriesConfig",
    "ConfigError",
    "DegenerateData",
    "ExperimentConfig",
    "FittedGp",
    "GreyboxError",
    "GridDomain",
    "IllConditionedKernel",
    "InvalidArgument",
    "Kernel",
    "LinearMean",
    "Mdof",
    "MeanFunction",
    "MetricsReport",
    "ModalSet",
    "ModelMetrics",
    "NumericError",
    "OptimizationFailed",
    "OptimizationResult",
    "OptimizationSpec",
    "ParseError",
    "PipelineError",
    "Prediction",
    "ProductAcrossSlices",
    "ReducedRankBasis",
    "Sdof",
    "SdofParams",
    "SdofSystem",
    "SeParams",
    "SquaredExponential",
    "Sum",
    "TrainingSet",
    "Trajectory",
    "WhiteNoise",
    "ZeroMean",
    "aoptimize",
    "beam_modal_response",
    "beam_mode_shapes",
    "build_basis",
    "combine_product",
    "combine_sum",
    "default_bounds",
    "dumps_model",
    "eval_constrained",
    "eval_mdof",
    "eval_mean",
    "eval_sdof",
    "eval_se",
    "fit",
    "fit_linear_mean",
    "gram",
    "kernel_param_gradient",
    "load_config",
    "loads_model",
    "log_marginal_likelihood",
    "metric_log_loss",
    "metric_nmse",
    "optimize",
    "predict",
    "prior_influence",
    "project_onto_modes",
    "read_mask",
    "read_predictions",
    "read_report",
    "read_training_set",
    "run_experiment",
    "se_spectral_density_2d",
    "se_with_noise",
    "simulate_beam",
    "simulate_sdof",
    "simulate_sdof_batch",
    "synth_bridge_series",
    "synth_plate_field",
    "wrap_as_kernel",
    "write_mask",
    "write_predictions",
    "write_report",
    "write_training_set",
    "write_trajectory",
]
