import contextlib
import logging
from pathlib import Path
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from .._engine import FittedGp, fit
from .._exceptions import GreyboxError, PipelineError
from .._io import write_predictions
from .._kernels import Kernel
from .._means import MeanFunction
from .._metrics import ModelMetrics, metric_log_loss, metric_nmse
from .._models import Prediction, TrainingSet
from .._optimize import OptimizationResult, OptimizationSpec, optimize
from .._types import Array

logger = logging.getLogger(__name__)


@contextlib.contextmanager
def stage(name: str) -> Iterator[None]:
    """Tag any library error raised inside the block with ``name``."""
    logger.info("stage %s", name)
    try:
        yield
    except PipelineError:
        raise
    except GreyboxError as exc:
        raise PipelineError(name, str(exc)) from exc


def split_every(n: int, keep_every: int) -> Tuple[Array, Array]:
    """Indices of every ``keep_every``-th sample and of the rest."""
    index = np.arange(n)
    train = index % keep_every == 0
    return index[train], index[~train]


def fit_model(
    name: str,
    kernel: Kernel,
    mean: Optional[MeanFunction],
    train: TrainingSet,
    spec: OptimizationSpec,
) -> Tuple[FittedGp, OptimizationResult]:
    with stage(f"fit:{name}"):
        result = optimize(kernel, mean, train, spec)
        model = fit(result.kernel, mean, train)
    logger.info(
        "%s: lml %.6g, params %s", name, model.log_marginal_likelihood, result.best_params
    )
    return model, result


def predict_chunked(
    model: FittedGp, X: Array, chunk: int, include_noise: bool
) -> Prediction:
    means, variances = [], []
    for start in range(0, X.shape[0], max(1, chunk)):
        part = model.predict(X[start : start + chunk], include_noise=include_noise)
        means.append(part.mean)
        variances.append(part.variance)
    return Prediction(np.concatenate(means), np.concatenate(variances))


def score(
    name: str,
    role: str,
    model: FittedGp,
    result: OptimizationResult,
    prediction: Prediction,
    y_true: Array,
    breakdown: Optional[Dict[str, float]] = None,
) -> ModelMetrics:
    with stage(f"metrics:{name}"):
        # A latent variance of exactly zero would make the log loss infinite.
        variance = np.maximum(prediction.variance, np.finfo(float).tiny)
        return ModelMetrics(
            name=name,
            role=role,
            nmse=metric_nmse(y_true, prediction.mean),
            log_loss=metric_log_loss(y_true, prediction.mean, variance),
            jitter_used=model.jitter_used,
            log_marginal_likelihood=model.log_marginal_likelihood,
            params=dict(result.best_params),
            optimizer=result.summary(),
            breakdown=dict(breakdown or {}),
        )


def evaluate(
    name: str,
    role: str,
    model: FittedGp,
    result: OptimizationResult,
    test: TrainingSet,
    out: Path,
    include_noise: bool,
    names=None,
    chunk: int = 4000,
) -> Tuple[ModelMetrics, Prediction]:
    """Predict on ``test``, write the prediction CSV and score it."""
    with stage(f"predict:{name}"):
        prediction = predict_chunked(model, test.X, chunk, include_noise)
    with stage("write"):
        write_predictions(
            out / f"predictions_{name}.csv", test.X, prediction, names, test.y
        )
    return score(name, role, model, result, prediction, test.y), prediction
