"""
Exact Gaussian process conditioning.

All solves go through a lower Cholesky factor of K(X, X) + σ_n²I. When the
plain factorization fails, a relative diagonal jitter is escalated through
``JITTER_LADDER`` (multiples of trace/N) before giving up.
"""
import dataclasses
import logging
import math
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from ._exceptions import IllConditionedKernel, InvalidArgument
from ._kernels import Kernel
from ._means import MeanFunction, ZeroMean
from ._models import Prediction, TrainingSet
from ._types import Array, ArrayLike
from ._utils import as_inputs

logger = logging.getLogger(__name__)

JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)
MAX_TRAINING_POINTS = 5000
LOG_2PI = math.log(2.0 * math.pi)


@dataclasses.dataclass(frozen=True, eq=False)
class FittedGp:
    kernel: Kernel
    mean: MeanFunction
    X: Array
    y: Array
    factor: Array
    weights: Array
    jitter_used: float
    log_marginal_likelihood: float

    def predict(
        self,
        X_star: ArrayLike,
        want_full_cov: bool = False,
        include_noise: bool = False,
    ) -> Prediction:
        return predict(self, X_star, want_full_cov, include_noise)


def _check_size(data: TrainingSet) -> None:
    if len(data) > MAX_TRAINING_POINTS:
        raise InvalidArgument(
            f"{len(data)} training points exceeds the dense-inference cap "
            f"of {MAX_TRAINING_POINTS}"
        )


def _factorize(K: Array) -> Tuple[Array, float]:
    n = K.shape[0]
    scale = float(np.trace(K)) / n
    attempted = []
    for relative in JITTER_LADDER:
        jitter = relative * scale
        attempted.append(jitter)
        try:
            factor = scipy.linalg.cholesky(
                K + jitter * np.eye(n), lower=True, check_finite=False
            )
        except np.linalg.LinAlgError:
            logger.debug("Cholesky failed with jitter %.3g, escalating", jitter)
            continue
        if not np.all(np.isfinite(factor)):
            continue
        if jitter:
            logger.debug("Cholesky succeeded with jitter %.3g", jitter)
        return factor, jitter
    raise IllConditionedKernel(
        f"Gram matrix of size {n} could not be factorized; "
        f"attempted jitter {attempted}",
        jitter_ladder=attempted,
    )


def _check_duplicates(kernel: Kernel, X: Array) -> None:
    # Repeated inputs without a noise term give an exactly singular Gram.
    noise = kernel.diag(X, True) - kernel.diag(X, False)
    if np.any(noise > 0):
        return
    _, counts = np.unique(X, axis=0, return_counts=True)
    if np.any(counts > 1):
        raise IllConditionedKernel(
            "training inputs contain duplicate rows and the kernel has no "
            "observation noise; the Gram matrix is singular",
            jitter_ladder=(),
        )


def _condition(kernel: Kernel, mean: MeanFunction, data: TrainingSet):
    _check_size(data)
    K = kernel.gram(data.X, data.X, True)
    _check_duplicates(kernel, data.X)
    factor, jitter = _factorize(K)
    residual = data.y - mean.evaluate(data.X)
    weights = scipy.linalg.cho_solve((factor, True), residual, check_finite=False)
    lml = (
        -0.5 * float(residual @ weights)
        - float(np.sum(np.log(np.diag(factor))))
        - 0.5 * len(data) * LOG_2PI
    )
    return factor, jitter, residual, weights, lml


def fit(kernel: Kernel, mean: Optional[MeanFunction], data: TrainingSet) -> FittedGp:
    mean = mean if mean is not None else ZeroMean()
    factor, jitter, _, weights, lml = _condition(kernel, mean, data)
    for arr in (factor, weights):
        arr.setflags(write=False)
    X = data.X.copy()
    y = data.y.copy()
    X.setflags(write=False)
    y.setflags(write=False)
    logger.debug("fitted GP on %i points, lml=%.6g, jitter=%.3g", len(data), lml, jitter)
    return FittedGp(kernel, mean, X, y, factor, weights, jitter, lml)


def predict(
    model: FittedGp,
    X_star: ArrayLike,
    want_full_cov: bool = False,
    include_noise: bool = False,
) -> Prediction:
    """
    Posterior of the latent function at ``X_star``.

    ``include_noise`` adds the kernel's observation noise back to the
    variance, for observation-space intervals.
    """
    X_star = as_inputs(X_star, "X_star")
    if X_star.shape[1] != model.X.shape[1]:
        raise InvalidArgument(
            f"X_star has {X_star.shape[1]} column(s), training inputs have "
            f"{model.X.shape[1]}"
        )
    kernel = model.kernel
    K_cross = kernel.gram(model.X, X_star, False)
    mean = model.mean.evaluate(X_star) + K_cross.T @ model.weights
    v = scipy.linalg.solve_triangular(
        model.factor, K_cross, lower=True, check_finite=False
    )
    prior_var = kernel.diag(X_star, False)
    variance = np.maximum(prior_var - np.sum(v**2, axis=0), 0.0)
    full_cov = None
    if want_full_cov:
        full_cov = kernel.gram(X_star, X_star, False) - v.T @ v
        full_cov = 0.5 * (full_cov + full_cov.T)
        np.fill_diagonal(full_cov, variance)
    if include_noise:
        noise = kernel.diag(X_star, True) - prior_var
        variance = variance + noise
        if full_cov is not None:
            full_cov = full_cov + np.diag(noise)
    return Prediction(mean, variance, full_cov)


def log_marginal_likelihood(
    kernel: Kernel, mean: Optional[MeanFunction], data: TrainingSet
) -> Tuple[float, Array]:
    """
    log p(y | X) and its gradient with respect to ``kernel.theta``.
    """
    mean = mean if mean is not None else ZeroMean()
    factor, _, _, alpha, value = _condition(kernel, mean, data)
    grads = kernel.gradient(data.X)
    if grads.shape[0] == 0:
        return value, np.zeros(0)
    K_inv = scipy.linalg.cho_solve(
        (factor, True), np.eye(len(data)), check_finite=False
    )
    # d/dθ_j = ½ tr((ααᵀ − K⁻¹) ∂K/∂θ_j)
    gradient = 0.5 * (
        np.einsum("i,jik,k->j", alpha, grads, alpha)
        - np.einsum("ik,jki->j", K_inv, grads)
    )
    return value, gradient
