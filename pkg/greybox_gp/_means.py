import dataclasses
import logging
from typing import Tuple

import numpy as np
import scipy.linalg

from ._exceptions import DegenerateData, InvalidArgument
from ._types import Array, ArrayLike, InputSlice, SliceLike
from ._utils import as_inputs, as_vector, normalize_slice

logger = logging.getLogger(__name__)


class MeanFunction(object):
    name = "mean"

    def __call__(self, X: ArrayLike) -> Array:
        return eval_mean(self, X)

    def evaluate(self, X: Array) -> Array:
        raise NotImplementedError()


@dataclasses.dataclass(frozen=True)
class ZeroMean(MeanFunction):
    name = "zero"

    def evaluate(self, X: Array) -> Array:
        return np.zeros(X.shape[0])


@dataclasses.dataclass(frozen=True)
class LinearMean(MeanFunction):
    """
    Affine prior mean over the covariate columns, e.g. displacement as a
    linear function of temperature.
    """

    weights: Tuple[float, ...]
    intercept: float = 0.0
    covariate_slice: InputSlice = None

    name = "linear"

    def __post_init__(self):
        weights = tuple(float(w) for w in np.atleast_1d(self.weights))
        if not weights:
            raise InvalidArgument("a linear mean needs at least one weight")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "intercept", float(self.intercept))
        columns = normalize_slice(self.covariate_slice)
        if columns is not None and len(columns) != len(weights):
            raise InvalidArgument(
                f"{len(weights)} weight(s) but covariate slice {columns}"
            )
        object.__setattr__(self, "covariate_slice", columns)

    def evaluate(self, X: Array) -> Array:
        columns = self.covariate_slice or tuple(range(len(self.weights)))
        if max(columns) >= X.shape[1]:
            raise InvalidArgument(
                f"covariate slice {columns} is out of range for {X.shape[1]} column(s)"
            )
        return X[:, list(columns)] @ np.asarray(self.weights) + self.intercept


def eval_mean(m: MeanFunction, X: ArrayLike) -> Array:
    return m.evaluate(as_inputs(X))


def fit_linear_mean(X: ArrayLike, y: ArrayLike, covariate_slice: SliceLike) -> LinearMean:
    """
    Ordinary least-squares affine fit of ``y`` on the covariate columns.
    """
    X = as_inputs(X)
    y = as_vector(y)
    if X.shape[0] != y.shape[0]:
        raise InvalidArgument(f"{X.shape[0]} input rows but {y.shape[0]} targets")
    columns = normalize_slice(covariate_slice) or tuple(range(X.shape[1]))
    if max(columns) >= X.shape[1]:
        raise InvalidArgument(
            f"covariate slice {columns} is out of range for {X.shape[1]} column(s)"
        )
    covariates = X[:, list(columns)]
    design = np.column_stack([covariates, np.ones(X.shape[0])])
    if X.shape[0] < design.shape[1]:
        raise DegenerateData(
            f"{X.shape[0]} row(s) cannot determine {design.shape[1]} coefficients"
        )
    # Centre covariates so the rank test is not fooled by a large offset.
    centred = np.column_stack(
        [covariates - covariates.mean(axis=0), np.ones(X.shape[0])]
    )
    coef, _, rank, _ = scipy.linalg.lstsq(centred, y)
    if rank < design.shape[1]:
        raise DegenerateData(
            f"rank-deficient covariate design (rank {rank} < {design.shape[1]})"
        )
    weights = coef[:-1]
    intercept = coef[-1] - float(covariates.mean(axis=0) @ weights)
    logger.debug("fitted linear mean: weights=%s intercept=%.6g", weights, intercept)
    return LinearMean(tuple(weights), intercept, columns)
