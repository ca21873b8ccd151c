import dataclasses
from typing import Optional, Tuple

import numpy as np

from ._exceptions import InvalidArgument
from ._types import Array, ArrayLike
from ._utils import as_inputs, as_vector


@dataclasses.dataclass
class TrainingSet:
    """
    Observed inputs (N×D) and targets (N).
    """

    X: Array
    y: Array
    meta: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        self.X = as_inputs(self.X)
        self.y = as_vector(self.y)
        if self.X.shape[0] == 0:
            raise InvalidArgument("a training set needs at least one observation")
        if self.X.shape[0] != self.y.shape[0]:
            raise InvalidArgument(
                f"{self.X.shape[0]} input rows but {self.y.shape[0]} targets"
            )

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_dims(self) -> int:
        return self.X.shape[1]

    def subset(self, index: ArrayLike) -> "TrainingSet":
        index = np.asarray(index)
        return TrainingSet(self.X[index], self.y[index], dict(self.meta))


@dataclasses.dataclass
class Prediction:
    """
    Posterior mean and variance at M test inputs.
    """

    mean: Array
    variance: Array
    full_covariance: Optional[Array] = None

    @property
    def std(self) -> Array:
        return np.sqrt(self.variance)

    def bands(self, n_std: float = 3.0) -> Tuple[Array, Array]:
        half = n_std * self.std
        return self.mean - half, self.mean + half


@dataclasses.dataclass
class Trajectory:
    times: Array
    values: Array
    meta: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        self.times = as_vector(self.times, "times")
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != self.times.shape[0]:
            raise InvalidArgument(
                f"{self.times.shape[0]} times but {values.shape[0]} value rows"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidArgument("trajectory values must be finite")
        if np.any(np.diff(self.times) <= 0):
            raise InvalidArgument("trajectory times must be strictly increasing")
        self.values = values
