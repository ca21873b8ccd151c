import dataclasses
import math
from typing import Any, Dict, List

import numpy as np

from ._exceptions import DegenerateData, InvalidArgument, NumericError
from ._types import ArrayLike
from ._utils import as_vector

REPORT_SCHEMA_VERSION = 1

CONVENTIONS = {
    "nmse": "sum((y_true - y_pred)^2) / (N * var(y_true)); predicting the mean scores 1",
    "log_loss": (
        "mean Gaussian negative log predictive density, "
        "0.5*log(2*pi*v) + (y - mu)^2/(2*v); lower is better"
    ),
    "variance": "latent posterior variance unless include_noise_variance is set",
}


def _paired(y_true: ArrayLike, y_pred: ArrayLike):
    y_true = as_vector(y_true, "y_true")
    y_pred = as_vector(y_pred, "y_pred")
    if y_true.shape != y_pred.shape:
        raise InvalidArgument(
            f"y_true has {y_true.size} values, prediction has {y_pred.size}"
        )
    return y_true, y_pred


def metric_nmse(y_true: ArrayLike, y_pred: ArrayLike) -> float:
    y_true, y_pred = _paired(y_true, y_pred)
    if y_true.size < 2:
        raise InvalidArgument("NMSE needs at least two values")
    var = float(np.var(y_true))
    if not var > 0:
        raise DegenerateData("NMSE is undefined for a constant truth")
    return float(np.sum((y_true - y_pred) ** 2) / (y_true.size * var))


def metric_log_loss(y_true: ArrayLike, pred_mean: ArrayLike, pred_var: ArrayLike) -> float:
    y_true, pred_mean = _paired(y_true, pred_mean)
    pred_var = as_vector(pred_var, "pred_var")
    if pred_var.shape != y_true.shape:
        raise InvalidArgument("pred_var must match y_true in length")
    if np.any(pred_var <= 0):
        raise InvalidArgument("predictive variances must be > 0")
    return float(
        np.mean(
            0.5 * np.log(2.0 * math.pi * pred_var)
            + (y_true - pred_mean) ** 2 / (2.0 * pred_var)
        )
    )


@dataclasses.dataclass
class ModelMetrics:
    """
    Scores of one fitted model on held-out data. ``role`` is ``"baseline"``
    for the black-box comparison model and ``"physics"`` otherwise.
    """

    name: str
    role: str
    nmse: float
    log_loss: float
    jitter_used: float
    log_marginal_likelihood: float
    params: Dict[str, float] = dataclasses.field(default_factory=dict)
    optimizer: Dict[str, float] = dataclasses.field(default_factory=dict)
    breakdown: Dict[str, Any] = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.role not in ("baseline", "physics"):
            raise InvalidArgument(f"unknown model role {self.role!r}")
        if not (math.isfinite(self.nmse) and self.nmse >= 0):
            raise NumericError(f"{self.name}: NMSE {self.nmse!r} is not finite")
        if not math.isfinite(self.log_loss):
            raise NumericError(f"{self.name}: log loss {self.log_loss!r} is not finite")


@dataclasses.dataclass
class MetricsReport:
    experiment: str
    seed: int
    models: List[ModelMetrics]
    runtime_seconds: float = 0.0
    comparisons: Dict[str, Any] = dataclasses.field(default_factory=dict)
    schema_version: int = REPORT_SCHEMA_VERSION

    def model(self, name: str) -> ModelMetrics:
        for m in self.models:
            if m.name == name:
                return m
        raise KeyError(name)

    @property
    def baseline(self) -> List[ModelMetrics]:
        return [m for m in self.models if m.role == "baseline"]

    def to_dict(self, with_runtime: bool = True) -> dict:
        out = {
            "schema_version": self.schema_version,
            "experiment": self.experiment,
            "seed": self.seed,
            "conventions": dict(CONVENTIONS),
            # A list keeps the report order through sort_keys.
            "models": [dataclasses.asdict(m) for m in self.models],
            "comparisons": dict(self.comparisons),
        }
        if with_runtime:
            out["runtime_seconds"] = self.runtime_seconds
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        models = [ModelMetrics(**m) for m in data["models"]]
        return cls(
            data["experiment"],
            data["seed"],
            models,
            data.get("runtime_seconds", 0.0),
            data.get("comparisons", {}),
            data["schema_version"],
        )
