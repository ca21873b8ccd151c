"""
Experiment configuration.

A config is a JSON object::

    {
        "schema_version": 1,
        "experiment": "sdof-subnyquist",
        "seed": 7,
        "output_dir": "out/sdof",
        "params": {"keep_every": 10},
        "optimizer": {"n_starts": 5}
    }

``params`` overrides the defaults of the experiment's parameter record and
``optimizer`` those of ``OptimizationSpec``. Unknown keys are errors.
"""
import dataclasses
import json
import math
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type, Union

from ._exceptions import ConfigError, GreyboxError
from ._optimize import OptimizationSpec

SCHEMA_VERSION = 1

_OPTIMIZER_KEYS = ("n_starts", "max_iterations", "tolerance", "n_workers")


@dataclasses.dataclass(frozen=True)
class SdofSubnyquistParams:
    natural_frequency: float = 2.0 * math.pi
    damping_ratio: float = 0.05
    mass: float = 1.0
    #: Released from a displacement of this size, at a seeded phase.
    initial_amplitude: float = 1.0
    #: Zero gives the free vibration; positive adds white-noise forcing.
    forcing_variance: float = 0.0
    #: Training spacing keep_every·dt puts ω_n mid-way through Nyquist zone 2.
    dt: float = 0.075
    n_samples: int = 1000
    keep_every: int = 10
    noise_std: float = 0.01
    #: Nyquist zone of the training spacing searched for the natural frequency.
    frequency_zone: int = 2
    se_length_scale: float = 1.0


@dataclasses.dataclass(frozen=True)
class BridgeMeanParams:
    n_days: int = 150
    samples_per_day: int = 8
    train_fraction: float = 0.2
    test_fraction: float = 0.2
    residual_amplitude: float = 1.5
    noise_std: float = 0.2


@dataclasses.dataclass(frozen=True)
class BeamProductParams:
    length: float = 1.0
    n_modes: int = 2
    fundamental_frequency: float = 2.0 * math.pi
    damping_ratio: float = 0.02
    dt: float = 0.01
    n_steps: int = 300
    n_sensors: int = 8
    time_stride: int = 2
    train_fraction: float = 0.5
    n_prediction_points: int = 100
    noise_std: float = 0.002
    #: Search band for each modal frequency, as multiples of its nominal value.
    frequency_band: Tuple[float, float] = (0.5, 1.5)
    predict_chunk: int = 4000


@dataclasses.dataclass(frozen=True)
class PlateBoundaryParams:
    nx: int = 64
    ny: int = 64
    spacing: float = 1.0 / 65.0
    circles: Tuple[Tuple[float, float, float], ...] = (
        (0.25, 0.3, 0.08),
        (0.7, 0.7, 0.1),
    )
    rectangles: Tuple[Tuple[float, float, float, float], ...] = (
        (0.6, 0.8, 0.15, 0.3),
    )
    #: Optional '.'/'#' mask file; replaces ``nx``, ``ny`` and the holes.
    mask_file: Optional[str] = None
    true_modes: int = 96
    model_modes: int = 24
    #: Mean square of the synthesized field over the interior.
    signal_variance: float = 1.0
    length_scale: float = 0.1
    noise_std: float = 0.01
    #: Training strip along the first coordinate, as fractions of its extent.
    strip: Tuple[float, float] = (1.0 / 3.0, 2.0 / 3.0)
    #: Fractions of strip nodes on each regular training grid.
    densities: Tuple[float, ...] = (0.25, 0.06, 0.016)


PARAMS: Dict[str, Type] = {
    "sdof-subnyquist": SdofSubnyquistParams,
    "bridge-mean": BridgeMeanParams,
    "beam-product": BeamProductParams,
    "plate-boundary": PlateBoundaryParams,
}


def _tupled(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


def _build(cls: Type, values: Dict[str, Any], where: str):
    if not isinstance(values, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown {where} key(s) {sorted(unknown)}")
    try:
        return cls(**{k: _tupled(v) for k, v in values.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    params: Any = None
    optimizer: Dict[str, Any] = dataclasses.field(default_factory=dict)
    output_dir: Optional[str] = None
    include_noise_variance: bool = False
    #: Directory that relative file references resolve against.
    base_dir: Optional[str] = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.experiment not in PARAMS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; "
                f"choose one of {sorted(PARAMS)}"
            )
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        if self.params is None:
            object.__setattr__(self, "params", PARAMS[self.experiment]())
        elif isinstance(self.params, dict):
            object.__setattr__(
                self, "params", _build(PARAMS[self.experiment], self.params, "params")
            )
        elif not isinstance(self.params, PARAMS[self.experiment]):
            raise ConfigError(
                f"params for {self.experiment} must be "
                f"{PARAMS[self.experiment].__name__}"
            )
        unknown = set(self.optimizer) - set(_OPTIMIZER_KEYS)
        if unknown:
            raise ConfigError(f"unknown optimizer key(s) {sorted(unknown)}")
        self.optimization_spec()
        self.resolve(getattr(self.params, "mask_file", None), must_exist=True)

    @classmethod
    def builtin(cls, experiment: str, seed: int = 0) -> "ExperimentConfig":
        return cls(experiment, seed)

    def optimization_spec(self, **overrides) -> OptimizationSpec:
        values = dict(self.optimizer, seed=self.seed)
        values.update(overrides)
        try:
            return OptimizationSpec(**values)
        except (GreyboxError, TypeError) as exc:
            raise ConfigError(f"invalid optimizer settings: {exc}") from exc

    def resolve(self, name: Optional[str], must_exist: bool = False) -> Optional[Path]:
        if name is None:
            return None
        path = Path(name)
        if not path.is_absolute() and self.base_dir is not None:
            path = Path(self.base_dir) / path
        if must_exist and not path.exists():
            raise ConfigError(f"referenced file {str(path)!r} does not exist")
        return path

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "experiment": self.experiment,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "include_noise_variance": self.include_noise_variance,
            "params": dataclasses.asdict(self.params),
            "optimizer": dict(self.optimizer),
        }


def parse_config(data: Any, base_dir: Optional[str] = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("a config must be a JSON object")
    known = {
        "schema_version",
        "experiment",
        "seed",
        "output_dir",
        "include_noise_variance",
        "params",
        "optimizer",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config key(s) {sorted(unknown)}")
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {data.get('schema_version')!r}, "
            f"expected {SCHEMA_VERSION}"
        )
    for key in ("experiment", "seed"):
        if key not in data:
            raise ConfigError(f"missing required key {key!r}")
    optimizer = data.get("optimizer", {})
    if not isinstance(optimizer, dict):
        raise ConfigError("optimizer must be an object")
    return ExperimentConfig(
        experiment=data["experiment"],
        seed=data["seed"],
        params=data.get("params", {}),
        optimizer=optimizer,
        output_dir=data.get("output_dir"),
        include_noise_variance=bool(data.get("include_noise_variance", False)),
        base_dir=base_dir,
    )


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(path)!r}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return parse_config(data, base_dir=str(path.parent))
