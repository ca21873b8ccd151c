import logging
import time
from pathlib import Path
from typing import Callable, Dict, Optional, Union

from .._config import ExperimentConfig
from .._io import dump_report, write_report
from .._metrics import MetricsReport
from .._models import TrainingSet
from . import _beam, _bridge, _plate, _sdof
from ._common import stage

logger = logging.getLogger(__name__)

EXPERIMENTS: Dict[str, Callable[[ExperimentConfig, Path], MetricsReport]] = {
    "sdof-subnyquist": _sdof.run,
    "bridge-mean": _bridge.run,
    "beam-product": _beam.run,
    "plate-boundary": _plate.run,
}


def output_dir(config: ExperimentConfig, out: Optional[Union[str, Path]] = None) -> Path:
    if out is not None:
        return Path(out)
    if config.output_dir is not None:
        return Path(config.output_dir)
    return Path("out") / config.experiment


def generate(config: ExperimentConfig) -> TrainingSet:
    """The experiment's observed dataset, as its generator produces it."""
    p = config.params
    with stage("generate"):
        if config.experiment == "sdof-subnyquist":
            return _sdof.generate(p, config.seed)
        if config.experiment == "bridge-mean":
            return _bridge.generate(p, config.seed)
        if config.experiment == "beam-product":
            return _beam.generate(p, config.seed)
        return _plate.generate(p, config.seed, config.resolve(p.mask_file))


def run_experiment(
    config: ExperimentConfig, out: Optional[Union[str, Path]] = None
) -> MetricsReport:
    """
    Generate, fit, predict and score one experiment, writing its artifacts
    and ``report.json`` under the output directory.
    """
    directory = output_dir(config, out)
    directory.mkdir(parents=True, exist_ok=True)
    logger.info("running %s (seed %i) into %s", config.experiment, config.seed, directory)
    started = time.time()
    with stage(config.experiment):
        report = EXPERIMENTS[config.experiment](config, directory)
    report.runtime_seconds = time.time() - started
    with stage("write"):
        write_report(directory / "report.json", report)
    logger.debug("%s", dump_report(report, with_runtime=False))
    return report
