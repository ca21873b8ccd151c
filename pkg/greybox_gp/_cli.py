"""
Command line entry point::

    greybox-gp simulate   --experiment sdof-subnyquist --seed 1 --out data/
    greybox-gp fit        --data data/dataset.csv --kernel sdof --out model.gp
    greybox-gp predict    --model model.gp --data test.csv --out pred.csv
    greybox-gp experiment --config configs/sdof-subnyquist.json
    greybox-gp report     out/sdof-subnyquist/report.json

Exit codes: 0 on success, 2 for bad configuration or input, 3 when the
numerics fail.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .__version__ import __version__
from ._config import PARAMS, ExperimentConfig, load_config
from ._engine import fit
from ._exceptions import ConfigError, GreyboxError, NumericError, ParseError, PipelineError
from ._experiments import generate, output_dir, run_experiment
from ._io import read_inputs, read_report, read_training_set, write_predictions, write_training_set
from ._kernels import Kernel, Sdof, SquaredExponential, WhiteNoise
from ._means import MeanFunction, ZeroMean, fit_linear_mean
from ._metrics import MetricsReport
from ._optimize import OptimizationSpec, optimize
from ._serializer import dumps_model, loads_model
from ._utils import atomic_write

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

KERNELS = ("se", "sdof", "sdof+se")


def _configure_logging(verbosity: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )


def _experiment_config(args) -> ExperimentConfig:
    if args.config is not None:
        config = load_config(args.config)
    elif args.experiment is not None:
        if args.seed is None:
            raise ConfigError("--seed is required without --config")
        config = ExperimentConfig.builtin(args.experiment, args.seed)
    else:
        raise ConfigError("one of --config or --experiment is required")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "include_noise_variance", False):
        changes["include_noise_variance"] = True
    return config.replace(**changes) if changes else config


def _initial_kernel(name: str, X: np.ndarray, y: np.ndarray) -> Kernel:
    var_y = float(np.var(y)) or 1.0
    span = float(np.ptp(X[:, 0])) or 1.0
    noise = WhiteNoise(1e-2 * var_y)
    se = SquaredExponential(var_y, [float(np.ptp(c)) / 10 or 1.0 for c in X.T])
    if name == "se":
        return se + noise
    if X.shape[1] != 1:
        raise ConfigError(f"kernel {name!r} needs a single time column, got {X.shape[1]}")
    t = np.unique(X[:, 0])
    omega = 0.5 * np.pi / float(np.min(np.diff(t))) if t.size > 1 else 1.0
    sdof = Sdof(omega, 0.1, var_y * 0.1 * omega**3)
    if name == "sdof":
        return sdof + noise
    return sdof + SquaredExponential(0.1 * var_y, span / 10) + noise


def cmd_simulate(args) -> int:
    config = _experiment_config(args)
    data = generate(config)
    path = output_dir(config, args.out) / "dataset.csv"
    write_training_set(path, data)
    print(f"wrote {len(data)} rows to {path}")
    return EXIT_OK


def cmd_fit(args) -> int:
    data = read_training_set(args.data, args.target)
    mean: MeanFunction = ZeroMean()
    if args.mean == "linear":
        mean = fit_linear_mean(data.X, data.y, args.covariate)
    kernel = _initial_kernel(args.kernel, data.X, data.y)
    spec = OptimizationSpec(n_starts=args.n_starts, seed=args.seed or 0)
    result = optimize(kernel, mean, data, spec)
    model = fit(result.kernel, mean, data)
    atomic_write(args.out, dumps_model(model))
    print(f"log marginal likelihood {model.log_marginal_likelihood:.6g}")
    for name, value in sorted(result.best_params.items()):
        print(f"  {name} = {value:.6g}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = loads_model(Path(args.model).read_bytes())
    if model is None:
        raise ParseError(f"{args.model} is not a model file this version can read")
    names, X, y = read_inputs(args.data, args.target)
    prediction = model.predict(X, include_noise=args.include_noise_variance)
    write_predictions(args.out, X, prediction, names, y)
    print(f"wrote {X.shape[0]} predictions to {args.out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    config = _experiment_config(args)
    report = run_experiment(config, args.out)
    print(render_report(report))
    return EXIT_OK


def cmd_report(args) -> int:
    print(render_report(read_report(args.path)))
    return EXIT_OK


def render_report(report: MetricsReport) -> str:
    lines = [
        f"{report.experiment} (seed {report.seed}, {report.runtime_seconds:.1f} s)",
        f"{'model':<20} {'role':<9} {'nmse':>12} {'log_loss':>12} {'lml':>14} {'jitter':>10}",
    ]
    for m in report.models:
        lines.append(
            f"{m.name:<20} {m.role:<9} {m.nmse:>12.5g} {m.log_loss:>12.5g} "
            f"{m.log_marginal_likelihood:>14.6g} {m.jitter_used:>10.2g}"
        )
    for key, value in sorted(report.comparisons.items()):
        lines.append(f"  {key}: {value}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greybox-gp", description="Physics-informed Gaussian process regression."
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_args(p):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--experiment", choices=sorted(PARAMS), help="use built-in defaults")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("simulate", help="write an experiment's dataset as CSV")
    experiment_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a GP to a dataset CSV and save the model")
    p.add_argument("--data", required=True)
    p.add_argument("--target", help="target column (default: the last one)")
    p.add_argument("--kernel", choices=KERNELS, default="se")
    p.add_argument("--mean", choices=("zero", "linear"), default="zero")
    p.add_argument("--covariate", type=int, action="append", help="linear mean column(s)")
    p.add_argument("--n-starts", type=int, default=5)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="model file")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--target", default="y")
    p.add_argument("--out", required=True)
    p.add_argument("--include-noise-variance", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("experiment", help="run one experiment end to end")
    experiment_args(p)
    p.add_argument("--include-noise-variance", action="store_true")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="print a saved metrics report")
    p.add_argument("path")
    p.set_defaults(func=cmd_report)
    return parser


def exit_code(exc: BaseException) -> int:
    cause = exc.__cause__ if isinstance(exc, PipelineError) else exc
    if isinstance(cause, NumericError):
        return EXIT_NUMERIC
    return EXIT_CONFIG


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return args.func(args)
    except GreyboxError as exc:
        logger.debug("command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
