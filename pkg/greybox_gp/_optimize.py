"""
Type-II maximum likelihood over log-space hyperparameters.

Each start runs L-BFGS-B on the negative log marginal likelihood inside the
log of the parameter box. Start 0 is the kernel's own parameters (clipped
into the box); the rest are a scrambled Sobol sequence over the log-box, so
asking for more starts only ever adds points.
"""
import dataclasses
import functools
import logging
import math
import warnings
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import anyio
import numpy as np
import scipy.optimize
from multimethod import multimethod
from scipy.spatial.distance import pdist
from scipy.stats import qmc

from ._boundary import BoundaryConstrained
from ._exceptions import (
    DegenerateData,
    GreyboxError,
    InvalidArgument,
    OptimizationFailed,
)
from ._engine import log_marginal_likelihood
from ._kernels import (
    Kernel,
    Mdof,
    ProductAcrossSlices,
    Sdof,
    SquaredExponential,
    Sum,
    WhiteNoise,
    named_params,
)
from ._means import MeanFunction, ZeroMean
from ._models import TrainingSet
from ._types import Array, Bounds

logger = logging.getLogger(__name__)

# Objective value reported where the Gram cannot be factorized.
_FAILED_OBJECTIVE = 1e25
_MAX_DISTANCE_SAMPLE = 2000

VARIANCE_RANGE = (1e-6, 1e2)
LENGTH_SCALE_RANGE = (1e-2, 1e2)
DAMPING_RATIO_RANGE = (1e-3, 0.5)


@dataclasses.dataclass(frozen=True)
class OptimizationSpec:
    """
    ``bounds`` overrides the data-driven defaults by parameter name, in
    natural units.
    """

    bounds: Mapping[str, Bounds] = dataclasses.field(default_factory=dict)
    n_starts: int = 5
    max_iterations: int = 200
    tolerance: float = 1e-9
    seed: int = 0
    n_workers: int = 1

    def __post_init__(self):
        if self.n_starts < 1:
            raise InvalidArgument(f"n_starts must be >= 1, got {self.n_starts}")
        if self.max_iterations < 1:
            raise InvalidArgument("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise InvalidArgument("tolerance must be > 0")
        if self.n_workers < 1:
            raise InvalidArgument("n_workers must be >= 1")
        for name, (lo, hi) in self.bounds.items():
            _check_bound(name, lo, hi)


@dataclasses.dataclass(frozen=True)
class StartTrace:
    start: Tuple[float, ...]
    start_lml: float
    final: Tuple[float, ...]
    final_lml: float
    iterations: int
    converged: bool
    message: str = ""


@dataclasses.dataclass(frozen=True, eq=False)
class OptimizationResult:
    kernel: Kernel
    best_params: Dict[str, float]
    best_lml: float
    per_start_trace: List[StartTrace]

    def summary(self) -> dict:
        return {
            "best_lml": self.best_lml,
            "n_starts": len(self.per_start_trace),
            "n_converged": sum(t.converged for t in self.per_start_trace),
            "n_failed": sum(
                not math.isfinite(t.final_lml) for t in self.per_start_trace
            ),
            "total_iterations": sum(t.iterations for t in self.per_start_trace),
        }


def _check_bound(name: str, lo: float, hi: float) -> None:
    if not (0 < lo < hi and math.isfinite(hi)):
        raise InvalidArgument(
            f"bounds for {name} must satisfy 0 < lower < upper, got ({lo}, {hi})"
        )


def _target_variance(data: TrainingSet) -> float:
    if len(data) < 2:
        raise DegenerateData("default bounds need at least two observations")
    var = float(np.var(data.y))
    if not var > 0:
        raise DegenerateData("targets have zero variance")
    return var


def _scaled(base: float, factors: Tuple[float, float]) -> Bounds:
    return base * factors[0], base * factors[1]


def _median_distance(X: Array) -> float:
    stride = max(1, X.shape[0] // _MAX_DISTANCE_SAMPLE)
    distances = pdist(X[::stride])
    distances = distances[distances > 0]
    if distances.size == 0:
        raise DegenerateData("all inputs coincide")
    return float(np.median(distances))


def _time_column(kernel, X: Array) -> Array:
    return kernel._columns(X)[:, 0]


def _frequency_bounds(times: Array) -> Bounds:
    t = np.unique(times)
    if t.size < 2:
        raise DegenerateData("frequency bounds need at least two distinct times")
    dt_min = float(np.min(np.diff(t)))
    span = float(t[-1] - t[0])
    return 2.0 * math.pi / span, math.pi / dt_min


def _oscillator_bounds(times: Array, var: float) -> List[Bounds]:
    w_lo, w_hi = _frequency_bounds(times)
    z_lo, z_hi = DAMPING_RATIO_RANGE
    v_lo, v_hi = _scaled(var, VARIANCE_RANGE)
    # amplitude = variance · ζ · ω³
    return [
        (w_lo, w_hi),
        (z_lo, z_hi),
        (v_lo * z_lo * w_lo**3, v_hi * z_hi * w_hi**3),
    ]


def _free(kernel, bounds: List[Bounds]) -> List[Bounds]:
    return [b for b, free in zip(bounds, kernel.free_mask()) if free]


@multimethod
def default_bounds(kernel, data):
    raise NotImplementedError(f"No default bounds for {type(kernel).__name__}")


@default_bounds.register
def _se_bounds(kernel: SquaredExponential, data: TrainingSet) -> List[Bounds]:
    if not kernel.free_mask().any():
        return []
    var = _target_variance(data)
    cols = kernel._columns(data.X)
    bounds = [_scaled(var, VARIANCE_RANGE)]
    for d in range(kernel.n_dims):
        bounds.append(_scaled(_median_distance(cols[:, [d]]), LENGTH_SCALE_RANGE))
    return _free(kernel, bounds)


@default_bounds.register
def _noise_bounds(kernel: WhiteNoise, data: TrainingSet) -> List[Bounds]:
    if not kernel.free_mask().any():
        return []
    return [_scaled(_target_variance(data), VARIANCE_RANGE)]


@default_bounds.register
def _sdof_bounds(kernel: Sdof, data: TrainingSet) -> List[Bounds]:
    if not kernel.free_mask().any():
        return []
    bounds = _oscillator_bounds(_time_column(kernel, data.X), _target_variance(data))
    return _free(kernel, bounds)


@default_bounds.register
def _mdof_bounds(kernel: Mdof, data: TrainingSet) -> List[Bounds]:
    if not kernel.free_mask().any():
        return []
    per_mode = _oscillator_bounds(
        _time_column(kernel, data.X), _target_variance(data)
    )
    return _free(kernel, per_mode * len(kernel.modes))


@default_bounds.register
def _constrained_bounds(kernel: BoundaryConstrained, data: TrainingSet) -> List[Bounds]:
    if not kernel.free_mask().any():
        return []
    var = _target_variance(data)
    bounds = [
        _scaled(var, VARIANCE_RANGE),
        _scaled(_median_distance(kernel._columns(data.X)), LENGTH_SCALE_RANGE),
    ]
    return _free(kernel, bounds)


@default_bounds.register
def _sum_bounds(kernel: Sum, data: TrainingSet) -> List[Bounds]:
    return [b for k in kernel.kernels for b in default_bounds(k, data)]


@default_bounds.register
def _product_bounds(kernel: ProductAcrossSlices, data: TrainingSet) -> List[Bounds]:
    bounds = []
    for factor, cols in kernel.factors:
        sliced = TrainingSet(data.X[:, list(cols)], data.y)
        bounds.extend(default_bounds(factor, sliced))
    return bounds


def resolve_bounds(
    kernel: Kernel, data: TrainingSet, overrides: Mapping[str, Bounds] = None
) -> List[Bounds]:
    """Default bounds per free parameter, with named overrides applied."""
    names = kernel.param_names
    overrides = dict(overrides or {})
    unknown = set(overrides) - set(names)
    if unknown:
        raise InvalidArgument(
            f"bounds given for unknown parameter(s) {sorted(unknown)}; "
            f"known: {list(names)}"
        )
    bounds = list(default_bounds(kernel, data))
    for i, name in enumerate(names):
        if name in overrides:
            bounds[i] = tuple(float(b) for b in overrides[name])  # type: ignore
        _check_bound(name, *bounds[i])
    return bounds


def _start_points(
    theta0: Array, log_bounds: Array, n_starts: int, seed: int
) -> List[Array]:
    lo, hi = log_bounds[:, 0], log_bounds[:, 1]
    starts = [np.clip(theta0, lo, hi)]
    if n_starts > 1 and theta0.size:
        sampler = qmc.Sobol(d=theta0.size, scramble=True, seed=seed)
        with warnings.catch_warnings():
            # Sobol balance warnings for non-power-of-two counts.
            warnings.simplefilter("ignore", UserWarning)
            unit = sampler.random(n_starts - 1)
        starts.extend(lo + u * (hi - lo) for u in unit)
    return starts


def _local_search(
    kernel: Kernel,
    mean: MeanFunction,
    data: TrainingSet,
    x0: Array,
    log_bounds: Array,
    spec: OptimizationSpec,
) -> StartTrace:
    def objective(theta):
        try:
            value, gradient = log_marginal_likelihood(
                kernel.with_theta(theta), mean, data
            )
        except GreyboxError as exc:
            logger.debug("objective failed at %s: %s", theta, exc)
            return _FAILED_OBJECTIVE, np.zeros_like(theta)
        return -value, -gradient

    start_value, _ = objective(x0)
    if start_value >= _FAILED_OBJECTIVE:
        return StartTrace(
            tuple(x0), -math.inf, tuple(x0), -math.inf, 0, False, "start failed"
        )
    if x0.size == 0:
        return StartTrace((), -start_value, (), -start_value, 0, True, "no parameters")
    result = scipy.optimize.minimize(
        objective,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=[tuple(b) for b in log_bounds],
        options={"maxiter": spec.max_iterations, "ftol": spec.tolerance},
    )
    final = np.clip(result.x, log_bounds[:, 0], log_bounds[:, 1])
    final_value = float(objective(final)[0])
    if final_value > start_value:
        final, final_value = x0, start_value
    message = result.message
    if isinstance(message, bytes):
        message = message.decode("ascii", "replace")
    return StartTrace(
        tuple(float(v) for v in x0),
        -float(start_value),
        tuple(float(v) for v in final),
        -final_value,
        int(result.nit),
        bool(result.success),
        str(message),
    )


def _prepare(kernel: Kernel, data: TrainingSet, spec: OptimizationSpec):
    bounds = resolve_bounds(kernel, data, spec.bounds)
    log_bounds = np.log(np.asarray(bounds, dtype=float).reshape(-1, 2))
    starts = _start_points(kernel.theta, log_bounds, spec.n_starts, spec.seed)
    return log_bounds, starts


def _collect(
    kernel: Kernel, traces: Sequence[StartTrace]
) -> OptimizationResult:
    usable = [t for t in traces if math.isfinite(t.final_lml)]
    if not usable:
        raise OptimizationFailed(
            f"all {len(traces)} start(s) failed to factorize", traces=traces
        )
    # Highest LML wins; ties go to the lexicographically lowest log-parameters.
    best = min(usable, key=lambda t: (-t.final_lml, t.final))
    fitted = kernel.with_theta(np.asarray(best.final)).canonical()
    for i, t in enumerate(traces):
        logger.debug(
            "start %i: lml %.6g -> %.6g in %i iterations (%s)",
            i,
            t.start_lml,
            t.final_lml,
            t.iterations,
            t.message,
        )
    return OptimizationResult(fitted, named_params(fitted), best.final_lml, list(traces))


def optimize(
    kernel: Kernel,
    mean: Optional[MeanFunction],
    data: TrainingSet,
    spec: Optional[OptimizationSpec] = None,
) -> OptimizationResult:
    """
    Maximize the log marginal likelihood of ``data`` over the free
    hyperparameters of ``kernel``; the mean function is held fixed.
    """
    spec = spec or OptimizationSpec()
    mean = mean if mean is not None else ZeroMean()
    if spec.n_workers > 1:
        return anyio.run(functools.partial(aoptimize, kernel, mean, data, spec))
    log_bounds, starts = _prepare(kernel, data, spec)
    traces = [
        _local_search(kernel, mean, data, x0, log_bounds, spec) for x0 in starts
    ]
    return _collect(kernel, traces)


async def aoptimize(
    kernel: Kernel,
    mean: Optional[MeanFunction],
    data: TrainingSet,
    spec: Optional[OptimizationSpec] = None,
) -> OptimizationResult:
    """
    As ``optimize``, with starts run in worker threads, at most
    ``spec.n_workers`` at a time.
    """
    spec = spec or OptimizationSpec()
    mean = mean if mean is not None else ZeroMean()
    log_bounds, starts = _prepare(kernel, data, spec)
    limiter = anyio.CapacityLimiter(spec.n_workers)
    traces: List[Optional[StartTrace]] = [None] * len(starts)

    async def run_start(i: int, x0: Array) -> None:
        traces[i] = await anyio.to_thread.run_sync(
            _local_search, kernel, mean, data, x0, log_bounds, spec, limiter=limiter
        )

    async with anyio.create_task_group() as tg:
        for i, x0 in enumerate(starts):
            tg.start_soon(run_start, i, x0)
    return _collect(kernel, traces)  # type: ignore[arg-type]
