"""
Ground-truth generators: a white-noise driven SDOF oscillator, an
Euler-Bernoulli cantilever under an impulse, and a synthetic bridge-like
displacement series driven by temperature.
"""
import dataclasses
import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.optimize

from ._exceptions import InvalidArgument, NumericError
from ._models import TrainingSet, Trajectory
from ._params import SdofParams
from ._types import Array, ArrayLike
from ._utils import as_vector, derive_seeds

logger = logging.getLogger(__name__)

#: Shortest allowed period, in time steps, for SDOF simulation.
MIN_STEPS_PER_PERIOD = 10
_SHAPE_GRID = 4001
_MAX_BEAM_MODES = 10


@dataclasses.dataclass(frozen=True)
class SdofSystem:
    """
    m·ÿ + c·ẏ + k·y = F(t), with F white noise of intensity ``forcing_variance``.
    """

    mass: float
    damping: float
    stiffness: float
    forcing_variance: float = 1.0

    def __post_init__(self):
        for name in ("mass", "stiffness"):
            value = float(getattr(self, name))
            if not (value > 0 and math.isfinite(value)):
                raise InvalidArgument(f"{name} must be > 0, got {value!r}")
            object.__setattr__(self, name, value)
        for name in ("damping", "forcing_variance"):
            value = float(getattr(self, name))
            if not (value >= 0 and math.isfinite(value)):
                raise InvalidArgument(f"{name} must be >= 0, got {value!r}")
            object.__setattr__(self, name, value)
        if not 0 < self.damping_ratio < 1:
            raise InvalidArgument(
                f"damping ratio must lie in (0, 1), got {self.damping_ratio!r}"
            )

    @property
    def natural_frequency(self) -> float:
        return math.sqrt(self.stiffness / self.mass)

    @property
    def damping_ratio(self) -> float:
        return self.damping / (2.0 * math.sqrt(self.stiffness * self.mass))

    @classmethod
    def from_modal(
        cls,
        natural_frequency: float,
        damping_ratio: float,
        mass: float = 1.0,
        forcing_variance: float = 1.0,
    ) -> "SdofSystem":
        stiffness = mass * natural_frequency**2
        damping = 2.0 * damping_ratio * math.sqrt(stiffness * mass)
        return cls(mass, damping, stiffness, forcing_variance)

    def to_params(self) -> SdofParams:
        """Covariance hyperparameters of the stationary response."""
        return SdofParams.from_physical(
            self.mass, self.damping, self.stiffness, self.forcing_variance
        )


def _psd_sqrt(C: Array) -> Array:
    values, vectors = scipy.linalg.eigh(C)
    return vectors * np.sqrt(np.clip(values, 0.0, None))


def _discretize(system: SdofSystem, dt: float) -> Tuple[Array, Array, Array]:
    m, c, k = system.mass, system.damping, system.stiffness
    A = np.array([[0.0, 1.0], [-k / m, -c / m]])
    L = np.array([[0.0], [1.0 / m]])
    LQL = system.forcing_variance * (L @ L.T)
    # Van Loan: one matrix exponential gives the transition and the
    # integrated process-noise covariance over a step.
    block = np.zeros((4, 4))
    block[:2, :2] = -A
    block[:2, 2:] = LQL
    block[2:, 2:] = A.T
    G = scipy.linalg.expm(block * dt)
    transition = G[2:, 2:].T
    step_cov = transition @ G[:2, 2:]
    stationary = scipy.linalg.solve_continuous_lyapunov(A, -LQL)
    return (
        transition,
        0.5 * (step_cov + step_cov.T),
        0.5 * (stationary + stationary.T),
    )


def _check_resolution(system: SdofSystem, dt: float, n_steps: int) -> None:
    if not (dt > 0 and math.isfinite(dt)):
        raise InvalidArgument(f"dt must be > 0, got {dt!r}")
    if n_steps < 1:
        raise InvalidArgument(f"n_steps must be >= 1, got {n_steps}")
    period = 2.0 * math.pi / system.natural_frequency
    if dt > period / MIN_STEPS_PER_PERIOD:
        raise InvalidArgument(
            f"dt={dt:g} under-resolves the natural period {period:g}; "
            f"need at least {MIN_STEPS_PER_PERIOD} steps per period"
        )


def _run_sdof(
    system: SdofSystem,
    dt: float,
    n_steps: int,
    rng: np.random.Generator,
    initial_state: Optional[Array] = None,
) -> Array:
    transition, step_cov, stationary = _discretize(system, dt)
    noise = rng.standard_normal((n_steps, 2)) @ _psd_sqrt(step_cov).T
    if initial_state is None:
        state = _psd_sqrt(stationary) @ rng.standard_normal(2)
    else:
        state = initial_state
    out = np.empty(n_steps)
    for i in range(n_steps):
        out[i] = state[0]
        state = transition @ state + noise[i]
    return out


def _sdof_meta(system: SdofSystem, dt: float, seed) -> dict:
    return {
        "mass": system.mass,
        "damping": system.damping,
        "stiffness": system.stiffness,
        "forcing_variance": system.forcing_variance,
        "natural_frequency": system.natural_frequency,
        "damping_ratio": system.damping_ratio,
        "dt": dt,
        "seed": seed,
    }


def simulate_sdof(
    system: SdofSystem,
    dt: float,
    n_steps: int,
    seed: int,
    initial_state: Optional[Sequence[float]] = None,
) -> Trajectory:
    """
    Exactly discretized displacement response.

    By default the response starts from the stationary distribution, so every
    sample has the stationary variance. An ``initial_state`` (displacement,
    velocity) starts it there instead; with ``forcing_variance=0`` this is
    the free vibration of the system.
    """
    _check_resolution(system, dt, n_steps)
    start = None
    if initial_state is not None:
        start = as_vector(initial_state, "initial_state")
        if start.shape != (2,):
            raise InvalidArgument("initial_state is (displacement, velocity)")
    rng = np.random.default_rng(seed)
    values = _run_sdof(system, dt, n_steps, rng, start)
    logger.debug(
        "simulated SDOF: ω_n=%.6g ζ=%.4g, %i steps of %.4g s",
        system.natural_frequency,
        system.damping_ratio,
        n_steps,
        dt,
    )
    return Trajectory(dt * np.arange(n_steps), values, _sdof_meta(system, dt, seed))


def simulate_sdof_batch(
    system: SdofSystem, dt: float, n_steps: int, n_trajectories: int, seed: int
) -> List[Trajectory]:
    """
    Independent trajectories, each seeded from its own child of ``seed``.
    """
    _check_resolution(system, dt, n_steps)
    if n_trajectories < 1:
        raise InvalidArgument("n_trajectories must be >= 1")
    times = dt * np.arange(n_steps)
    out = []
    for i, child in enumerate(derive_seeds(seed, n_trajectories)):
        values = _run_sdof(system, dt, n_steps, np.random.default_rng(child))
        meta = _sdof_meta(system, dt, seed)
        meta["batch_index"] = i
        out.append(Trajectory(times, values, meta))
    return out


@dataclasses.dataclass(frozen=True)
class BeamSpec:
    """
    Uniform cantilever, clamped at x=0, with unit mass per length.

    Modal frequencies follow the Euler-Bernoulli ratios (β_i/β_1)² of
    ``fundamental_frequency`` unless given explicitly. A unit impulse of
    ``load_magnitude`` is applied at ``load_position`` at t=0.
    """

    length: float = 1.0
    n_modes: int = 2
    damping_ratios: Union[float, Tuple[float, ...]] = 0.02
    fundamental_frequency: float = 2.0 * math.pi
    modal_frequencies: Optional[Tuple[float, ...]] = None
    load_position: Optional[float] = None
    load_magnitude: float = 1.0

    def __post_init__(self):
        if not (self.length > 0 and math.isfinite(self.length)):
            raise InvalidArgument(f"length must be > 0, got {self.length!r}")
        if not 1 <= self.n_modes <= _MAX_BEAM_MODES:
            raise InvalidArgument(
                f"n_modes must be in [1, {_MAX_BEAM_MODES}], got {self.n_modes}"
            )
        ratios = np.broadcast_to(
            np.asarray(self.damping_ratios, dtype=float), (self.n_modes,)
        )
        if np.any(ratios <= 0) or np.any(ratios >= 1):
            raise InvalidArgument("modal damping ratios must lie in (0, 1)")
        object.__setattr__(self, "damping_ratios", tuple(float(z) for z in ratios))
        if self.modal_frequencies is not None:
            freqs = tuple(float(w) for w in self.modal_frequencies)
            if len(freqs) != self.n_modes:
                raise InvalidArgument(
                    f"{len(freqs)} modal frequencies for {self.n_modes} modes"
                )
            if any(w <= 0 for w in freqs) or any(
                b <= a for a, b in zip(freqs, freqs[1:])
            ):
                raise InvalidArgument(
                    "modal frequencies must be positive and increasing"
                )
            object.__setattr__(self, "modal_frequencies", freqs)
        elif not self.fundamental_frequency > 0:
            raise InvalidArgument("fundamental_frequency must be > 0")
        position = self.length if self.load_position is None else self.load_position
        if not 0 <= position <= self.length:
            raise InvalidArgument(
                f"load position {position} lies outside [0, {self.length}]"
            )
        object.__setattr__(self, "load_position", float(position))

    @property
    def frequencies(self) -> Tuple[float, ...]:
        if self.modal_frequencies is not None:
            return self.modal_frequencies  # type: ignore[return-value]
        roots = beam_roots(self.n_modes)
        return tuple(
            float(self.fundamental_frequency * (r / roots[0]) ** 2) for r in roots
        )


def _frequency_equation(x: float) -> float:
    # cos(x)·cosh(x) + 1 scaled by 1/cosh(x): same roots, no overflow.
    return math.cos(x) + 1.0 / math.cosh(x)


def beam_roots(n_modes: int) -> Array:
    """
    First ``n_modes`` roots β_iL of cos(βL)·cosh(βL) = −1, in increasing
    order. Root i is bracketed by [(i−1)π, iπ].
    """
    roots = []
    for i in range(1, n_modes + 1):
        lo, hi = (i - 1) * math.pi, i * math.pi
        if _frequency_equation(lo) * _frequency_equation(hi) > 0:
            raise NumericError(f"could not bracket beam root {i} in [{lo}, {hi}]")
        roots.append(scipy.optimize.bisect(_frequency_equation, lo, hi, xtol=1e-12))
    return np.asarray(roots)


def _raw_shapes(beta: Array, beta_l: Array, x: Array, derivative: int) -> Array:
    z = np.outer(x, beta)
    # σ = (cosh βL + cos βL)/(sinh βL + sin βL); 1−σ is formed directly
    # because σ is within e^{-βL} of one.
    denom = np.sinh(beta_l) + np.sin(beta_l)
    one_minus = (np.sin(beta_l) - np.cos(beta_l) - np.exp(-beta_l)) / denom
    sigma = 1.0 - one_minus
    grow = one_minus * np.exp(z)
    decay = (1.0 + sigma) * np.exp(-z)
    if derivative == 0:
        return 0.5 * (grow + decay) - np.cos(z) + sigma * np.sin(z)
    return beta * (0.5 * (grow - decay) + np.sin(z) + sigma * np.cos(z))


def _shape_scale(spec: BeamSpec, beta: Array, beta_l: Array) -> Array:
    grid = np.linspace(0.0, spec.length, _SHAPE_GRID)
    raw = _raw_shapes(beta, beta_l, grid, 0)
    scale = np.max(np.abs(raw), axis=0)
    return np.sign(raw[-1]) / scale


def beam_mode_shapes(
    spec: BeamSpec, x_points: ArrayLike, derivative: int = 0
) -> Array:
    """
    Cantilever mode shapes at ``x_points`` as a (len(x), n_modes) matrix,
    scaled to unit maximum magnitude and signed so the tip value is
    positive. ``derivative=1`` gives the slopes of the same shapes.
    """
    if derivative not in (0, 1):
        raise InvalidArgument(f"derivative must be 0 or 1, got {derivative}")
    x = as_vector(x_points, "x_points")
    if np.any(x < 0) or np.any(x > spec.length):
        raise InvalidArgument(f"x_points must lie in [0, {spec.length}]")
    beta_l = beam_roots(spec.n_modes)
    beta = beta_l / spec.length
    return _raw_shapes(beta, beta_l, x, derivative) * _shape_scale(
        spec, beta, beta_l
    )


def _modal_masses(spec: BeamSpec) -> Array:
    grid = np.linspace(0.0, spec.length, _SHAPE_GRID)
    shapes = beam_mode_shapes(spec, grid)
    return scipy.integrate.simpson(shapes**2, x=grid, axis=0)


def beam_modal_response(spec: BeamSpec, times: ArrayLike) -> Array:
    """
    Modal coordinates q_i(t): the damped free response of each mode to the
    impulse projected onto it.
    """
    t = as_vector(times, "times")
    if np.any(t < 0):
        raise InvalidArgument("beam response times must be >= 0")
    omega = np.asarray(spec.frequencies)
    zeta = np.asarray(spec.damping_ratios)
    omega_d = omega * np.sqrt(1.0 - zeta**2)
    forcing = spec.load_magnitude * beam_mode_shapes(spec, [spec.load_position])[0]
    gain = forcing / (_modal_masses(spec) * omega_d)
    return gain * np.exp(-np.outer(t, zeta * omega)) * np.sin(np.outer(t, omega_d))


def simulate_beam(
    spec: BeamSpec, dt: float, n_steps: int, x_points: ArrayLike
) -> Trajectory:
    """Displacement field y(x, t) as an (n_steps, len(x)) trajectory."""
    if not (dt > 0 and math.isfinite(dt)):
        raise InvalidArgument(f"dt must be > 0, got {dt!r}")
    if n_steps < 1:
        raise InvalidArgument(f"n_steps must be >= 1, got {n_steps}")
    x = as_vector(x_points, "x_points")
    times = dt * np.arange(n_steps)
    q = beam_modal_response(spec, times)
    shapes = beam_mode_shapes(spec, x)
    values = q @ shapes.T
    logger.debug(
        "simulated beam: %i modes at %s rad/s, %i sensors, %i steps",
        spec.n_modes,
        spec.frequencies,
        x.size,
        n_steps,
    )
    meta = {
        "length": spec.length,
        "frequencies": list(spec.frequencies),
        "damping_ratios": list(spec.damping_ratios),  # type: ignore[arg-type]
        "load_position": spec.load_position,
        "load_magnitude": spec.load_magnitude,
        "x_points": x.tolist(),
        "dt": dt,
    }
    return Trajectory(times, values, meta)


def project_onto_modes(
    spec: BeamSpec, field: ArrayLike, x_points: ArrayLike
) -> Array:
    """
    Least-squares modal coordinates of a sampled field, one row per time.
    """
    x = as_vector(x_points, "x_points")
    field = np.atleast_2d(np.asarray(field, dtype=float))
    if field.shape[1] != x.size:
        raise InvalidArgument(
            f"field has {field.shape[1]} column(s) for {x.size} x point(s)"
        )
    if x.size < spec.n_modes:
        raise InvalidArgument(
            f"{x.size} point(s) cannot resolve {spec.n_modes} mode(s)"
        )
    shapes = beam_mode_shapes(spec, x)
    coef, *_ = scipy.linalg.lstsq(shapes, field.T)
    return coef.T


@dataclasses.dataclass(frozen=True)
class BridgeSeriesConfig:
    """
    Generator settings for ``synth_bridge_series``. Time is in days and
    temperature in °C.
    """

    samples_per_day: int = 8
    mean_temperature: float = 10.0
    seasonal_amplitude: float = 8.0
    daily_amplitude: float = 3.0
    temperature_noise: float = 0.5
    slope: float = -2.5
    intercept: float = 400.0
    residual_amplitude: float = 1.5
    residual_phase: float = 0.3
    noise_std: float = 0.2

    def __post_init__(self):
        if self.samples_per_day < 4:
            raise InvalidArgument("samples_per_day must be >= 4")
        for name in ("temperature_noise", "residual_amplitude", "noise_std"):
            if getattr(self, name) < 0:
                raise InvalidArgument(f"{name} must be >= 0")


def synth_bridge_series(
    seed: int, n_days: int, config: Optional[BridgeSeriesConfig] = None
) -> TrainingSet:
    """
    Inputs are (time, temperature); the target is affine in temperature
    plus a twice-daily traffic-like residual and observation noise.

    The series starts at the seasonal temperature peak, so the first weeks
    only see a narrow band of warm temperatures.
    """
    if n_days < 60:
        raise InvalidArgument(f"n_days must be >= 60, got {n_days}")
    config = config or BridgeSeriesConfig()
    rng = np.random.default_rng(seed)
    n = n_days * config.samples_per_day
    t = np.arange(n) / config.samples_per_day
    temperature = (
        config.mean_temperature
        + config.seasonal_amplitude * np.cos(2.0 * math.pi * t / 365.0)
        + config.daily_amplitude * np.sin(2.0 * math.pi * t)
        + config.temperature_noise * rng.standard_normal(n)
    )
    residual = config.residual_amplitude * np.cos(
        4.0 * math.pi * (t - config.residual_phase)
    )
    y = (
        config.slope * temperature
        + config.intercept
        + residual
        + config.noise_std * rng.standard_normal(n)
    )
    meta = dataclasses.asdict(config)
    meta.update(seed=seed, n_days=n_days, columns=["time", "temperature"])
    return TrainingSet(np.column_stack([t, temperature]), y, meta)


def sensor_grid(spec: BeamSpec, n_points: int) -> Array:
    """``n_points`` equally spaced positions in (0, L], ending at the tip."""
    if n_points < 1:
        raise InvalidArgument("n_points must be >= 1")
    return spec.length * np.arange(1, n_points + 1) / n_points


def stack_field(times: Array, x_points: Sequence[float]) -> Array:
    """(time, x) input rows for every pair, time-major."""
    tt, xx = np.meshgrid(np.asarray(times), np.asarray(x_points), indexing="ij")
    return np.column_stack([tt.ravel(), xx.ravel()])
