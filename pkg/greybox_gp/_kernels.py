"""
Covariance functions.

Every kernel is immutable. Positive hyperparameters live in log-space: a
kernel exposes the free ones as ``theta`` (natural log of the natural-unit
values) and builds a modified copy with ``with_theta``. ``gradient`` returns
∂Gram/∂theta for the training Gram, including any noise on the diagonal.
"""
import logging
import math
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist

from ._exceptions import InvalidArgument
from ._params import ModalSet, SdofParams, SeParams
from ._types import Array, ArrayLike, Fixed, InputSlice, SliceLike
from ._utils import as_inputs, normalize_slice, take_columns

logger = logging.getLogger(__name__)


class Kernel(object):
    name = "kernel"
    #: Number of input columns the kernel reads, ``None`` for "any".
    n_dims: Optional[int] = None

    def gram(self, X: Array, Y: Array, match_diagonal: bool) -> Array:
        raise NotImplementedError()

    def diag(self, X: Array, match_diagonal: bool = False) -> Array:
        return np.diag(self.gram(X, X, match_diagonal)).copy()

    @property
    def theta(self) -> Array:
        return np.zeros(0)

    @property
    def param_names(self) -> Tuple[str, ...]:
        return ()

    def with_theta(self, theta: ArrayLike) -> "Kernel":
        theta = np.asarray(theta, dtype=float)
        if theta.size:
            raise InvalidArgument(f"{self.name} has no free parameters")
        return self

    def gradient(self, X: Array) -> Array:
        return np.zeros((0, X.shape[0], X.shape[0]))

    def canonical(self) -> "Kernel":
        """Return an equivalent kernel in canonical parameter order."""
        return self

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def __call__(
        self,
        X: ArrayLike,
        Y: Optional[ArrayLike] = None,
        match_diagonal: Optional[bool] = None,
    ) -> Array:
        if Y is None:
            return gram(self, X, X, True if match_diagonal is None else match_diagonal)
        return gram(self, X, Y, bool(match_diagonal))

    def __add__(self, other: "Kernel") -> "Sum":
        if not isinstance(other, Kernel):
            return NotImplemented
        return combine_sum([self, other])


class _Leaf(Kernel):
    """
    Kernel with its own parameters, reading ``active_dims`` columns.

    ``fixed`` is either a bool for all parameters or the names of the
    parameters held at their current values.
    """

    def __init__(self, active_dims: SliceLike = None, fixed: Fixed = False) -> None:
        self.active_dims: InputSlice = normalize_slice(active_dims)
        if isinstance(fixed, str):
            fixed = (fixed,)
        self.fixed: Union[bool, Tuple[str, ...]] = (
            bool(fixed) if isinstance(fixed, (bool, np.bool_)) else tuple(fixed)
        )

    def _columns(self, X: Array) -> Array:
        return take_columns(X, self.active_dims, self.n_dims, self.name)  # type: ignore

    def _natural(self) -> Array:
        raise NotImplementedError()

    def _natural_names(self) -> Tuple[str, ...]:
        raise NotImplementedError()

    def _replace(self, natural: Array) -> "_Leaf":
        raise NotImplementedError()

    def _natural_gradient(self, X: Array) -> Array:
        raise NotImplementedError()

    def free_mask(self) -> Array:
        """Which natural parameters are optimizable, in natural order."""
        names = self._natural_names()
        if isinstance(self.fixed, bool):
            return np.full(len(names), not self.fixed)
        unknown = set(self.fixed) - set(names)
        if unknown:
            raise InvalidArgument(
                f"{self.name} has no parameter(s) {sorted(unknown)} to fix"
            )
        return np.array([n not in self.fixed for n in names], dtype=bool)

    @property
    def theta(self) -> Array:
        return np.log(self._natural()[self.free_mask()])

    @property
    def param_names(self) -> Tuple[str, ...]:
        mask = self.free_mask()
        return tuple(n for n, free in zip(self._natural_names(), mask) if free)

    def with_theta(self, theta: ArrayLike) -> "_Leaf":
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.n_params:
            raise InvalidArgument(
                f"{self.name} takes {self.n_params} parameter(s), got {theta.size}"
            )
        if theta.size == 0:
            return self
        natural = self._natural().copy()
        natural[self.free_mask()] = np.exp(theta)
        return self._replace(natural)

    def gradient(self, X: Array) -> Array:
        mask = self.free_mask()
        if not mask.any():
            return np.zeros((0, X.shape[0], X.shape[0]))
        return self._natural_gradient(X)[mask]

    def __repr__(self) -> str:
        values = ", ".join(
            f"{n}={v:.6g}" for n, v in zip(self._natural_names(), self._natural())
        )
        return f"{type(self).__name__}({values})"


class SquaredExponential(_Leaf):
    name = "se"

    def __init__(
        self,
        signal_variance: float,
        length_scales: Union[float, Sequence[float]],
        active_dims: SliceLike = None,
        fixed: Fixed = False,
    ) -> None:
        super().__init__(active_dims, fixed)
        self.params = SeParams(signal_variance, tuple(np.atleast_1d(length_scales)))
        self.n_dims = self.params.n_dims

    @property
    def signal_variance(self) -> float:
        return self.params.signal_variance

    @property
    def length_scales(self) -> Tuple[float, ...]:
        return self.params.length_scales

    def _natural(self) -> Array:
        return np.array([self.signal_variance, *self.length_scales])

    def _natural_names(self) -> Tuple[str, ...]:
        if self.n_dims == 1:
            return ("signal_variance", "length_scale")
        return ("signal_variance",) + tuple(
            f"length_scale_{d}" for d in range(self.n_dims)
        )

    def _replace(self, natural: Array) -> "SquaredExponential":
        return SquaredExponential(
            natural[0], tuple(natural[1:]), self.active_dims, self.fixed
        )

    def gram(self, X: Array, Y: Array, match_diagonal: bool) -> Array:
        scales = np.asarray(self.length_scales)
        A = self._columns(X) / scales
        B = self._columns(Y) / scales
        return self.signal_variance * np.exp(-0.5 * cdist(A, B, "sqeuclidean"))

    def diag(self, X: Array, match_diagonal: bool = False) -> Array:
        self._columns(X)
        return np.full(X.shape[0], self.signal_variance)

    def _natural_gradient(self, X: Array) -> Array:
        cols = self._columns(X)
        K = self.gram(X, X, True)
        grads = [K]
        for d, scale in enumerate(self.length_scales):
            diff = (cols[:, d][:, None] - cols[:, d][None, :]) / scale
            grads.append(K * diff**2)
        return np.stack(grads)


class WhiteNoise(_Leaf):
    """
    σ_n² on the diagonal of a training Gram, nothing anywhere else.

    A zero noise variance has no log-space representation and is always
    treated as fixed.
    """

    name = "noise"

    def __init__(self, noise_variance: float, fixed: Fixed = False) -> None:
        noise_variance = float(noise_variance)
        if not math.isfinite(noise_variance) or noise_variance < 0:
            raise InvalidArgument(
                f"noise_variance must be >= 0, got {noise_variance!r}"
            )
        super().__init__(None, True if noise_variance == 0.0 else fixed)
        self.noise_variance = noise_variance

    def _natural(self) -> Array:
        return np.array([self.noise_variance])

    def _natural_names(self) -> Tuple[str, ...]:
        return ("noise_variance",)

    def _replace(self, natural: Array) -> "WhiteNoise":
        return WhiteNoise(natural[0], self.fixed)

    def gram(self, X: Array, Y: Array, match_diagonal: bool) -> Array:
        if match_diagonal:
            if X.shape[0] != Y.shape[0]:
                raise InvalidArgument("a matched-diagonal Gram must be square")
            return self.noise_variance * np.eye(X.shape[0])
        return np.zeros((X.shape[0], Y.shape[0]))

    def diag(self, X: Array, match_diagonal: bool = False) -> Array:
        return np.full(X.shape[0], self.noise_variance if match_diagonal else 0.0)

    def _natural_gradient(self, X: Array) -> Array:
        return (self.noise_variance * np.eye(X.shape[0]))[None]


def _check_tau(tau: ArrayLike) -> Array:
    tau = np.asarray(tau, dtype=float)
    if not np.all(np.isfinite(tau)):
        raise InvalidArgument("time lag must be finite")
    return tau


def _sdof_terms(tau: Array, params: SdofParams, with_gradient: bool):
    omega = params.natural_frequency
    zeta = params.damping_ratio
    scale = params.variance
    decay = zeta * omega
    omega_d = params.damped_frequency
    ratio = decay / omega_d
    s = np.abs(tau)
    envelope = scale * np.exp(-decay * s)
    cos = np.cos(omega_d * s)
    sin = np.sin(omega_d * s)
    k = envelope * (cos + ratio * sin)
    if not with_gradient:
        return k, None
    d_log_omega = -3.0 * k - envelope * s * (omega**2 / omega_d) * sin
    root = math.sqrt(1.0 - zeta**2)
    d_omega_d = -decay * omega / omega_d
    d_ratio = root**-3
    d_zeta = -k / zeta + envelope * (
        -s * omega * (cos + ratio * sin)
        + d_omega_d * s * (ratio * cos - sin)
        + d_ratio * sin
    )
    return k, (d_log_omega, zeta * d_zeta, k)


def eval_se(xp: ArrayLike, xq: ArrayLike, same_index: bool, params: SeParams) -> float:
    """
    Squared exponential plus white noise at one pair of inputs.

    The noise term only applies when ``same_index`` says both arguments are
    the same observation.
    """
    xp = np.atleast_1d(np.asarray(xp, dtype=float))
    xq = np.atleast_1d(np.asarray(xq, dtype=float))
    if xp.shape != (params.n_dims,) or xq.shape != (params.n_dims,):
        raise InvalidArgument(
            f"expected {params.n_dims}-dimensional points, got {xp.shape} and {xq.shape}"
        )
    r2 = float(np.sum(((xp - xq) / np.asarray(params.length_scales)) ** 2))
    value = params.signal_variance * math.exp(-0.5 * r2)
    if same_index:
        value += params.noise_variance
    return value


def eval_sdof(tau: ArrayLike, params: SdofParams):
    """
    Stationary autocovariance of an SDOF oscillator driven by white noise.

    Accepts a scalar or an array of lags and returns the same shape.
    """
    tau = _check_tau(tau)
    k, _ = _sdof_terms(tau, params, False)
    return float(k) if k.ndim == 0 else k


def eval_mdof(tau: ArrayLike, modes: Union[ModalSet, Sequence[SdofParams]]):
    modes = tuple(modes)
    if not modes:
        raise InvalidArgument("an MDOF covariance needs at least one mode")
    tau = _check_tau(tau)
    k = sum(_sdof_terms(tau, m, False)[0] for m in modes)
    return float(k) if np.ndim(k) == 0 else k


class Sdof(_Leaf):
    name = "sdof"
    n_dims = 1

    def __init__(
        self,
        natural_frequency: float,
        damping_ratio: float,
        amplitude: float,
        active_dims: SliceLike = None,
        fixed: Fixed = False,
    ) -> None:
        super().__init__(active_dims, fixed)
        self.params = SdofParams(natural_frequency, damping_ratio, amplitude)

    @classmethod
    def from_params(
        cls, params: SdofParams, active_dims: SliceLike = None, fixed: Fixed = False
    ) -> "Sdof":
        return cls(
            params.natural_frequency,
            params.damping_ratio,
            params.amplitude,
            active_dims,
            fixed,
        )

    def _natural(self) -> Array:
        p = self.params
        return np.array([p.natural_frequency, p.damping_ratio, p.amplitude])

    def _natural_names(self) -> Tuple[str, ...]:
        return ("natural_frequency", "damping_ratio", "amplitude")

    def _replace(self, natural: Array) -> "Sdof":
        return Sdof(*natural, active_dims=self.active_dims, fixed=self.fixed)

    def _lags(self, X: Array, Y: Array) -> Array:
        return self._columns(X)[:, 0][:, None] - self._columns(Y)[:, 0][None, :]

    def gram(self, X: Array, Y: Array, match_diagonal: bool) -> Array:
        return _sdof_terms(self._lags(X, Y), self.params, False)[0]

    def diag(self, X: Array, match_diagonal: bool = False) -> Array:
        self._columns(X)
        return np.full(X.shape[0], self.params.variance)

    def _natural_gradient(self, X: Array) -> Array:
        _, grads = _sdof_terms(self._lags(X, X), self.params, True)
        return np.stack(grads)


class Mdof(_Leaf):
    """
    Sum of SDOF covariances, one per mode, over a single time column.
    """

    name = "mdof"
    n_dims = 1

    def __init__(
        self,
        modes: Union[ModalSet, Iterable[SdofParams]],
        active_dims: SliceLike = None,
        fixed: Fixed = False,
        _ordered: bool = True,
    ) -> None:
        super().__init__(active_dims, fixed)
        modes = tuple(modes)
        if _ordered:
            modes = ModalSet(modes).modes
        elif not modes:
            raise InvalidArgument("an MDOF covariance needs at least one mode")
        self.modes: Tuple[SdofParams, ...] = modes

    def _natural(self) -> Array:
        return np.array(
            [
                v
                for m in self.modes
                for v in (m.natural_frequency, m.damping_ratio, m.amplitude)
            ]
        )

    def _natural_names(self) -> Tuple[str, ...]:
        return tuple(
            f"mode{i}.{n}"
            for i in range(len(self.modes))
            for n in ("natural_frequency", "damping_ratio", "amplitude")
        )

    def _replace(self, natural: Array) -> "Mdof":
        modes = [SdofParams(*natural[i : i + 3]) for i in range(0, natural.size, 3)]
        # Optimizer steps may swap mode order; ``canonical`` restores it.
        return Mdof(modes, self.active_dims, self.fixed, _ordered=False)

    def canonical(self) -> "Mdof":
        modes = sorted(self.modes, key=lambda m: m.natural_frequency)
        return Mdof(modes, self.active_dims, self.fixed)

    def _lags(self, X: Array, Y: Array) -> Array:
        return self._columns(X)[:, 0][:, None] - self._columns(Y)[:, 0][None, :]

    def gram(self, X: Array, Y: Array, match_diagonal: bool) -> Array:
        tau = self._lags(X, Y)
        return sum(_sdof_terms(tau, m, False)[0] for m in self.modes)

    def diag(self, X: Array, match_diagonal: bool = False) -> Array:
        self._columns(X)
        return np.full(X.shape[0], sum(m.variance for m in self.modes))

    def _natural_gradient(self, X: Array) -> Array:
        tau = self._lags(X, X)
        grads: List[Array] = []
        for mode in self.modes:
            grads.extend(_sdof_terms(tau, mode, True)[1])
        return np.stack(grads)


class Sum(Kernel):
    name = "sum"

    def __init__(self, kernels: Sequence[Kernel]) -> None:
        kernels = tuple(kernels)
        if not kernels:
            raise InvalidArgument("cannot sum an empty list of kernels")
        # Domain agreement is checked per call, when columns are taken.
        self.kernels = kernels

    def _sizes(self) -> List[int]:
        return [k.n_params for k in self.kernels]

    @property
    def theta(self) -> Array:
        return np.concatenate([k.theta for k in self.kernels])

    @property
    def param_names(self) -> Tuple[str, ...]:
        return tuple(
            f"k{i}.{n}" for i, k in enumerate(self.kernels) for n in k.param_names
        )

    def with_theta(self, theta: ArrayLike) -> "Sum":
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.n_params:
            raise InvalidArgument(
                f"sum takes {self.n_params} parameter(s), got {theta.size}"
            )
        parts = np.split(theta, np.cumsum(self._sizes())[:-1])
        return Sum([k.with_theta(p) for k, p in zip(self.kernels, parts)])

    def canonical(self) -> "Sum":
        return Sum([k.canonical() for k in self.kernels])

    def gram(self, X: Array, Y: Array, match_diagonal: bool) -> Array:
        out = self.kernels[0].gram(X, Y, match_diagonal)
        for k in self.kernels[1:]:
            out = out + k.gram(X, Y, match_diagonal)
        return out

    def diag(self, X: Array, match_diagonal: bool = False) -> Array:
        return sum(k.diag(X, match_diagonal) for k in self.kernels)

    def gradient(self, X: Array) -> Array:
        return np.concatenate([k.gradient(X) for k in self.kernels])

    def __repr__(self) -> str:
        return " + ".join(repr(k) for k in self.kernels)


class ProductAcrossSlices(Kernel):
    """
    Product of kernels that each read their own, disjoint, input columns.

    On a full Cartesian grid the Gram is the Kronecker product of the factor
    Grams.
    """

    name = "product"

    def __init__(self, factors: Sequence[Tuple[Kernel, SliceLike]]) -> None:
        factors = tuple(factors)
        if not factors:
            raise InvalidArgument("cannot multiply an empty list of kernels")
        normalized = []
        seen: set = set()
        for kernel, columns in factors:
            cols = normalize_slice(columns)
            if cols is None:
                raise InvalidArgument("each product factor needs an explicit slice")
            overlap = seen.intersection(cols)
            if overlap:
                raise InvalidArgument(
                    f"product factor slices overlap on columns {sorted(overlap)}"
                )
            seen.update(cols)
            normalized.append((kernel, cols))
        self.factors: Tuple[Tuple[Kernel, Tuple[int, ...]], ...] = tuple(normalized)

    def _sizes(self) -> List[int]:
        return [k.n_params for k, _ in self.factors]

    @staticmethod
    def _select(X: Array, cols: Tuple[int, ...]) -> Array:
        if max(cols) >= X.shape[1]:
            raise InvalidArgument(
                f"product factor reads columns {cols} but inputs have {X.shape[1]}"
            )
        return X[:, list(cols)]

    @property
    def theta(self) -> Array:
        return np.concatenate([k.theta for k, _ in self.factors])

    @property
    def param_names(self) -> Tuple[str, ...]:
        return tuple(
            f"f{i}.{n}" for i, (k, _) in enumerate(self.factors) for n in k.param_names
        )

    def with_theta(self, theta: ArrayLike) -> "ProductAcrossSlices":
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.n_params:
            raise InvalidArgument(
                f"product takes {self.n_params} parameter(s), got {theta.size}"
            )
        parts = np.split(theta, np.cumsum(self._sizes())[:-1])
        return ProductAcrossSlices(
            [(k.with_theta(p), c) for (k, c), p in zip(self.factors, parts)]
        )

    def canonical(self) -> "ProductAcrossSlices":
        return ProductAcrossSlices([(k.canonical(), c) for k, c in self.factors])

    def _factor_grams(self, X: Array, Y: Array, match_diagonal: bool) -> List[Array]:
        return [
            k.gram(self._select(X, c), self._select(Y, c), match_diagonal)
            for k, c in self.factors
        ]

    def gram(self, X: Array, Y: Array, match_diagonal: bool) -> Array:
        grams = self._factor_grams(X, Y, match_diagonal)
        out = grams[0]
        for g in grams[1:]:
            out = out * g
        return out

    def diag(self, X: Array, match_diagonal: bool = False) -> Array:
        out = np.ones(X.shape[0])
        for k, c in self.factors:
            out = out * k.diag(self._select(X, c), match_diagonal)
        return out

    def gradient(self, X: Array) -> Array:
        grams = self._factor_grams(X, X, True)
        blocks = []
        for i, (k, c) in enumerate(self.factors):
            others = np.ones((X.shape[0], X.shape[0]))
            for j, g in enumerate(grams):
                if j != i:
                    others = others * g
            blocks.append(k.gradient(self._select(X, c)) * others)
        return np.concatenate(blocks)

    def __repr__(self) -> str:
        return " * ".join(f"{k!r}[{list(c)}]" for k, c in self.factors)


def combine_sum(kernels: Sequence[Kernel]) -> Sum:
    """
    Sum of ``kernels``. Nested sums are flattened, so ``a + b + c`` names
    its terms ``k0``, ``k1`` and ``k2``.
    """
    flat: List[Kernel] = []
    for k in kernels:
        flat.extend(k.kernels if isinstance(k, Sum) else (k,))
    return Sum(flat)


def combine_product(factors: Sequence[Tuple[Kernel, SliceLike]]) -> ProductAcrossSlices:
    return ProductAcrossSlices(factors)


def se_with_noise(params: SeParams, active_dims: SliceLike = None) -> Sum:
    """
    Squared exponential with observation noise as a separate white-noise term.
    """
    return Sum(
        [
            SquaredExponential(
                params.signal_variance, params.length_scales, active_dims
            ),
            WhiteNoise(params.noise_variance),
        ]
    )


def gram(
    kernel: Kernel, X_rows: ArrayLike, X_cols: ArrayLike, match_diagonal: bool
) -> Array:
    """
    Pairwise kernel evaluations. With ``match_diagonal`` the rows and columns
    are the same observations, so element (i, i) carries the noise term.
    """
    A = as_inputs(X_rows, "X_rows")
    B = as_inputs(X_cols, "X_cols")
    if A.shape[1] != B.shape[1]:
        raise InvalidArgument(
            f"row inputs have {A.shape[1]} columns, column inputs have {B.shape[1]}"
        )
    if match_diagonal and A.shape[0] != B.shape[0]:
        raise InvalidArgument("a matched-diagonal Gram needs as many rows as columns")
    return kernel.gram(A, B, match_diagonal)


def kernel_param_gradient(kernel: Kernel, X: ArrayLike) -> List[Array]:
    """
    ∂Gram(X, X)/∂theta, one matrix per free log-parameter, in
    ``kernel.param_names`` order.
    """
    return list(kernel.gradient(as_inputs(X)))


def named_params(kernel: Kernel) -> dict:
    """Free hyperparameters in natural units, keyed by name."""
    return {n: float(v) for n, v in zip(kernel.param_names, np.exp(kernel.theta))}


def prior_influence(kernel: Kernel, x0: ArrayLike, X: ArrayLike) -> Array:
    """
    How strongly a single point at ``x0`` informs predictions at ``X`` under
    the prior: k(x0, x) / k(x0, x0), noise excluded.
    """
    X = as_inputs(X)
    x0 = as_inputs(np.atleast_1d(x0)[None, :] if np.ndim(x0) <= 1 else x0, "x0")
    if x0.shape[0] != 1 or x0.shape[1] != X.shape[1]:
        raise InvalidArgument("x0 must be a single point with the inputs' dimension")
    k00 = kernel.diag(x0)[0]
    if k00 <= 0:
        raise InvalidArgument("prior variance at x0 is not positive")
    return kernel.gram(x0, X, False)[0] / k00
