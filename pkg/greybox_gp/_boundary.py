"""
Boundary-constrained covariance on a masked 2D grid.

The covariance is expanded in the lowest eigenfunctions of the Dirichlet
Laplacian of the domain, weighted by the spectral density of the
squared-exponential kernel:

    k(x, x') = Σ_i S(√λ_i) φ_i(x) φ_i(x')

Every eigenfunction vanishes on the outer edge and on hole perimeters, so
the covariance (and any posterior mean built from it) does too.
"""
import dataclasses
import logging
import math
from typing import Iterable, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.ndimage
import scipy.sparse
import scipy.sparse.linalg
from scipy.interpolate import RegularGridInterpolator

from ._exceptions import InvalidArgument, NumericError
from ._kernels import Sum, WhiteNoise, _Leaf
from ._params import SeParams
from ._types import Array, ArrayLike, Fixed, SliceLike
from ._utils import as_inputs

logger = logging.getLogger(__name__)

# Below this many unknowns a dense symmetric eigensolve is simpler and exact.
DENSE_EIGEN_LIMIT = 1500


@dataclasses.dataclass(frozen=True, eq=False)
class GridDomain:
    """
    ``mask[i, j]`` is True when node (i·spacing, j·spacing) is inside.
    """

    nx: int
    ny: int
    spacing: float
    mask: Array

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != (self.nx, self.ny):
            raise InvalidArgument(
                f"mask shape {mask.shape} does not match grid ({self.nx}, {self.ny})"
            )
        if not (self.spacing > 0 and math.isfinite(self.spacing)):
            raise InvalidArgument(f"spacing must be > 0, got {self.spacing!r}")
        if not mask.any():
            raise InvalidArgument("the domain has no interior cells")
        _, n_components = scipy.ndimage.label(mask)
        if n_components != 1:
            raise InvalidArgument(
                f"the domain interior must be one 4-connected region, "
                f"found {n_components}"
            )
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "spacing", float(self.spacing))

    @classmethod
    def from_mask(cls, mask: ArrayLike, spacing: float) -> "GridDomain":
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim != 2:
            raise InvalidArgument("a mask must be 2-dimensional")
        return cls(mask.shape[0], mask.shape[1], spacing, mask)

    @classmethod
    def with_holes(
        cls,
        nx: int,
        ny: int,
        spacing: float,
        rectangles: Iterable[Tuple[float, float, float, float]] = (),
        circles: Iterable[Tuple[float, float, float]] = (),
    ) -> "GridDomain":
        """
        Rasterize holes onto a full grid. Rectangles are
        ``(x_min, x_max, y_min, y_max)`` and circles ``(x, y, radius)``, all
        in the grid's length unit.
        """
        xs = np.arange(nx) * spacing
        ys = np.arange(ny) * spacing
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        mask = np.ones((nx, ny), dtype=bool)
        for x0, x1, y0, y1 in rectangles:
            mask &= ~((gx >= x0) & (gx <= x1) & (gy >= y0) & (gy <= y1))
        for cx, cy, r in circles:
            mask &= (gx - cx) ** 2 + (gy - cy) ** 2 > r**2
        return cls(nx, ny, spacing, mask)

    @property
    def n_interior(self) -> int:
        return int(self.mask.sum())

    @property
    def coordinates(self) -> Tuple[Array, Array]:
        return np.arange(self.nx) * self.spacing, np.arange(self.ny) * self.spacing

    def interior_points(self) -> Array:
        """Coordinates of interior nodes, in row-major mask order."""
        i, j = np.nonzero(self.mask)
        return np.column_stack([i * self.spacing, j * self.spacing])

    def contains(self, points: ArrayLike) -> Array:
        """
        A point is inside unless it leaves the zero-padded grid or every
        surrounding node is masked.
        """
        pts = as_inputs(points, "points")
        if pts.shape[1] != 2:
            raise InvalidArgument("points must be 2-dimensional")
        h = self.spacing
        padded = np.pad(self.mask, 1, constant_values=False)
        u = pts[:, 0] / h + 1.0
        v = pts[:, 1] / h + 1.0
        inside = (u >= 0) & (u <= self.nx + 1) & (v >= 0) & (v <= self.ny + 1)
        i0 = np.clip(np.floor(u).astype(int), 0, self.nx)
        j0 = np.clip(np.floor(v).astype(int), 0, self.ny)
        corners = (
            padded[i0, j0]
            | padded[i0 + 1, j0]
            | padded[i0, j0 + 1]
            | padded[i0 + 1, j0 + 1]
        )
        return inside & corners


@dataclasses.dataclass(frozen=True, eq=False)
class ReducedRankBasis:
    domain: GridDomain
    eigenvalues: Array
    eigenfunctions: Array  # (M, nx, ny), zero off the interior

    def __post_init__(self):
        fields = np.pad(self.eigenfunctions, ((0, 0), (1, 1), (1, 1)))
        h = self.domain.spacing
        xs = (np.arange(self.domain.nx + 2) - 1.0) * h
        ys = (np.arange(self.domain.ny + 2) - 1.0) * h
        interpolator = RegularGridInterpolator(
            (xs, ys), np.moveaxis(fields, 0, -1), method="linear"
        )
        object.__setattr__(self, "_interpolator", interpolator)

    @property
    def size(self) -> int:
        return self.eigenvalues.shape[0]

    def evaluate(self, points: ArrayLike) -> Array:
        """Eigenfunction values at ``points`` (N×2), returned as N×M."""
        pts = as_inputs(points, "points")
        inside = self.domain.contains(pts)
        if not np.all(inside):
            bad = pts[~inside][0]
            raise InvalidArgument(f"point {tuple(bad)} lies outside the domain")
        return self._interpolator(pts)  # type: ignore[attr-defined]

    def truncated(self, M: int) -> "ReducedRankBasis":
        """The ``M`` lowest modes of this basis."""
        M = int(M)
        if not 1 <= M <= self.size:
            raise InvalidArgument(f"basis size must lie in [1, {self.size}], got {M}")
        if M == self.size:
            return self
        return ReducedRankBasis(self.domain, self.eigenvalues[:M], self.eigenfunctions[:M])

    def gram(self) -> Array:
        """Basis Gram under the grid inner product h²·Σ f·g."""
        flat = self.eigenfunctions.reshape(self.size, -1)
        return self.domain.spacing**2 * flat @ flat.T


def _dirichlet_laplacian(domain: GridDomain) -> scipy.sparse.csr_matrix:
    index = -np.ones(domain.mask.shape, dtype=int)
    index[domain.mask] = np.arange(domain.n_interior)
    rows, cols, vals = [], [], []
    h2 = domain.spacing**2
    ii, jj = np.nonzero(domain.mask)
    centre = index[ii, jj]
    rows.append(centre)
    cols.append(centre)
    vals.append(np.full(centre.size, 4.0 / h2))
    padded = np.pad(index, 1, constant_values=-1)
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        neighbour = padded[ii + 1 + di, jj + 1 + dj]
        keep = neighbour >= 0
        rows.append(centre[keep])
        cols.append(neighbour[keep])
        vals.append(np.full(keep.sum(), -1.0 / h2))
    n = domain.n_interior
    laplacian = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    return laplacian


def build_basis(domain: GridDomain, M: int) -> ReducedRankBasis:
    """
    The ``M`` smallest eigenpairs of the negative 5-point Laplacian with a zero
    boundary condition on every mask edge, normalized so that
    h²·Σ φ_i φ_j = δ_ij.
    """
    M = int(M)
    n = domain.n_interior
    if M < 1 or M > n:
        raise InvalidArgument(f"basis size must lie in [1, {n}], got {M}")
    laplacian = _dirichlet_laplacian(domain)
    logger.debug("solving for %i eigenpairs of a %i-node Laplacian", M, n)
    if n <= DENSE_EIGEN_LIMIT or M >= n - 1:
        values, vectors = scipy.linalg.eigh(
            laplacian.toarray(), subset_by_index=[0, M - 1]
        )
    else:
        try:
            values, vectors = scipy.sparse.linalg.eigsh(
                laplacian, k=M, sigma=0.0, which="LM", v0=np.ones(n)
            )
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise NumericError(f"eigensolver did not converge: {exc}") from exc
        # Rayleigh-Ritz on an orthonormalized block keeps clustered
        # eigenvectors orthogonal to working precision.
        q, _ = np.linalg.qr(vectors)
        small = q.T @ (laplacian @ q)
        values, rotation = scipy.linalg.eigh(0.5 * (small + small.T))
        vectors = q @ rotation
    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    if np.any(values <= 0):
        raise NumericError("Dirichlet Laplacian produced a non-positive eigenvalue")
    # Deterministic sign: largest-magnitude entry positive.
    peaks = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[peaks, np.arange(M)])
    vectors = vectors * signs / domain.spacing
    fields = np.zeros((M, domain.nx, domain.ny))
    fields[:, domain.mask] = vectors.T
    values.setflags(write=False)
    fields.setflags(write=False)
    return ReducedRankBasis(domain, values, fields)


def se_spectral_density_2d(
    frequency: ArrayLike, signal_variance: float, length_scale: float
) -> Array:
    """Spectral density of the 2D squared exponential at angular frequency."""
    w = np.asarray(frequency, dtype=float)
    return (
        signal_variance
        * 2.0
        * math.pi
        * length_scale**2
        * np.exp(-0.5 * (length_scale * w) ** 2)
    )


def _isotropic_scale(params: SeParams) -> float:
    scales = set(params.length_scales)
    if len(scales) != 1:
        raise InvalidArgument(
            "the boundary-constrained kernel takes a single isotropic length scale"
        )
    return params.length_scales[0]


def eval_constrained(
    basis: ReducedRankBasis, params: SeParams, x: ArrayLike, x_prime: ArrayLike
) -> float:
    scale = _isotropic_scale(params)
    phi = basis.evaluate(np.vstack([np.ravel(x), np.ravel(x_prime)]))
    weights = se_spectral_density_2d(
        np.sqrt(basis.eigenvalues), params.signal_variance, scale
    )
    return float(np.sum(weights * (phi[0] * phi[1])))


class BoundaryConstrained(_Leaf):
    name = "constrained"
    n_dims = 2

    def __init__(
        self,
        basis: ReducedRankBasis,
        signal_variance: float,
        length_scale: float,
        active_dims: SliceLike = None,
        fixed: Fixed = False,
    ) -> None:
        super().__init__(active_dims, fixed)
        self.basis = basis
        self.params = SeParams(signal_variance, (length_scale,))

    @property
    def signal_variance(self) -> float:
        return self.params.signal_variance

    @property
    def length_scale(self) -> float:
        return self.params.length_scales[0]

    def _natural(self) -> Array:
        return np.array([self.signal_variance, self.length_scale])

    def _natural_names(self) -> Tuple[str, ...]:
        return ("signal_variance", "length_scale")

    def _replace(self, natural: Array) -> "BoundaryConstrained":
        return BoundaryConstrained(
            self.basis, natural[0], natural[1], self.active_dims, self.fixed
        )

    def spectral_weights(self) -> Array:
        return se_spectral_density_2d(
            np.sqrt(self.basis.eigenvalues), self.signal_variance, self.length_scale
        )

    def features(self, X: Array) -> Array:
        return self.basis.evaluate(self._columns(X))

    def gram(self, X: Array, Y: Array, match_diagonal: bool) -> Array:
        weights = self.spectral_weights()
        return (self.features(X) * weights) @ self.features(Y).T

    def diag(self, X: Array, match_diagonal: bool = False) -> Array:
        return np.sum(self.features(X) ** 2 * self.spectral_weights(), axis=1)

    def _natural_gradient(self, X: Array) -> Array:
        phi = self.features(X)
        weights = self.spectral_weights()
        d_scale = weights * (2.0 - self.length_scale**2 * self.basis.eigenvalues)
        return np.stack([(phi * weights) @ phi.T, (phi * d_scale) @ phi.T])


def wrap_as_kernel(
    basis: ReducedRankBasis, params: SeParams, active_dims: SliceLike = None
) -> Sum:
    """
    The constrained covariance plus a white-noise term, ready for
    conditioning and hyperparameter search.
    """
    scale = _isotropic_scale(params)
    return Sum(
        [
            BoundaryConstrained(basis, params.signal_variance, scale, active_dims),
            WhiteNoise(params.noise_variance),
        ]
    )


def synth_plate_field(
    basis: ReducedRankBasis,
    params: SeParams,
    seed: int,
    n_modes: Optional[int] = None,
    ground_weight: float = 3.0,
    margin: float = 0.1,
) -> Array:
    """
    Smooth boundary-respecting field, strictly positive on the interior and
    zero off it.

    Coefficients are Gaussian with SE spectral variances. The first mode is
    positive on every interior node; its coefficient is at least
    ``ground_weight`` standard deviations, and is raised further when the
    other modes would otherwise pull a node to zero (by ``margin`` beyond
    the smallest lift that keeps every node positive).
    """
    scale = _isotropic_scale(params)
    m = basis.size if n_modes is None else min(int(n_modes), basis.size)
    rng = np.random.default_rng(seed)
    std = np.sqrt(
        se_spectral_density_2d(
            np.sqrt(basis.eigenvalues[:m]), params.signal_variance, scale
        )
    )
    coef = std * rng.standard_normal(m)
    ground = basis.eigenfunctions[0]
    rest = np.tensordot(coef[1:], basis.eigenfunctions[1:m], axes=1)
    inside = basis.domain.mask
    lift = float(np.max(-rest[inside] / ground[inside]))
    coef[0] = max(
        std[0] * (ground_weight + abs(coef[0] / std[0])), (1.0 + margin) * lift
    )
    return coef[0] * ground + rest
