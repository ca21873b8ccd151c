"""
Regression over a plate with holes, trained on a central strip only.

The target field is built from the plate's own Dirichlet eigenbasis, so it
vanishes on the outer edge and around every hole. The constrained model
knows those boundaries; the 2D SE baseline does not, and drifts back to
its prior away from the strip.

Training nodes form a regular grid inside the strip, coarsened once per
configured density. Off the strip the held-out cells score how far each
model carries the field; the unsampled strip cells show how each copes
with a sparser grid.
"""
import math
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .._boundary import (
    GridDomain,
    ReducedRankBasis,
    build_basis,
    synth_plate_field,
    wrap_as_kernel,
)
from .._config import ExperimentConfig, PlateBoundaryParams
from .._exceptions import InvalidArgument
from .._io import read_mask, write_columns, write_mask
from .._kernels import SquaredExponential, WhiteNoise
from .._metrics import MetricsReport
from .._models import TrainingSet
from .._params import SeParams
from .._types import Array
from .._utils import derive_seeds
from ._common import evaluate, fit_model, predict_chunked, stage

COLUMNS = ["x", "y"]


def plate_domain(p: PlateBoundaryParams, mask_path=None) -> GridDomain:
    if mask_path is not None:
        return GridDomain.from_mask(read_mask(mask_path), p.spacing)
    return GridDomain.with_holes(
        p.nx, p.ny, p.spacing, rectangles=p.rectangles, circles=p.circles
    )


def simulate(
    p: PlateBoundaryParams, seed: int, mask_path=None
) -> Tuple[ReducedRankBasis, Array, TrainingSet]:
    """
    The model basis, the clean field over the grid and noisy observations
    at every interior node.

    The field may use more modes than the model; its mean square over the
    interior is ``signal_variance``.
    """
    field_seed, noise_seed = derive_seeds(seed, 2)
    basis = build_basis(plate_domain(p, mask_path), max(p.true_modes, p.model_modes))
    params = SeParams(p.signal_variance, (p.length_scale,))
    field = synth_plate_field(
        basis, params, int(field_seed.generate_state(1)[0]), n_modes=p.true_modes
    )
    inside = basis.domain.mask
    field = field * math.sqrt(p.signal_variance / np.mean(field[inside] ** 2))
    points = basis.domain.interior_points()
    clean = field[inside]
    rng = np.random.default_rng(noise_seed)
    noisy = clean + p.noise_std * rng.standard_normal(clean.size)
    meta = {"columns": COLUMNS, "seed": seed, "noise_std": p.noise_std}
    return basis.truncated(p.model_modes), field, TrainingSet(points, noisy, meta)


def generate(p: PlateBoundaryParams, seed: int, mask_path=None) -> TrainingSet:
    return simulate(p, seed, mask_path)[2]


def strip_mask(points: Array, domain: GridDomain, strip: Tuple[float, float]) -> Array:
    """Interior points whose first coordinate lies in the ``strip`` fraction."""
    extent = (domain.nx - 1) * domain.spacing
    lo, hi = strip
    if not 0 <= lo < hi <= 1:
        raise InvalidArgument(f"strip must satisfy 0 <= lo < hi <= 1, got {strip}")
    return (points[:, 0] >= lo * extent) & (points[:, 0] <= hi * extent)


def grid_stride(density: float) -> int:
    """Node stride of a regular grid holding about ``density`` of the nodes."""
    if not 0 < density <= 1:
        raise InvalidArgument(f"training densities must lie in (0, 1], got {density}")
    return max(1, int(round(1.0 / math.sqrt(density))))


def grid_mask(domain: GridDomain, stride: int) -> Array:
    """Interior nodes whose grid indices are both multiples of ``stride``."""
    i, j = np.nonzero(domain.mask)
    return (i % stride == 0) & (j % stride == 0)


def _ratio(numerator: float, denominator: float) -> Optional[float]:
    return numerator / denominator if denominator > 0 else None


def run(config: ExperimentConfig, out: Path) -> MetricsReport:
    p: PlateBoundaryParams = config.params
    strides = [grid_stride(d) for d in p.densities]
    with stage("generate"):
        basis, field, data = simulate(p, config.seed, config.resolve(p.mask_file))
        in_strip = strip_mask(data.X, basis.domain, p.strip)
        held_out = np.nonzero(~in_strip)[0]
        clean = field[basis.domain.mask]
        test = TrainingSet(data.X[held_out], clean[held_out])

    include_noise = config.include_noise_variance
    metrics = []
    comparisons: dict = {"n_test": len(test), "n_strip": int(in_strip.sum())}
    for density, stride in zip(p.densities, strides):
        on_grid = in_strip & grid_mask(basis.domain, stride)
        gaps = np.nonzero(in_strip & ~on_grid)[0]
        n_train = int(on_grid.sum())
        if n_train < 3:
            raise InvalidArgument(
                f"density {density:g} leaves {n_train} training nodes in the strip"
            )
        train = data.subset(np.nonzero(on_grid)[0])
        var_y = float(np.var(train.y))
        noise = max(p.noise_std**2, 1e-4 * var_y)
        tag = f"d{density:g}"

        constrained = wrap_as_kernel(basis, SeParams(var_y, (p.length_scale,), noise))
        se = SquaredExponential(var_y, (p.length_scale, p.length_scale)) + WhiteNoise(noise)
        errors, gap_errors = {}, {}
        for name, role, kernel in (
            (f"se-{tag}", "baseline", se),
            (f"constrained-{tag}", "physics", constrained),
        ):
            model, result = fit_model(name, kernel, None, train, config.optimization_spec())
            scores, prediction = evaluate(
                name, role, model, result, test, out, include_noise, COLUMNS
            )
            scores.breakdown["density"] = density
            scores.breakdown["n_train"] = n_train
            errors[role] = (prediction.mean - test.y) ** 2
            if gaps.size:
                with stage(f"predict:{name}"):
                    filled = predict_chunked(model, data.X[gaps], 4000, include_noise)
                gap_errors[role] = float(np.mean((filled.mean - clean[gaps]) ** 2))
            metrics.append(scores)

        mse_se = float(np.mean(errors["baseline"]))
        mse_constrained = float(np.mean(errors["physics"]))
        summary = {
            "stride": stride,
            "n_train": n_train,
            "fraction_constrained_not_worse": float(
                np.mean(errors["physics"] <= errors["baseline"])
            ),
            "mse_se": mse_se,
            "mse_constrained": mse_constrained,
            "mse_ratio": _ratio(mse_se, mse_constrained),
            "mse_ratio_in_strip": None,
        }
        if gap_errors:
            summary["mse_ratio_in_strip"] = _ratio(
                gap_errors["baseline"], gap_errors["physics"]
            )
        comparisons[tag] = summary

    with stage("write"):
        write_mask(out / "mask.txt", basis.domain.mask)
        points = basis.domain.interior_points()
        write_columns(out / "field.csv", x=points[:, 0], y=points[:, 1], value=clean)
    return MetricsReport(config.experiment, config.seed, metrics, comparisons=comparisons)
