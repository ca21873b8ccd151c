from typing import Callable, Dict, Optional

import msgpack
import numpy as np
from multimethod import multimethod

from ._boundary import BoundaryConstrained, GridDomain, ReducedRankBasis
from ._engine import FittedGp, fit
from ._kernels import (
    Kernel,
    Mdof,
    ProductAcrossSlices,
    Sdof,
    SquaredExponential,
    Sum,
    WhiteNoise,
)
from ._means import LinearMean, MeanFunction, ZeroMean
from ._models import TrainingSet
from ._params import SdofParams


def _pack_array(arr) -> dict:
    arr = np.ascontiguousarray(arr)
    return {"dtype": arr.dtype.str, "shape": list(arr.shape), "data": arr.tobytes()}


def _unpack_array(data: dict):
    arr = np.frombuffer(data["data"], dtype=np.dtype(data["dtype"]))
    return arr.reshape(data["shape"]).copy()


def _dims(active_dims):
    return None if active_dims is None else list(active_dims)


@multimethod
def encode_kernel(kernel) -> dict:
    raise TypeError(f"Cannot serialize kernel of type {type(kernel).__name__}")


@encode_kernel.register
def _(kernel: SquaredExponential) -> dict:
    return {
        "type": "se",
        "signal_variance": kernel.signal_variance,
        "length_scales": list(kernel.length_scales),
        "active_dims": _dims(kernel.active_dims),
        "fixed": kernel.fixed,
    }


@encode_kernel.register
def _(kernel: WhiteNoise) -> dict:
    return {"type": "noise", "noise_variance": kernel.noise_variance, "fixed": kernel.fixed}


@encode_kernel.register
def _(kernel: Sdof) -> dict:
    p = kernel.params
    return {
        "type": "sdof",
        "mode": [p.natural_frequency, p.damping_ratio, p.amplitude],
        "active_dims": _dims(kernel.active_dims),
        "fixed": kernel.fixed,
    }


@encode_kernel.register
def _(kernel: Mdof) -> dict:
    return {
        "type": "mdof",
        "modes": [
            [m.natural_frequency, m.damping_ratio, m.amplitude] for m in kernel.modes
        ],
        "active_dims": _dims(kernel.active_dims),
        "fixed": kernel.fixed,
    }


@encode_kernel.register
def _(kernel: Sum) -> dict:
    return {"type": "sum", "kernels": [encode_kernel(k) for k in kernel.kernels]}


@encode_kernel.register
def _(kernel: ProductAcrossSlices) -> dict:
    return {
        "type": "product",
        "factors": [[encode_kernel(k), list(c)] for k, c in kernel.factors],
    }


@encode_kernel.register
def _(kernel: BoundaryConstrained) -> dict:
    basis = kernel.basis
    return {
        "type": "constrained",
        "signal_variance": kernel.signal_variance,
        "length_scale": kernel.length_scale,
        "active_dims": _dims(kernel.active_dims),
        "fixed": kernel.fixed,
        "basis": {
            "spacing": basis.domain.spacing,
            "mask": _pack_array(basis.domain.mask.astype(np.uint8)),
            "eigenvalues": _pack_array(basis.eigenvalues),
            "eigenfunctions": _pack_array(basis.eigenfunctions),
        },
    }


def _decode_basis(data: dict) -> ReducedRankBasis:
    domain = GridDomain.from_mask(
        _unpack_array(data["mask"]).astype(bool), data["spacing"]
    )
    return ReducedRankBasis(
        domain,
        _unpack_array(data["eigenvalues"]),
        _unpack_array(data["eigenfunctions"]),
    )


_DECODERS: Dict[str, Callable[[dict], Kernel]] = {
    "se": lambda d: SquaredExponential(
        d["signal_variance"], d["length_scales"], d["active_dims"], d["fixed"]
    ),
    "noise": lambda d: WhiteNoise(d["noise_variance"], d["fixed"]),
    "sdof": lambda d: Sdof(*d["mode"], active_dims=d["active_dims"], fixed=d["fixed"]),
    "mdof": lambda d: Mdof(
        [SdofParams(*m) for m in d["modes"]], d["active_dims"], d["fixed"]
    ),
    "sum": lambda d: Sum([decode_kernel(k) for k in d["kernels"]]),
    "product": lambda d: ProductAcrossSlices(
        [(decode_kernel(k), c) for k, c in d["factors"]]
    ),
    "constrained": lambda d: BoundaryConstrained(
        _decode_basis(d["basis"]),
        d["signal_variance"],
        d["length_scale"],
        d["active_dims"],
        d["fixed"],
    ),
}


def decode_kernel(data: dict) -> Kernel:
    try:
        decoder = _DECODERS[data["type"]]
    except KeyError:
        raise TypeError(f"Unknown kernel type {data.get('type')!r}") from None
    return decoder(data)


def encode_mean(mean: MeanFunction) -> dict:
    if isinstance(mean, LinearMean):
        return {
            "type": "linear",
            "weights": list(mean.weights),
            "intercept": mean.intercept,
            "covariate_slice": _dims(mean.covariate_slice),
        }
    if isinstance(mean, ZeroMean):
        return {"type": "zero"}
    raise TypeError(f"Cannot serialize mean of type {type(mean).__name__}")


def decode_mean(data: dict) -> MeanFunction:
    if data["type"] == "linear":
        return LinearMean(data["weights"], data["intercept"], data["covariate_slice"])
    if data["type"] == "zero":
        return ZeroMean()
    raise TypeError(f"Unknown mean type {data['type']!r}")


class Serializer(object):
    """
    Versioned msgpack encoding of a fitted model.

    Only the kernel, the mean and the training data are stored; loading
    refits, so the factorization never goes stale against the code that
    uses it.
    """

    def dumps(self, model: FittedGp) -> bytes:
        data = {
            "kernel": encode_kernel(model.kernel),
            "mean": encode_mean(model.mean),
            "X": _pack_array(model.X),
            "y": _pack_array(model.y),
        }

        return b",".join([b"gp=0", msgpack.dumps(data, use_bin_type=True)])

    def loads(self, data: bytes) -> Optional[FittedGp]:
        # Short circuit if we've been given an empty set of data
        if not data:
            return None

        try:
            ver, data = data.split(b",", 1)
        except ValueError:
            return None

        if ver[:3] != b"gp=":
            return None

        version = ver.split(b"=", 1)[-1].decode("ascii", "replace")

        try:
            loader = getattr(self, "_loads_v{}".format(version))
        except AttributeError:
            # A version we can't read is treated like a miss.
            return None
        return loader(data)

    def _loads_v0(self, data: bytes) -> Optional[FittedGp]:
        try:
            stored = msgpack.loads(data, raw=False)
            kernel = decode_kernel(stored["kernel"])
            mean = decode_mean(stored["mean"])
            X, y = _unpack_array(stored["X"]), _unpack_array(stored["y"])
            training = TrainingSet(X, y)
        except (ValueError, KeyError, TypeError):
            # Malformed payloads are a miss, like unknown versions.
            return None

        return fit(kernel, mean, training)


def dumps_model(model: FittedGp) -> bytes:
    return Serializer().dumps(model)


def loads_model(data: bytes) -> Optional[FittedGp]:
    return Serializer().loads(data)
