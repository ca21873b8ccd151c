import msgpack
import numpy as np
import pytest

from greybox_gp import (
    LinearMean,
    Mdof,
    Sdof,
    SdofParams,
    SeParams,
    SquaredExponential,
    TrainingSet,
    WhiteNoise,
    combine_product,
    dumps_model,
    fit,
    loads_model,
    wrap_as_kernel,
)
from greybox_gp._serializer import Serializer, encode_kernel


def assert_same_model(model, again, X_star):
    assert again.kernel.param_names == model.kernel.param_names
    assert again.kernel.theta == pytest.approx(model.kernel.theta, rel=1e-14)
    assert np.array_equal(again.X, model.X)
    assert np.array_equal(again.y, model.y)
    a = model.predict(X_star)
    b = again.predict(X_star)
    assert np.allclose(a.mean, b.mean, rtol=1e-10, atol=1e-12)
    assert np.allclose(a.variance, b.variance, rtol=1e-10, atol=1e-12)


class TestSerializer(object):
    def setup_method(self):
        self.serializer = Serializer()
        self.model_data = {
            "kernel": {
                "type": "sum",
                "kernels": [
                    {
                        "type": "se",
                        "signal_variance": 1.0,
                        "length_scales": [0.5],
                        "active_dims": None,
                        "fixed": False,
                    },
                    {"type": "noise", "noise_variance": 0.01, "fixed": False},
                ],
            },
            "mean": {"type": "zero"},
            "X": {"dtype": "<f8", "shape": [3, 1], "data": np.arange(3.0).tobytes()},
            "y": {"dtype": "<f8", "shape": [3], "data": np.ones(3).tobytes()},
        }

    def test_read_version_v0(self):
        model = self.serializer._loads_v0(msgpack.dumps(self.model_data))
        assert model.kernel.param_names == (
            "k0.signal_variance",
            "k0.length_scale",
            "k1.noise_variance",
        )
        assert model.X[:, 0] == pytest.approx([0.0, 1.0, 2.0])
        assert model.y == pytest.approx(np.ones(3))

    def test_dumps(self, smooth_data, se_noise_kernel):
        data = self.serializer.dumps(fit(se_noise_kernel, None, smooth_data))
        assert data.startswith(b"gp=0,")

    @pytest.mark.parametrize(
        "data", [b"", b"gp=0", b"nope,abc", b"gp=7,abc", b"gp=0,\xc1"]
    )
    def test_unreadable_data_is_a_miss(self, data):
        assert self.serializer.loads(data) is None

    @pytest.mark.parametrize(
        "change",
        [
            lambda d: 5,
            lambda d: {**d, "kernel": {}},
            lambda d: {k: v for k, v in d.items() if k != "mean"},
            lambda d: {**d, "X": {**d["X"], "shape": [4, 1]}},
        ],
        ids=["not-a-map", "untyped-kernel", "no-mean", "bad-shape"],
    )
    def test_malformed_payload_is_a_miss(self, change):
        payload = msgpack.dumps(change(self.model_data))
        assert self.serializer.loads(b"gp=0," + payload) is None

    def test_unknown_kernel(self):
        with pytest.raises(TypeError):
            encode_kernel(object())


class TestModelRoundTrip(object):
    def test_se_with_linear_mean(self, smooth_data, se_noise_kernel):
        model = fit(se_noise_kernel, LinearMean([0.2], -0.5), smooth_data)
        again = loads_model(dumps_model(model))
        assert again.mean.weights[0] == 0.2
        assert again.mean.intercept == -0.5
        assert_same_model(model, again, np.linspace(-1, 11, 7)[:, None])

    def test_fixed_names_survive(self, smooth_data):
        kernel = SquaredExponential(1.0, 1.5, fixed=("signal_variance",))
        kernel = kernel + WhiteNoise(0.01, fixed=True)
        again = loads_model(dumps_model(fit(kernel, None, smooth_data)))
        assert again.kernel.kernels[0].fixed == ("signal_variance",)
        assert again.kernel.kernels[1].fixed is True

    def test_sdof_and_mdof(self, smooth_data):
        kernel = (
            Sdof(3.0, 0.1, 2.0)
            + Mdof([SdofParams(1.0, 0.05, 0.5), SdofParams(4.0, 0.2, 1.0)])
            + WhiteNoise(0.05)
        )
        model = fit(kernel, None, smooth_data)
        assert_same_model(model, loads_model(dumps_model(model)), smooth_data.X[:5])

    def test_product(self, rng):
        kernel = combine_product(
            [(Sdof(4.0, 0.1, 2.0), 0), (SquaredExponential(1.0, 0.5), 1)]
        ) + WhiteNoise(0.01)
        X = rng.uniform(0, 2, (15, 2))
        model = fit(kernel, None, TrainingSet(X, rng.standard_normal(15)))
        assert_same_model(model, loads_model(dumps_model(model)), X[:4] + 0.1)

    def test_boundary_constrained(self, holed_basis, rng):
        points = holed_basis.domain.interior_points()
        train = points[rng.choice(len(points), 30, replace=False)]
        kernel = wrap_as_kernel(holed_basis, SeParams(1.0, (0.15,), 0.01))
        model = fit(kernel, None, TrainingSet(train, rng.standard_normal(30)))
        again = loads_model(dumps_model(model))
        basis = again.kernel.kernels[0].basis
        assert np.array_equal(basis.domain.mask, holed_basis.domain.mask)
        assert np.array_equal(basis.eigenfunctions, holed_basis.eigenfunctions)
        assert_same_model(model, again, points[:6])
