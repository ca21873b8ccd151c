import math

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from greybox_gp import (
    InvalidArgument,
    Mdof,
    ModalSet,
    ProductAcrossSlices,
    Sdof,
    SdofParams,
    SeParams,
    SquaredExponential,
    Sum,
    WhiteNoise,
    combine_product,
    combine_sum,
    eval_mdof,
    eval_sdof,
    eval_se,
    gram,
    kernel_param_gradient,
    prior_influence,
    se_with_noise,
)
from greybox_gp._oracles import stack_field

from .conftest import min_eigenvalue

coordinates = st.lists(
    st.floats(-5.0, 5.0, allow_nan=False, allow_infinity=False),
    min_size=2,
    max_size=25,
)


def kernels():
    modes = [SdofParams(2.0, 0.1, 0.8), SdofParams(5.0, 0.05, 3.0)]
    return [
        SquaredExponential(1.3, 0.7),
        Sdof(2.0, 0.1, 0.8),
        Mdof(modes),
        Sdof(2.0, 0.1, 0.8) + SquaredExponential(0.5, 1.2) + WhiteNoise(0.01),
    ]


def fd_gram_gradient(kernel, X, step=1e-6):
    theta = kernel.theta
    out = []
    for j in range(theta.size):
        up = theta.copy()
        down = theta.copy()
        up[j] += step
        down[j] -= step
        out.append(
            (kernel.with_theta(up)(X) - kernel.with_theta(down)(X)) / (2 * step)
        )
    return np.stack(out)


def assert_gradient_matches(kernel, X):
    analytic = np.stack(kernel_param_gradient(kernel, X))
    numeric = fd_gram_gradient(kernel, X)
    assert analytic.shape == numeric.shape == (kernel.n_params, len(X), len(X))
    for a, n in zip(analytic, numeric):
        scale = max(np.abs(n).max(), 1e-12)
        assert np.abs(a - n).max() / scale < 1e-5


class TestEvalSe(object):
    def test_same_index_adds_noise(self):
        assert eval_se([0.0], [0.0], True, SeParams(1.0, (1.0,), 0.1)) == pytest.approx(
            1.1
        )

    def test_unit_distance(self):
        value = eval_se([0.0], [1.0], False, SeParams(2.0, (1.0,)))
        assert value == pytest.approx(1.21306, abs=1e-5)
        assert value == pytest.approx(2 * math.exp(-0.5), rel=1e-14)

    def test_far_apart_decays_to_zero(self):
        params = SeParams(1.0, (1.0,), 0.5)
        assert eval_se([0.0], [100.0], False, params) == 0.0

    def test_per_dimension_length_scales(self):
        params = SeParams(1.0, (1.0, 2.0))
        expected = math.exp(-0.5 * (1.0 + 1.0))
        assert eval_se([0.0, 0.0], [1.0, 2.0], False, params) == pytest.approx(expected)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgument):
            eval_se([0.0, 1.0], [0.0], False, SeParams(1.0, (1.0,)))

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"signal_variance": 0.0, "length_scales": (1.0,)},
            {"signal_variance": 1.0, "length_scales": (-1.0,)},
            {"signal_variance": 1.0, "length_scales": (1.0,), "noise_variance": -1.0},
        ],
    )
    def test_invalid_params(self, kwargs):
        with pytest.raises(InvalidArgument):
            SeParams(**kwargs)


class TestEvalSdof(object):
    def setup_method(self):
        self.params = SdofParams(2 * math.pi, 0.1, 0.25)

    def test_zero_lag_is_stationary_variance(self):
        expected = 0.25 / (0.1 * (2 * math.pi) ** 3)
        assert eval_sdof(0.0, self.params) == pytest.approx(expected, rel=1e-14)
        assert self.params.variance == pytest.approx(expected, rel=1e-14)

    def test_direct_substitution(self):
        omega, zeta, a, tau = 2 * math.pi, 0.1, 0.25, 0.5
        omega_d = omega * math.sqrt(1 - zeta**2)
        expected = (
            a
            / (zeta * omega**3)
            * math.exp(-zeta * omega * tau)
            * (
                math.cos(omega_d * tau)
                + zeta * omega / omega_d * math.sin(omega_d * tau)
            )
        )
        assert eval_sdof(tau, self.params) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("tau", [0.0, 0.13, 0.5, 1.7])
    def test_matches_fourier_transform_of_spectrum(self, tau):
        omega, zeta, a = 2 * math.pi, 0.1, 0.25

        def spectrum(w):
            return 1.0 / ((omega**2 - w**2) ** 2 + (2 * zeta * omega * w) ** 2)

        if tau == 0.0:
            integral, _ = scipy.integrate.quad(
                spectrum, 0, np.inf, epsabs=1e-13, limit=200
            )
        else:
            integral, _ = scipy.integrate.quad(
                spectrum, 0, np.inf, weight="cos", wvar=tau, epsabs=1e-13, limlst=100
            )
        expected = 4 * a / math.pi * integral
        assert eval_sdof(tau, self.params) == pytest.approx(expected, rel=1e-6)

    @given(st.floats(-50, 50, allow_nan=False))
    def test_even_in_lag(self, tau):
        assert eval_sdof(tau, self.params) == eval_sdof(-tau, self.params)

    def test_vectorized(self):
        tau = np.linspace(-2, 2, 9)
        values = eval_sdof(tau, self.params)
        assert values.shape == (9,)
        assert values[4] == eval_sdof(0.0, self.params)

    def test_non_finite_lag(self):
        with pytest.raises(InvalidArgument):
            eval_sdof(float("nan"), self.params)

    @pytest.mark.parametrize("zeta", [0.0, 5e-5, 1.0, 1.5])
    def test_damping_ratio_outside_bounds(self, zeta):
        with pytest.raises(InvalidArgument):
            SdofParams(1.0, zeta, 1.0)

    def test_from_physical(self):
        params = SdofParams.from_physical(2.0, 0.4, 8.0, 4.0)
        assert params.natural_frequency == pytest.approx(2.0)
        assert params.damping_ratio == pytest.approx(0.4 / (2 * 4.0))
        assert params.amplitude == pytest.approx(4.0 / 16.0)


class TestEvalMdof(object):
    def test_single_mode_is_sdof(self):
        mode = SdofParams(3.0, 0.05, 1.0)
        for tau in (0.0, 0.3, -1.1):
            assert eval_mdof(tau, [mode]) == eval_sdof(tau, mode)

    def test_identical_modes_double(self):
        mode = SdofParams(3.0, 0.05, 1.0)
        assert eval_mdof(0.7, [mode, mode]) == pytest.approx(2 * eval_sdof(0.7, mode))

    def test_zero_lag_sums_variances(self):
        a = SdofParams(2.0, 0.1, 0.5)
        b = SdofParams(6.0, 0.02, 2.0)
        expected = 0.5 / (0.1 * 8.0) + 2.0 / (0.02 * 216.0)
        assert eval_mdof(0.0, ModalSet((a, b))) == pytest.approx(expected)

    def test_empty(self):
        with pytest.raises(InvalidArgument):
            eval_mdof(0.0, [])
        with pytest.raises(InvalidArgument):
            ModalSet(())

    def test_modal_set_must_be_increasing(self):
        with pytest.raises(InvalidArgument):
            ModalSet((SdofParams(5.0, 0.1, 1.0), SdofParams(2.0, 0.1, 1.0)))

    def test_canonical_sorts_modes(self):
        kernel = Mdof([SdofParams(2.0, 0.1, 1.0), SdofParams(5.0, 0.1, 1.0)])
        swapped = kernel.with_theta(
            np.log([6.0, 0.1, 1.0, 3.0, 0.2, 1.0])
        ).canonical()
        assert [m.natural_frequency for m in swapped.modes] == pytest.approx([3.0, 6.0])
        assert swapped.modes[0].damping_ratio == pytest.approx(0.2)


class TestGram(object):
    def test_single_point(self):
        kernel = se_with_noise(SeParams(2.0, (1.0,), 0.5))
        assert gram(kernel, [[0.3]], [[0.3]], True) == pytest.approx(np.array([[2.5]]))
        assert gram(kernel, [[0.3]], [[0.3]], False) == pytest.approx(np.array([[2.0]]))

    def test_cross_gram_has_no_noise(self, rng):
        kernel = SquaredExponential(1.0, 1.0) + WhiteNoise(0.3)
        X = rng.uniform(0, 1, (5, 1))
        assert np.allclose(gram(kernel, X, X, False), SquaredExponential(1.0, 1.0)(X))

    @pytest.mark.parametrize("index", range(4))
    def test_spot_values_match_scalar_evaluation(self, rng, index):
        params = SeParams(1.7, (0.4, 2.0), 0.2)
        X = rng.uniform(-1, 1, (12, 2))
        K = gram(se_with_noise(params), X, X, True)
        for i, j in rng.integers(0, 12, (10, 2)):
            expected = eval_se(X[i], X[j], i == j, params)
            assert K[i, j] == pytest.approx(expected, rel=1e-12)

    def test_sdof_gram_matches_scalar(self, rng):
        params = SdofParams(3.0, 0.07, 0.4)
        t = rng.uniform(0, 5, 10)
        K = gram(Sdof.from_params(params), t[:, None], t[:, None], True)
        for i, j in rng.integers(0, 10, (10, 2)):
            assert K[i, j] == pytest.approx(eval_sdof(t[i] - t[j], params), rel=1e-13)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgument):
            gram(SquaredExponential(1.0, 1.0), np.zeros((2, 1)), np.zeros((2, 2)), False)
        with pytest.raises(InvalidArgument):
            gram(SquaredExponential(1.0, 1.0), np.zeros((2, 2)), np.zeros((2, 2)), False)

    @pytest.mark.parametrize("kernel", kernels(), ids=lambda k: type(k).__name__)
    @settings(deadline=None, max_examples=30)
    @given(points=coordinates)
    def test_symmetric(self, kernel, points):
        X = np.asarray(points)[:, None]
        K = kernel(X)
        assert np.abs(K - K.T).max() < 1e-14

    @pytest.mark.parametrize("kernel", kernels(), ids=lambda k: type(k).__name__)
    @settings(deadline=None, max_examples=30)
    @given(points=coordinates)
    def test_positive_semi_definite(self, kernel, points):
        X = np.asarray(points)[:, None]
        K = kernel(X, match_diagonal=False)
        assert min_eigenvalue(K) >= -1e-8 * max(1.0, np.trace(K))

    @pytest.mark.parametrize("kernel", kernels(), ids=lambda k: type(k).__name__)
    def test_psd_on_fifty_points(self, rng, kernel):
        X = rng.uniform(0, 10, (50, 1))
        K = kernel(X)
        assert min_eigenvalue(K) >= -1e-8 * max(1.0, np.trace(K))
        assert np.abs(K - K.T).max() < 1e-14


class TestCombinators(object):
    def test_sum_of_one(self, rng):
        X = rng.uniform(0, 1, (6, 1))
        se = SquaredExponential(1.0, 0.5)
        assert np.array_equal(combine_sum([se])(X), se(X))

    def test_sum_is_elementwise(self, rng):
        X = rng.uniform(0, 3, (5, 1))
        k1 = SquaredExponential(1.0, 0.5)
        k2 = Sdof(2.0, 0.2, 1.0)
        assert np.abs(combine_sum([k1, k2])(X) - (k1(X) + k2(X))).max() < 1e-12
        K = combine_sum([k1, k2])(X)
        assert min_eigenvalue(K) >= -1e-8 * np.trace(K)

    def test_empty(self):
        with pytest.raises(InvalidArgument):
            combine_sum([])
        with pytest.raises(InvalidArgument):
            combine_product([])

    def test_add_operator_builds_sum(self):
        kernel = SquaredExponential(1.0, 1.0) + WhiteNoise(0.1)
        assert isinstance(kernel, Sum)
        assert kernel.param_names == (
            "k0.signal_variance",
            "k0.length_scale",
            "k1.noise_variance",
        )

    def test_chained_add_is_flat(self, rng):
        kernel = Sdof(2.0, 0.1, 1.0) + SquaredExponential(1.0, 1.0) + WhiteNoise(0.1)
        assert len(kernel.kernels) == 3
        assert kernel.param_names[0] == "k0.natural_frequency"
        assert kernel.param_names[-1] == "k2.noise_variance"
        X = rng.uniform(0, 3, (5, 1))
        nested = Sum([Sum([Sdof(2.0, 0.1, 1.0), SquaredExponential(1.0, 1.0)]), WhiteNoise(0.1)])
        assert np.abs(kernel(X) - nested(X)).max() < 1e-12

    def test_product_of_one(self, rng):
        X = rng.uniform(0, 1, (4, 2))
        se = SquaredExponential(1.0, 0.5)
        product = combine_product([(se, 1)])
        assert np.array_equal(product(X), se(X[:, [1]]))

    def test_kronecker_identity(self):
        times = np.array([0.0, 0.3, 0.7])
        x = np.array([0.2, 0.9])
        k_t = Sdof(4.0, 0.1, 2.0)
        k_x = SquaredExponential(0.8, 0.5)
        product = combine_product([(k_t, 0), (k_x, 1)])
        K = product(stack_field(times, x))
        expected = np.kron(k_t(times[:, None]), k_x(x[:, None]))
        assert K.shape == (6, 6)
        assert np.abs(K - expected).max() < 1e-12
        assert min_eigenvalue(K) >= -1e-8 * np.trace(K)

    def test_overlapping_slices(self):
        with pytest.raises(InvalidArgument):
            combine_product(
                [(SquaredExponential(1.0, 1.0), 0), (SquaredExponential(1.0, 1.0), 0)]
            )

    def test_product_needs_explicit_slice(self):
        with pytest.raises(InvalidArgument):
            ProductAcrossSlices([(SquaredExponential(1.0, 1.0), None)])

    def test_product_param_names(self):
        product = combine_product(
            [(Sdof(1.0, 0.1, 1.0), 0), (SquaredExponential(1.0, 1.0), 1)]
        )
        assert product.param_names[0] == "f0.natural_frequency"
        assert product.param_names[-1] == "f1.length_scale"


class TestGradients(object):
    def test_se_signal_variance_gradient_is_gram(self, rng):
        X = rng.uniform(0, 2, (6, 1))
        se = SquaredExponential(1.4, 0.6)
        assert np.allclose(kernel_param_gradient(se, X)[0], se(X))

    def test_noise_gradient(self, rng):
        X = rng.uniform(0, 2, (6, 1))
        grads = kernel_param_gradient(WhiteNoise(0.3), X)
        assert len(grads) == 1
        assert np.allclose(grads[0], 0.3 * np.eye(6))

    @pytest.mark.parametrize(
        "kernel",
        [
            SquaredExponential(1.4, 0.6),
            SquaredExponential(0.9, [0.5, 1.5]),
            WhiteNoise(0.2),
            Sdof(2.0, 0.1, 0.8),
            Sdof(9.0, 0.3, 50.0),
            Mdof([SdofParams(2.0, 0.1, 0.8), SdofParams(5.0, 0.05, 3.0)]),
        ],
        ids=repr,
    )
    def test_leaf_gradients_match_finite_differences(self, rng, kernel):
        X = rng.uniform(0, 3, (6, kernel.n_dims or 1))
        assert_gradient_matches(kernel, X)

    def test_sum_gradient(self, rng):
        kernel = Sdof(2.0, 0.1, 0.8) + SquaredExponential(0.5, 1.2) + WhiteNoise(0.01)
        assert_gradient_matches(kernel, rng.uniform(0, 3, (6, 1)))

    def test_product_gradient(self, rng):
        kernel = combine_product(
            [(Sdof(3.0, 0.1, 2.0), 0), (SquaredExponential(0.8, 0.4), 1)]
        ) + WhiteNoise(0.05)
        assert_gradient_matches(kernel, rng.uniform(0, 2, (6, 2)))

    def test_gradient_order_matches_param_names(self, rng):
        kernel = Sdof(2.0, 0.1, 0.8) + WhiteNoise(0.1)
        X = rng.uniform(0, 2, (5, 1))
        grads = kernel_param_gradient(kernel, X)
        assert len(grads) == len(kernel.param_names) == 4
        assert np.allclose(grads[-1], 0.1 * np.eye(5))


class TestFixedParameters(object):
    def test_fixed_true_removes_all(self):
        se = SquaredExponential(1.0, 1.0, fixed=True)
        assert se.theta.size == 0
        assert se.param_names == ()
        assert se.with_theta([]) is se
        assert kernel_param_gradient(se, np.zeros((3, 1))) == []

    def test_fixed_by_name(self, rng):
        se = SquaredExponential(2.0, [0.5, 1.5], fixed=("signal_variance",))
        assert se.param_names == ("length_scale_0", "length_scale_1")
        moved = se.with_theta(np.log([0.7, 0.9]))
        assert moved.signal_variance == 2.0
        assert moved.length_scales == pytest.approx((0.7, 0.9))
        assert_gradient_matches(se, rng.uniform(0, 2, (5, 2)))

    def test_single_name_as_string(self):
        sdof = Sdof(2.0, 0.1, 1.0, fixed="damping_ratio")
        assert sdof.param_names == ("natural_frequency", "amplitude")

    def test_unknown_name(self):
        with pytest.raises(InvalidArgument):
            SquaredExponential(1.0, 1.0, fixed=("frequency",)).theta

    def test_zero_noise_is_always_fixed(self):
        noise = WhiteNoise(0.0)
        assert noise.n_params == 0
        assert WhiteNoise(0.1).n_params == 1

    def test_wrong_theta_size(self):
        with pytest.raises(InvalidArgument):
            SquaredExponential(1.0, 1.0).with_theta([0.0])

    def test_theta_round_trip(self):
        kernel = Sdof(2.0, 0.1, 0.8) + SquaredExponential(0.5, 1.2)
        again = kernel.with_theta(kernel.theta)
        assert np.allclose(again.theta, kernel.theta)


class TestPriorInfluence(object):
    def test_unit_at_the_point(self):
        t = np.linspace(0, 2, 21)[:, None]
        for kernel in (SquaredExponential(3.0, 0.4), Sdof(2 * math.pi, 0.05, 1.0)):
            influence = prior_influence(kernel, 1.0, t)
            assert influence[10] == pytest.approx(1.0)
            assert np.all(np.abs(influence) <= 1.0 + 1e-12)

    def test_sdof_influence_oscillates(self):
        t = np.linspace(0, 4, 401)[:, None]
        influence = prior_influence(Sdof(2 * math.pi, 0.05, 1.0), 0.0, t)
        se = prior_influence(SquaredExponential(1.0, 0.3), 0.0, t)
        assert influence.min() < -0.5
        assert se.min() >= 0.0

    def test_x0_dimension(self):
        with pytest.raises(InvalidArgument):
            prior_influence(SquaredExponential(1.0, 1.0), [0.0, 1.0], np.zeros((3, 1)))
