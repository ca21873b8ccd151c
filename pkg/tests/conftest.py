import math

import numpy as np
import pytest

from greybox_gp import (
    GridDomain,
    SdofSystem,
    SquaredExponential,
    TrainingSet,
    WhiteNoise,
    build_basis,
    simulate_sdof,
)


def finite_difference_gradient(func, theta, step=1e-6):
    """Central differences of a scalar function of a parameter vector."""
    theta = np.asarray(theta, dtype=float)
    out = np.zeros_like(theta)
    for i in range(theta.size):
        up = theta.copy()
        down = theta.copy()
        up[i] += step
        down[i] -= step
        out[i] = (func(up) - func(down)) / (2 * step)
    return out


def min_eigenvalue(K):
    return float(np.linalg.eigvalsh(0.5 * (K + K.T)).min())


def dense_posterior(K_train, K_cross, K_test, y):
    """Posterior mean and covariance by explicit matrix inverse."""
    inverse = np.linalg.inv(K_train)
    mean = K_cross.T @ inverse @ y
    cov = K_test - K_cross.T @ inverse @ K_cross
    return mean, cov


def sdof_training_set(n=500, dt=0.05, seed=3, omega=2 * math.pi, zeta=0.05, noise=0.0):
    system = SdofSystem.from_modal(omega, zeta)
    trajectory = simulate_sdof(system, dt, n, seed)
    y = trajectory.values[:, 0]
    if noise:
        y = y + noise * np.random.default_rng(seed + 1).standard_normal(n)
    return TrainingSet(trajectory.times, y)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


@pytest.fixture()
def smooth_data(rng):
    X = np.sort(rng.uniform(0, 10, 40))[:, None]
    y = np.sin(X[:, 0]) + 0.05 * rng.standard_normal(40)
    return TrainingSet(X, y)


@pytest.fixture()
def se_noise_kernel():
    return SquaredExponential(1.0, 1.5) + WhiteNoise(0.01)


@pytest.fixture(scope="session")
def square_domain():
    return GridDomain.from_mask(np.ones((24, 24), dtype=bool), 1.0 / 25)


@pytest.fixture(scope="session")
def holed_domain():
    return GridDomain.with_holes(
        30,
        30,
        1.0 / 31,
        rectangles=[(0.6, 0.8, 0.15, 0.3)],
        circles=[(0.3, 0.3, 0.1)],
    )


@pytest.fixture(scope="session")
def holed_basis(holed_domain):
    return build_basis(holed_domain, 40)
