import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modalms.dataset import Dataset
from modalms.kernel_density import (Bandwidths, DegenerateWeightsError, conditional_density,
                                    density_y_gradient, gaussian_kernel, joint_density)

from .conftest import random_dataset


def test_gaussian_kernel_values():
    assert gaussian_kernel(0.0) == pytest.approx(0.3989423, abs=1e-7)
    assert gaussian_kernel(1.0) == pytest.approx(0.2419707, abs=1e-7)


@given(st.floats(-50, 50))
def test_gaussian_kernel_symmetric(u):
    assert gaussian_kernel(-u) == gaussian_kernel(u)


def test_single_point_peak():
    ds = Dataset([0.0], [0.0])
    assert joint_density(ds, [1.0], Bandwidths(1, 1), 0.0, 0.0) == pytest.approx(0.1591549, abs=1e-7)


def test_delta_weights_equal_observed_subsample(rng):
    ds = random_dataset(rng, n=40, missing=0.3)
    sub = Dataset(ds.X[ds.observed], ds.y[ds.observed])
    bw = Bandwidths(0.2, 0.5)
    ys = np.linspace(-5, 5, 11)
    a = joint_density(ds, ds.delta, bw, 0.4, ys)
    b = joint_density(sub, np.ones(sub.n), bw, 0.4, ys)
    np.testing.assert_allclose(a, b, rtol=1e-13)


def test_conditional_ratio_single_point():
    ds = Dataset([0.0], [0.0])
    bw = Bandwidths(1, 1)
    r = conditional_density(ds, [1.0], bw, 0.0, 0.0) / conditional_density(ds, [1.0], bw, 0.0, 2.0)
    assert r == pytest.approx(gaussian_kernel(0) / gaussian_kernel(2), rel=1e-12)


def test_conditional_symmetric_two_points():
    ds = Dataset([0.3, 0.3], [-1.2, 1.2])
    bw = Bandwidths(0.1, 0.4)
    assert conditional_density(ds, [1, 1], bw, 0.3, -1.2) == pytest.approx(
        conditional_density(ds, [1, 1], bw, 0.3, 1.2), rel=1e-14)


def test_gradient_zero_at_single_point():
    ds = Dataset([0.0], [2.0])
    assert density_y_gradient(ds, [1.0], Bandwidths(1, 1), 0.0, 2.0) == 0.0


def test_gradient_matches_finite_difference(rng):
    for _ in range(30):
        ds = random_dataset(rng)
        bw = Bandwidths(rng.uniform(0.05, 0.5), rng.uniform(0.2, 2))
        x, y = rng.random(), rng.uniform(-4, 4)
        h = 1e-5
        fd = (joint_density(ds, np.ones(ds.n), bw, x, y + h)
              - joint_density(ds, np.ones(ds.n), bw, x, y - h)) / (2 * h)
        g = density_y_gradient(ds, np.ones(ds.n), bw, x, y)
        scale = max(abs(g), joint_density(ds, np.ones(ds.n), bw, x, y) / bw.h2)
        assert abs(fd - g) <= 1e-6 * scale


def test_gradient_antisymmetric():
    ds = Dataset([0.0, 0.0], [-1.0, 1.0])
    bw = Bandwidths(1, 0.5)
    for t in (0.1, 0.4, 2.0):
        assert density_y_gradient(ds, [1, 1], bw, 0.0, t) == pytest.approx(
            -density_y_gradient(ds, [1, 1], bw, 0.0, -t), rel=1e-13)


def test_weights_validated():
    ds = Dataset([0.0, 1.0], [1.0, np.nan])
    with pytest.raises(ValueError):
        joint_density(ds, [1.0, 1.0], Bandwidths(1, 1), 0, 0)
    with pytest.raises(DegenerateWeightsError):
        joint_density(ds, [0.0, 0.0], Bandwidths(1, 1), 0, 0)
    with pytest.raises(ValueError):
        Bandwidths(0.0, 1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_truncation_is_negligible(seed):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng)
    bw = Bandwidths(rng.uniform(0.05, 0.5), rng.uniform(0.2, 2))
    ys = np.linspace(-6, 6, 25)
    a = joint_density(ds, np.ones(ds.n), bw, 0.5, ys)
    b = joint_density(ds, np.ones(ds.n), bw, 0.5, ys, cutoff=np.inf)
    np.testing.assert_allclose(a, b, rtol=0, atol=np.exp(-50) * ds.n)
