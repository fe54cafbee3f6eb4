import numpy as np
import pytest

from modalms.dataset import Dataset
from modalms.kernel_density import Bandwidths, density_y_gradient, joint_density
from modalms.meanshift import (MeanShiftConfig, ModalSet, _merge, ascend, mean_shift_step, modal_curve,
                               modal_set, starting_points)
from modalms.simulate import ScenarioSpec, evaluation_mesh, gen_scenario, mixture_modes

from .conftest import random_dataset


def test_step_single_point():
    ds = Dataset([0.0], [3.0])
    for y0 in (-10.0, 0.0, 3.0, 7.5):
        assert mean_shift_step(ds, [1.0], Bandwidths(1, 1), 0.0, y0) == 3.0


def test_step_symmetric_fixed_point():
    ds = Dataset([0.2, 0.2], [0.0, 1.0])
    assert mean_shift_step(ds, [1, 1], Bandwidths(0.3, 0.4), 0.2, 0.5) == pytest.approx(0.5, abs=1e-15)


def test_ones_equal_delta_on_complete(rng):
    ds = random_dataset(rng, n=30)
    bw = Bandwidths(0.2, 0.7)
    assert mean_shift_step(ds, np.ones(ds.n), bw, 0.3, 0.1) == mean_shift_step(ds, ds.delta, bw, 0.3, 0.1)


def test_start_at_fixed_point():
    ds = Dataset([0.0], [2.0])
    res = ascend(ds, [1.0], Bandwidths(1, 1), 0.0, 2.0, record_path=True)
    assert res.converged and res.iterations == 1 and res.y == 2.0


def test_scenario1_branch_recovered():
    ds = gen_scenario(ScenarioSpec(1, 0.5, 0.0, 2000), 7)
    # oracle: analytic slice at x=0.25 is 2 + mixture modes; the upper branch
    upper = 2.0 + mixture_modes(0.5, -1.5, 1.5).max()
    y, _, ok = ascend(ds, np.ones(ds.n), Bandwidths(0.05, 0.3), 0.25, 4.0)
    assert ok and abs(y - upper) < 0.25 and abs(upper - 3.5) < 1e-3


def test_fixed_point_residual(rng):
    worst = 0.0
    for _ in range(50):
        ds = random_dataset(rng)
        bw = Bandwidths(rng.uniform(0.05, 0.5), rng.uniform(0.2, 2))
        x = rng.random()
        s = modal_set(ds, np.ones(ds.n), bw, x)
        f = joint_density(ds, np.ones(ds.n), bw, x, s.modes)
        g = density_y_gradient(ds, np.ones(ds.n), bw, x, s.modes)
        worst = max(worst, float(np.max(np.abs(g) / f)))
    assert worst < 1e-5


def test_starting_points():
    ds = Dataset([0.0, 1.0], [-1.5, 3.5])
    np.testing.assert_array_equal(starting_points(ds, MeanShiftConfig(n_starts=2)), [-1.5, 3.5])
    np.testing.assert_array_equal(
        starting_points(ds, MeanShiftConfig(n_starts=3, start_range=(0, 1))), [0, 0.5, 1])
    sp = starting_points(ds)
    assert sp.min() >= -1.5 and sp.max() <= 3.5


def test_merge_dedups():
    modes, _ = _merge(np.array([3.0, 3.0000004]), np.array([1.0, 2.0]), 1e-3)
    assert modes.tolist() == [3.0000004]


def test_two_clusters_symmetric(rng):
    y = np.concatenate([rng.normal(-2, 0.1, 50), rng.normal(2, 0.1, 50)])
    y = np.concatenate([y, -y])  # exactly symmetric sample
    ds = Dataset(np.zeros(y.size), y)
    s = modal_set(ds, np.ones(ds.n), Bandwidths(0.5, 0.3), 0.0)
    assert len(s) == 2
    assert s.modes[0] == pytest.approx(-s.modes[1], abs=1e-6)


def test_huge_h2_single_mode(scenario1_200):
    ds = scenario1_200
    s = modal_set(ds, np.ones(ds.n), Bandwidths(0.1, 50.0), 0.3)
    assert len(s) == 1


def test_mesh_one_point_equals_modal_set(scenario1_200):
    ds, bw = scenario1_200, Bandwidths(0.08, 0.5)
    c = modal_curve(ds, np.ones(ds.n), bw, [0.4])
    s = modal_set(ds, np.ones(ds.n), bw, 0.4)
    np.testing.assert_array_equal(c.sets[0].modes, s.modes)


def test_evaluation_mesh():
    m = evaluation_mesh()
    assert len(m) == 200 and m[0] == 0 and m[-1] == 1


def test_mesh_permutation(scenario1_200, rng):
    ds, bw = scenario1_200, Bandwidths(0.08, 0.5)
    mesh = np.linspace(0, 1, 15)
    perm = rng.permutation(15)
    a = modal_curve(ds, np.ones(ds.n), bw, mesh)
    b = modal_curve(ds, np.ones(ds.n), bw, mesh[perm])
    for i, j in enumerate(perm):
        np.testing.assert_array_equal(b.sets[i].modes, a.sets[j].modes)


def test_threads_do_not_change_result(scenario1_200):
    ds, bw = scenario1_200, Bandwidths(0.08, 0.5)
    a = modal_curve(ds, np.ones(ds.n), bw, np.linspace(0, 1, 30))
    b = modal_curve(ds, np.ones(ds.n), bw, np.linspace(0, 1, 30), threads=4)
    for s, t in zip(a.sets, b.sets):
        np.testing.assert_array_equal(s.modes, t.modes)


def test_truncation_moves_modes_negligibly(scenario1_200):
    ds, bw = scenario1_200, Bandwidths(0.08, 0.5)
    mesh = np.linspace(0, 1, 25)
    a = modal_curve(ds, np.ones(ds.n), bw, mesh)
    b = modal_curve(ds, np.ones(ds.n), bw, mesh, MeanShiftConfig(cutoff=np.inf))
    for s, t in zip(a.sets, b.sets):
        assert len(s) == len(t)
        assert np.max(np.abs(s.modes - t.modes)) <= 1e-6


def test_config_validation():
    with pytest.raises(ValueError):
        MeanShiftConfig(n_starts=1)
    with pytest.raises(ValueError):
        MeanShiftConfig(tol=1.0, merge_tol=0.5)


def test_modal_set_dataclass():
    s = ModalSet(np.array([0.0]), np.array([1.0, 2.0]), np.array([0.1, 0.2]))
    assert s.size == 2
