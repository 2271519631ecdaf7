from math import sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import small_mlp, small_dataset

import ola_core.constants as c
from ola_core.approx import ScalarActivation
from ola_core.netsim import DenseLayer, NetModel, Dataset, forward_from, cross_entropy, forward
from ola_core.sensitivity import (RunningStats, SensitivityProfile, LayerStats,
                                  DegenerateLayerError, collect_stats, loss_variance,
                                  save_profile_json, load_profile_json)
from ola_core.util import DegreeLookupError


def identity_net():
    ident = ScalarActivation.identity()
    return NetModel([DenseLayer(np.eye(3), np.zeros(3), ident),
                     DenseLayer(np.ones((2, 3)), np.zeros(2))])


def test_single_sample_statistics():
    stats = collect_stats(identity_net(), Dataset([[1.0, 2.0, 3.0]], [0], 2))
    assert stats[0].mu == pytest.approx(2.0)
    assert stats[0].sigma == pytest.approx(sqrt(2.0 / 3.0))
    assert stats[0].n_nodes == 3


def test_constant_inputs_are_degenerate():
    relu = ScalarActivation.relu()
    model = NetModel([DenseLayer(np.zeros((3, 2)), np.zeros(3), relu),
                      DenseLayer(np.ones((2, 3)), np.zeros(2))])
    with pytest.raises(DegenerateLayerError) as info:
        collect_stats(model, small_dataset(10, 2, 2))
    assert info.value.layer == 1


def test_layer_without_influence_has_zero_sensitivity():
    gelu = ScalarActivation.gelu()
    rng = np.random.default_rng(3)
    model = NetModel([DenseLayer(rng.normal(size=(4, 2)), np.zeros(4), gelu),
                      DenseLayer(np.zeros((3, 4)), [0.5, -1.0, 2.0], gelu),
                      DenseLayer(rng.normal(size=(2, 3)), np.zeros(2))])
    stats = collect_stats(model, small_dataset(20, 2, 2))
    assert stats[0].A == 0.0
    assert stats[1].A > 0.0


def test_sensitivity_matches_finite_differences(mlp, mlp_data):
    stats = collect_stats(mlp, mlp_data)
    fwd = forward(mlp, mlp_data.features)
    h = 1e-4
    for layer in range(1, mlp.n_activation_layers + 1):
        total = 0.0
        for k in range(len(mlp_data)):
            a = fwd.outputs[layer - 1][k]
            label = mlp_data.labels[k]
            for j in range(len(a)):
                up, down = a.copy(), a.copy()
                up[j] += h
                down[j] -= h
                g = (cross_entropy(forward_from(mlp, layer, up), label)[0] -
                     cross_entropy(forward_from(mlp, layer, down), label)[0]) / (2 * h)
                total += g * g
        assert stats[layer - 1].A == pytest.approx(total / len(mlp_data), rel=1e-5)


def test_workers_give_the_same_numbers():
    model = small_mlp([3, 6, 5, 2], c.ACT_RELU, seed=4)
    dataset = small_dataset(700, 3, 2, seed=5)
    one = collect_stats(model, dataset, processes=1)
    two = collect_stats(model, dataset, processes=2)
    assert one.to_json() == two.to_json()


def test_deterministic():
    model = small_mlp([3, 6, 2], seed=2)
    dataset = small_dataset(300, 3, 2, seed=2)
    assert collect_stats(model, dataset).to_json() == collect_stats(model, dataset).to_json()


def test_loss_variance_example():
    assert loss_variance([2.0, 3.0], [{7: 0.5}, {7: 0.1}], (7, 7)) == pytest.approx(1.3)


def test_loss_variance_zero_weights():
    assert loss_variance([0.0, 0.0], [{3: 0.4}, {3: 0.2}], (3, 3)) == 0.0


def test_loss_variance_sentinel_is_infinite():
    assert loss_variance([1.0, 1.0], [{3: 0.4}, {3: 0.2}], (3, c.SENTINEL_DEGREE)) == float("inf")


def test_loss_variance_missing_degree():
    with pytest.raises(DegreeLookupError) as info:
        loss_variance([1.0, 1.0], [{3: 0.4}, {3: 0.2}], (3, 7))
    assert (info.value.layer, info.value.degree) == (2, 7)


def test_loss_variance_linear_in_sensitivity():
    tables = [{3: 0.4, 7: 0.1}, {3: 0.2, 7: 0.05}]
    base = loss_variance([1.5, 2.0], tables, (7, 3))
    doubled = loss_variance([3.0, 2.0], tables, (7, 3))
    assert doubled - base == pytest.approx(1.5 * 0.1)


def test_loss_variance_takes_a_profile():
    profile = SensitivityProfile([LayerStats(1, 0.0, 1.0, 2.0, 4),
                                  LayerStats(2, 0.5, 2.0, 3.0, 4)], 10)
    assert loss_variance(profile, [{7: 0.5}, {7: 0.1}], (7, 7)) == pytest.approx(1.3)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=2, max_size=60),
       st.integers(min_value=0, max_value=60))
def test_running_stats_merge(values, split):
    split = min(split, len(values))
    merged = RunningStats.from_values(values[:split]).merge(
        RunningStats.from_values(values[split:]))
    direct = RunningStats.from_values(values)
    assert merged.count == direct.count
    assert merged.mean == pytest.approx(direct.mean, rel=1e-9, abs=1e-9)
    assert merged.m2 == pytest.approx(direct.m2, rel=1e-9, abs=1e-6)


def test_profile_json_file(tmp_path, mlp, mlp_data):
    stats = collect_stats(mlp, mlp_data)
    path = str(tmp_path / "stats.json")
    save_profile_json(stats, path)
    assert load_profile_json(path).to_json() == stats.to_json()
