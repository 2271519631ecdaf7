import json
import os

import pytest

import ola_core.constants as c
from ola_core.netsim import load_model, accuracy
from ola_core.optimizer import BoundUnreachableError, Solution
from ola_core.pipeline import (PipelineConfig, ReportInconsistencyError, LayerProfile,
                               RunReport, run_pipeline, verify_report, run_probe,
                               tail_region, parse_r_grid, uniform_wls_comparison)
from ola_core.runtime import (DegreeSpace, DiscreteCostTable, synthetic_profile, discretize,
                              total_cost)
from ola_core.sensitivity import LayerStats, SensitivityProfile, collect_stats
from ola_core.util import ConfigError, float_from_json


def tiny_report():
    return {"solution": {"degrees": [3, 7], "objective": 0.5 * 0.25 + 2.0 * 0.125,
                         "cost": 8, "budget": 9, "r": 1.0},
            "tables": {"tau": {"nu": 0.25, "per_layer": [{"-1": 0, "3": 3, "7": 5},
                                                         {"-1": 0, "3": 3, "7": 5}]},
                       "mse": [{"3": 0.25, "7": 0.1}, {"3": 0.5, "7": 0.125}]},
            "per_layer": [{"degree": 3, "A": 0.5, "tau": 3},
                          {"degree": 7, "A": 2.0, "tau": 5}]}


def test_report_check_accepts_a_consistent_report():
    verify_report(tiny_report())


def test_layer_profile_row():
    stats = LayerStats(2, 0.5, 1.5, 3.0, 8)
    layer = LayerProfile(stats, {3: 0.25, 7: 0.125}, {-1: 0, 3: 3, 7: 5}, 7, "layer_2.json")
    row = layer.to_json()
    assert (row["layer"], row["degree"], row["E"], row["tau"]) == (2, 7, 0.125, 5)
    assert row["series_file"] == "layer_2.json"
    skipped = LayerProfile(stats, {3: 0.25}, {-1: 0, 3: 3}, c.SENTINEL_DEGREE)
    assert skipped.error == float("inf")
    assert skipped.to_json()["E"] == "inf"
    assert skipped.cost == 0


def tiny_run_report(**kwargs):
    space = DegreeSpace([3, 7])
    stats = SensitivityProfile([LayerStats(1, 0.0, 1.0, 0.5, 4),
                                LayerStats(2, 0.5, 2.0, 2.0, 4)], 10)
    tau = DiscreteCostTable(0.25, [{-1: 0, 3: 3, 7: 5}, {-1: 0, 3: 3, 7: 5}])
    mse = [{3: 0.25, 7: 0.1}, {3: 0.5, 7: 0.125}]
    solution = Solution((3, 7), 0.5 * 0.25 + 2.0 * 0.125, 8, 9)
    return RunReport(PipelineConfig("model.json", "train.csv", degrees=space), solution,
                     stats, synthetic_profile(2, space), tau, mse, 0.95, 0.945, **kwargs)


def test_run_report_labels_both_uniform_baselines():
    report = tiny_run_report(
        uniform={"degree": 7, "cost": 10, "accuracy": 0.95, "r": 1.5},
        uniform_wls={"degree": None, "cost": None, "accuracy": None})
    obj = report.to_json(timestamps=False)
    verify_report(obj)
    assert obj["first_layer_no_bootstrap"] is True
    comparison = obj["uniform_comparison"]
    assert comparison["ola_cost"] == 8
    assert comparison["measured"]["degree"] == 7
    assert "N(mu_i, sigma_i^2)" in comparison["measured"]["label"]
    assert comparison["wls_n02"]["degree"] is None
    assert "N(0, 2)" in comparison["wls_n02"]["label"]
    assert "No uniform WLS degree" in report.summary()


def test_run_report_notes_first_row_ties():
    assert "first_row_ties" not in tiny_run_report().to_json(False)["search"]
    obj = tiny_run_report(first_row_ties=[5, 6]).to_json(False)
    assert obj["search"]["first_row_ties"]["budgets"] == 2
    assert "uniform_comparison" not in tiny_run_report().to_json(False)


def test_uniform_wls_comparison(mlp, mlp_data):
    space = DegreeSpace([3, 7])
    tau = discretize(synthetic_profile(mlp.n_activation_layers, space))
    found = uniform_wls_comparison(mlp, mlp_data, tau, space, 0.0)
    assert found["degree"] == 3
    assert found["cost"] == total_cost(tau, (3, 3))
    assert 0.0 <= found["accuracy"] <= 1.0
    missed = uniform_wls_comparison(mlp, mlp_data, tau, space, 1.01)
    assert missed == {"degree": None, "cost": None, "accuracy": None}


@pytest.mark.parametrize("field, value", [("objective", 0.4), ("cost", 7), ("budget", 7)])
def test_report_check_catches_tampering(field, value):
    report = tiny_report()
    report["solution"][field] = value
    with pytest.raises(ReportInconsistencyError):
        verify_report(report)


def test_report_check_with_a_skipped_layer():
    report = tiny_report()
    report["solution"].update(degrees=[-1, 7], objective="inf", cost=5)
    report["per_layer"][0].update(degree=-1, tau=0)
    verify_report(report)


def test_config_validation(tmp_path):
    model = tmp_path / "m.json"
    model.write_text("{}")
    good = dict(model_path=str(model), dataset_path=str(model))
    PipelineConfig(**good).validate()
    for bad in (dict(nu=0.0), dict(budget=-1), dict(acc_drop_pct=101.0), dict(r_grid=[]),
                dict(r_grid=[0.5, 1.0]), dict(r_grid=[2.0, 1.0]), dict(processes=0),
                dict(profile_path=str(tmp_path / "missing.csv")),
                dict(output_path=str(tmp_path / "nowhere" / "report.json"))):
        with pytest.raises(ConfigError):
            PipelineConfig(**dict(good, **bad)).validate()


def test_series_dir_follows_the_report():
    config = PipelineConfig("m.json", "d.csv", output_path="out/report.json")
    assert config.series_dir == os.path.join("out", "report_series")


def test_r_grid_text():
    assert parse_r_grid("1,1.5, 2") == [1.0, 1.5, 2.0]
    with pytest.raises(ConfigError):
        parse_r_grid("1,two")


def test_tail_region():
    assert tail_region(0.0, 1.0, -2.0, 5.0) == (3.0, 5.0)
    assert tail_region(0.0, 1.0, -6.0, 5.0) == (-6.0, -3.0)
    with pytest.raises(ValueError):
        tail_region(0.0, 1.0, -2.0, 2.0)


@pytest.fixture(scope="module")
def toy_run(toy, tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    config = PipelineConfig(toy.model_path, toy.dataset_path,
                            output_path=str(root / "report.json"),
                            curve_csv=str(root / "curve.csv"), compare_uniform=True,
                            timestamps=False)
    return config, run_pipeline(config)


@pytest.mark.slow
def test_pipeline_keeps_the_accuracy(toy_run):
    config, report = toy_run
    assert report.status == "ok"
    assert report.approx_acc >= report.baseline_acc - 0.01
    assert not report.solution.has_sentinel
    assert report.solution.cost <= report.solution.budget
    assert report.solution.objective < float("inf")
    assert report.runtime.synthetic


@pytest.mark.slow
def test_pipeline_beats_the_uniform_degree(toy_run):
    config, report = toy_run
    for baseline in (report.uniform, report.uniform_wls):
        assert baseline["degree"] is not None
        assert report.solution.cost <= baseline["cost"]
        # only the cheapest vector of all can tie
        if baseline["degree"] > config.degrees.degrees[0]:
            assert report.solution.cost < baseline["cost"]


@pytest.mark.slow
def test_pipeline_search_sees_every_budget(toy_run):
    _, report = toy_run
    budget = report.solution.budget
    points = report.search.points
    assert all(k >= budget for k, _, _, p in points if p)
    assert any(d == report.solution.degrees and p for _, d, _, p in points)
    assert report.search.anomaly == any(k > budget and not p for k, _, _, p in points)


@pytest.mark.slow
def test_pipeline_outputs(toy, toy_run):
    config, report = toy_run
    with open(config.output_path) as f:
        obj = json.load(f)
    verify_report(obj)
    assert "created" not in obj and "timings" not in obj
    assert obj["synthetic_profile"] is True
    assert len(obj["per_layer"]) == 3
    assert obj["uniform_comparison"]["ola_cost"] == report.solution.cost
    assert set(obj["uniform_comparison"]) == {"ola_cost", "measured", "wls_n02"}
    for row in obj["per_layer"]:
        assert os.path.exists(os.path.join(config.series_dir, row["series_file"]))
    model = load_model(os.path.join(config.series_dir, "approx_model.json"))
    assert accuracy(model, toy.dataset) == report.approx_acc
    with open(config.curve_csv) as f:
        assert len(f.read().splitlines()) == len(config.r_grid) + 1


@pytest.mark.slow
def test_pipeline_is_deterministic(toy, toy_run, tmp_path):
    config, _ = toy_run
    again = PipelineConfig(toy.model_path, toy.dataset_path,
                           output_path=str(tmp_path / "report.json"),
                           curve_csv=str(tmp_path / "curve.csv"), compare_uniform=True,
                           timestamps=False)
    run_pipeline(again)
    with open(config.output_path, 'rb') as a, open(again.output_path, 'rb') as b:
        assert a.read() == b.read()


@pytest.mark.slow
def test_zero_budget_is_unreachable(toy, tmp_path):
    config = PipelineConfig(toy.model_path, toy.dataset_path, budget=0,
                            output_path=str(tmp_path / "report.json"), timestamps=False)
    with pytest.raises(BoundUnreachableError) as info:
        run_pipeline(config)
    assert info.value.return_value == c.RV_BOUND_UNREACHABLE
    with open(config.output_path) as f:
        obj = json.load(f)
    assert obj["status"] == "bound_unreachable"
    assert obj["solution"]["degrees"] == [c.SENTINEL_DEGREE] * 3
    verify_report(obj)


@pytest.mark.slow
def test_probe_tail_and_scale_ratio(toy):
    stats = collect_stats(toy.model, toy.dataset)
    result = run_probe(toy.model, toy.dataset, stats, 1)
    central = {k: float_from_json(v) for k, v in result["central"].items() if k != "region"}
    tail = {k: float_from_json(v) for k, v in result["tail"].items() if k != "region"}
    assert tail["loss_r1"] >= 10 * central["loss_r1"]
    assert tail["loss_tuned"] * 10 <= tail["loss_r1"]
    assert result["r"] > 1.0
    curve = [p["accuracy"] for p in result["r_curve"]]
    assert max(curve) >= curve[0]
