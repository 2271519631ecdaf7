#!/usr/bin/env python
# -*- coding: utf-8 -*-

#
#   ola - Optimized Layerwise Approximation.
#   Distribution-aware polynomial replacement of activation functions
#   under a private-inference runtime budget.
#
#    This program is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    This program is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with this program.  If not, see <http://www.gnu.org/licenses/>.
#

"""
The whole framework end to end:

 1. input statistics and sensitivities of the clean model
 2. runtime profile, discretised
 3. one DP run giving D(N_L, k) for every k <= N_K
 4. binary search on k, with the scale ratio r tuned for every candidate

plus the report, its self check, and the region probe experiment.
"""

import csv
import datetime
import json
import logging
import math
import time
from os import makedirs
from os.path import exists, isdir, dirname, join, splitext, abspath

import numpy as np

import ola_core.constants as c
from ola_core.approx import GaussianWeight, ScalarActivation, fit, mse_report
from ola_core.netsim import (NonFiniteError, LayerCountMismatchError, ModelFormatError,
                             accuracy, forward, mean_loss, substitute, region_probe,
                             probe_regions, region_sweep, load_model, load_dataset,
                             save_model)
from ola_core.optimizer import BoundUnreachableError, solve_dp, search_budget, scan_r, best_r
from ola_core.runtime import (DegreeSpace, load_profile, synthetic_profile, discretize,
                              total_cost)
from ola_core.sensitivity import collect_stats
from ola_core.util import (OlaError, ConfigError, get_processes, json_float, float_from_json,
                           entitle, table)


class ReportInconsistencyError(OlaError):
    """ The report doesn't agree with its own tables. """
    return_value = c.RV_CRASH


def parse_r_grid(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as e:
        raise ConfigError("Bad r grid {0!r}: {1}".format(text, e))


class PipelineConfig:
    """ Everything run_pipeline needs.

    Inputs:
     - model_path, dataset_path -- Clean model JSON and training set CSV
     - profile_path -- Runtime profile CSV, None for the synthetic one
     - nu -- Discretisation unit
     - degrees -- DegreeSpace
     - budget -- N_K, None for the cost of the largest degree everywhere
     - acc_drop_pct -- Allowed accuracy drop, percentage points
     - r_grid -- Scale ratios tried for every candidate degree vector
     - seed -- Echoed in the report, the pipeline itself draws nothing
     - output_path -- Report JSON, None to skip writing
     - series_dir -- Directory for the per layer series files
     - curve_csv -- Accuracy vs r of the adopted degrees, None to skip
     - compare_uniform -- Also search the best uniform degree
     - timestamps -- Put the creation time and timings in the report
     - processes -- Worker processes for the dataset scans

    """

    def __init__(self, model_path, dataset_path, profile_path=None, nu=c.DEFAULT_NU,
                 degrees=None, budget=None, acc_drop_pct=c.DEFAULT_ACC_DROP_PCT,
                 r_grid=None, seed=0, output_path=None, series_dir=None, curve_csv=None,
                 compare_uniform=False, timestamps=True, processes=1, verbose=False):
        self.model_path = model_path
        self.dataset_path = dataset_path
        self.profile_path = profile_path
        self.nu = nu
        self.degrees = degrees or DegreeSpace()
        self.budget = budget
        self.acc_drop_pct = acc_drop_pct
        self.r_grid = list(c.DEFAULT_R_GRID if r_grid is None else r_grid)
        self.seed = seed
        self.output_path = output_path
        if series_dir is None and output_path is not None:
            series_dir = splitext(output_path)[0] + "_series"
        self.series_dir = series_dir
        self.curve_csv = curve_csv
        self.compare_uniform = compare_uniform
        self.timestamps = timestamps
        self.processes = processes
        self.verbose = verbose

    @classmethod
    def from_args(cls, args):
        """ From the argparse namespace of the run subcommand. """
        try:
            degrees = DegreeSpace.parse(args.degrees) if args.degrees else None
        except ValueError as e:
            raise ConfigError(str(e))
        r_grid = parse_r_grid(args.r_grid) if args.r_grid else None
        return cls(args.model, args.dataset, args.profile, args.nu, degrees, args.budget,
                   args.acc_drop, r_grid, args.seed, args.output, args.series_dir,
                   args.curve_csv, args.compare_uniform, not args.no_timestamps,
                   get_processes(), args.verbose)

    def validate(self):
        """ Raise ConfigError if anything is out of range or missing. """

        for name, path in (("model", self.model_path), ("dataset", self.dataset_path),
                           ("profile", self.profile_path)):
            if path is not None and not exists(path):
                raise ConfigError("The {0} file {1} doesn't exist".format(name, path))
        for path in (self.output_path, self.curve_csv):
            if path is not None and dirname(abspath(path)) and not isdir(dirname(abspath(path))):
                raise ConfigError("The directory of {0} doesn't exist".format(path))
        if not (math.isfinite(self.nu) and self.nu > 0):
            raise ConfigError("nu must be > 0, got {0}".format(self.nu))
        if self.budget is not None and self.budget < 0:
            raise ConfigError("The budget must be >= 0, got {0}".format(self.budget))
        if not 0 <= self.acc_drop_pct <= 100:
            raise ConfigError("The accuracy drop must be in [0, 100], "
                              "got {0}".format(self.acc_drop_pct))
        if not self.r_grid:
            raise ConfigError("The r grid is empty")
        if any(r < 1 for r in self.r_grid):
            raise ConfigError("Scale ratios must be >= 1, got {0}".format(self.r_grid))
        if any(b <= a for a, b in zip(self.r_grid[:-1], self.r_grid[1:])):
            raise ConfigError("The r grid must be strictly increasing")
        if self.processes < 1:
            raise ConfigError("Need at least one process")

    def to_json(self):
        return {"model": self.model_path, "dataset": self.dataset_path,
                "profile": self.profile_path, "nu": self.nu,
                "degrees": list(self.degrees.degrees), "budget": self.budget,
                "acc_drop_pct": self.acc_drop_pct, "r_grid": self.r_grid,
                "seed": self.seed}


def check_clean(model):
    """ The statistics and fits need the exact activations. """

    for i, act in enumerate(model.activations):
        if not isinstance(act, ScalarActivation):
            raise ModelFormatError("Activation layer {0} is already approximated, "
                                   "a clean model is needed".format(i + 1))


def mse_tables(model, stats, space):
    """ E_i(d) for every layer and degree of space, under N(mu_i, sigma_i^2).

    Return:
     - tables, series -- Per layer dict degree -> MSE, and the fit at the
       largest degree (r = 1)
    """

    tables, fits = [], []
    for act, st in zip(model.activations, stats.layers):
        rep, p = mse_report(act, GaussianWeight(st.mu, st.sigma), space.degrees)
        tables.append(rep.by_degree)
        fits.append(p)
        logging.info("Layer %d: E(%d) = %s, E(%d) = %s", st.layer_index, space.degrees[0],
                     rep[space.degrees[0]], space.max, rep[space.max])
    return tables, fits


class LayerFitter:
    """ Series per (layer, r) fitted once at max_degree, truncated on demand. """

    def __init__(self, model, stats, max_degree):
        self.model = model
        self.stats = stats
        self.max_degree = max_degree
        self._fits = {}

    def seed(self, fits, r=1.0):
        for i, p in enumerate(fits):
            self._fits[(i, r)] = p

    def series(self, i, r, degree):
        key = (i, r)
        if key not in self._fits:
            st = self.stats.layers[i]
            self._fits[key] = fit(self.model.activations[i],
                                  GaussianWeight(st.mu, st.sigma, r), self.max_degree)
        return self._fits[key].truncate(degree)

    def install(self, degrees, r):
        series = [None if d == c.SENTINEL_DEGREE else self.series(i, r, d)
                  for i, d in enumerate(degrees)]
        return substitute(self.model, series)


class DegreeEvaluator:
    """ Train accuracy of a degree vector at its best r.

    Callable as the evaluate callback of search_budget. Every r curve is
    remembered, so the adopted r and the curve are available afterwards.
    """

    def __init__(self, fitter, dataset, r_grid):
        self.fitter = fitter
        self.dataset = dataset
        self.r_grid = r_grid
        self.curves = {}

    def accuracy(self, degrees, r):
        try:
            return accuracy(self.fitter.install(degrees, r), self.dataset)
        except NonFiniteError as e:
            logging.debug("Degrees %s at r=%s: %s", list(degrees), r, e)
            return 0.0

    def curve(self, degrees):
        degrees = tuple(degrees)
        if degrees not in self.curves:
            self.curves[degrees] = scan_r(self.r_grid, lambda r: self.accuracy(degrees, r))
        return self.curves[degrees]

    def best_r(self, degrees):
        return best_r(self.curve(degrees))

    def __call__(self, degrees):
        return max(a for _, a in self.curve(degrees))


def uniform_comparison(evaluator, tau, space, threshold, n_layers):
    """ Smallest degree of space that meets the bound on every layer at once.

    Every layer keeps its own N(mu_i, sigma_i^2) and the r is tuned, only
    the degree is shared.
    """

    for d in space:
        degrees = (d,) * n_layers
        acc = evaluator(degrees)
        logging.info("Uniform degree %d: accuracy %.4f", d, acc)
        if acc >= threshold:
            return {"degree": d, "cost": total_cost(tau, degrees), "accuracy": acc,
                    "r": evaluator.best_r(degrees)}
    return {"degree": None, "cost": None, "accuracy": None, "r": None}


def uniform_wls_comparison(model, dataset, tau, space, threshold):
    """ Smallest degree of space that meets the bound when every layer is
    fitted under the same N(0, 2), whatever its inputs look like. """

    weight = GaussianWeight(c.UNIFORM_WLS_MU, math.sqrt(c.UNIFORM_WLS_VARIANCE))
    fits = [fit(act, weight, space.max) for act in model.activations]
    for d in space:
        degrees = (d,) * len(fits)
        try:
            acc = accuracy(substitute(model, [p.truncate(d) for p in fits]), dataset)
        except NonFiniteError as e:
            logging.debug("Uniform WLS degree %d: %s", d, e)
            acc = 0.0
        logging.info("Uniform WLS degree %d: accuracy %.4f", d, acc)
        if acc >= threshold:
            return {"degree": d, "cost": total_cost(tau, degrees), "accuracy": acc}
    return {"degree": None, "cost": None, "accuracy": None}


class LayerProfile:
    """ One activation layer: its input statistics, sensitivity, MSE table and
    discretized costs, plus the degree the optimizer gave it. """

    def __init__(self, stats, mse, tau, degree, series_file=None):
        self.stats = stats
        self.mse = mse
        self.tau = tau
        self.degree = degree
        self.series_file = series_file

    @property
    def error(self):
        if self.degree == c.SENTINEL_DEGREE:
            return float("inf")
        return self.mse[self.degree]

    @property
    def cost(self):
        return self.tau[self.degree]

    def to_json(self):
        st = self.stats
        return {"layer": st.layer_index, "mu": st.mu, "sigma": st.sigma, "A": st.A,
                "n_nodes": st.n_nodes, "degree": self.degree,
                "E": json_float(self.error), "tau": self.cost,
                "series_file": self.series_file}


class RunReport:
    """ Everything a run produced, JSON ready through to_json(). """

    def __init__(self, config, solution, stats, runtime, tau, mse, baseline_acc,
                 approx_acc, search=None, uniform=None, r_curve=None, status="ok",
                 series_files=None, timings=None, uniform_wls=None, first_row_ties=None):
        self.config = config
        self.solution = solution
        self.stats = stats
        self.runtime = runtime
        self.tau = tau
        self.mse = mse
        self.baseline_acc = baseline_acc
        self.approx_acc = approx_acc
        self.search = search
        self.uniform = uniform
        self.r_curve = r_curve or []
        self.status = status
        self.series_files = series_files or [None] * len(stats)
        self.timings = timings or {}
        self.uniform_wls = uniform_wls
        self.first_row_ties = first_row_ties or []

    @property
    def layers(self):
        return [LayerProfile(st, self.mse[i], self.tau[i], d, self.series_files[i])
                for i, (st, d) in enumerate(zip(self.stats.layers, self.solution.degrees))]

    @property
    def per_layer(self):
        return [layer.to_json() for layer in self.layers]

    def to_json(self, timestamps=True):
        obj = {"config": self.config.to_json(),
               "status": self.status,
               "synthetic_profile": self.runtime.synthetic,
               "first_layer_no_bootstrap": self.runtime.first_layer_no_bootstrap,
               "solution": self.solution.to_json(),
               "per_layer": self.per_layer,
               "tables": {"mse": [{str(d): e for d, e in t.items()} for t in self.mse],
                          "tau": self.tau.to_json()},
               "baseline_acc": self.baseline_acc,
               "approx_acc": self.approx_acc,
               "acc_drop_pct": self.config.acc_drop_pct,
               "r_curve": [{"r": r, "accuracy": a} for r, a in self.r_curve]}
        if self.search is not None:
            obj["search"] = {"anomaly": self.search.anomaly,
                             "sentinel": self.search.sentinel,
                             "threshold": self.search.threshold,
                             "points": self.search.points_to_json()}
        else:
            obj["search"] = {"anomaly": False, "sentinel": self.solution.has_sentinel,
                             "threshold": None, "points": []}
        if self.first_row_ties:
            obj["search"]["first_row_ties"] = {
                "budgets": len(self.first_row_ties),
                "note": "layer 1 took a smaller degree than the largest affordable one "
                        "on equal objective"}
        if self.uniform is not None or self.uniform_wls is not None:
            obj["uniform_comparison"] = {"ola_cost": self.solution.cost}
            if self.uniform is not None:
                obj["uniform_comparison"]["measured"] = dict(
                    self.uniform, label="uniform degree, per layer N(mu_i, sigma_i^2), tuned r")
            if self.uniform_wls is not None:
                obj["uniform_comparison"]["wls_n02"] = dict(
                    self.uniform_wls, label="uniform WLS, every layer under N(0, 2)")
        if timestamps:
            obj["created"] = datetime.datetime.now().isoformat()
            obj["timings"] = self.timings
        return obj

    def summary(self):
        """ Console text: the per layer table and the totals. """

        rows = self.per_layer
        cols = [["Layer"] + [r["layer"] for r in rows],
                ["mu"] + ["{0:.4g}".format(r["mu"]) for r in rows],
                ["sigma"] + ["{0:.4g}".format(r["sigma"]) for r in rows],
                ["A"] + ["{0:.4g}".format(r["A"]) for r in rows],
                ["Degree"] + [r["degree"] for r in rows],
                ["E(d)"] + ["{0:.3g}".format(float_from_json(r["E"])) for r in rows],
                ["tau(d)"] + [r["tau"] for r in rows]]
        text = table(cols) + "\n"
        text += "Cost {0} of budget {1}, V = {2:.6g}, r = {3}\n".format(
            self.solution.cost, self.solution.budget, self.solution.objective, self.solution.r)
        text += "Baseline accuracy {0:.4f}".format(self.baseline_acc)
        if self.approx_acc is not None:
            text += ", approximated {0:.4f}".format(self.approx_acc)
        text += "\n"
        if self.uniform is not None:
            if self.uniform["degree"] is None:
                text += "No uniform degree meets the accuracy bound\n"
            else:
                text += "Uniform degree {0}: cost {1} (vs {2})\n".format(
                    self.uniform["degree"], self.uniform["cost"], self.solution.cost)
        if self.uniform_wls is not None:
            if self.uniform_wls["degree"] is None:
                text += "No uniform WLS degree under N(0, 2) meets the accuracy bound\n"
            else:
                text += "Uniform WLS degree {0} under N(0, 2): cost {1} (vs {2})\n".format(
                    self.uniform_wls["degree"], self.uniform_wls["cost"], self.solution.cost)
        if self.runtime.synthetic:
            text += "NOTE: the runtime profile is SYNTHETIC, not a measurement\n"
        return text


def verify_report(obj):
    """ Recompute cost and V of a report dict from its own tables.

    Raises ReportInconsistencyError on any mismatch, V is compared exactly.
    """

    sol = obj["solution"]
    degrees = sol["degrees"]
    tau_rows = obj["tables"]["tau"]["per_layer"]
    mse_rows = obj["tables"]["mse"]
    A = [row["A"] for row in obj["per_layer"]]
    if not (len(degrees) == len(tau_rows) == len(mse_rows) == len(A)):
        raise ReportInconsistencyError("The report tables have different layer counts")

    cost = sum(tau_rows[i][str(d)] for i, d in enumerate(degrees))
    if cost != sol["cost"]:
        raise ReportInconsistencyError("Cost {0} recomputed as {1}".format(sol["cost"], cost))
    if cost > sol["budget"]:
        raise ReportInconsistencyError("Cost {0} above the budget {1}".format(cost, sol["budget"]))

    if c.SENTINEL_DEGREE in degrees:
        value = float("inf")
    else:
        value = 0.0
        for a, row, d in zip(A, mse_rows, degrees):
            value += a * row[str(d)]
    if value != float_from_json(sol["objective"]):
        raise ReportInconsistencyError("V {0!r} recomputed as {1!r}".format(
            sol["objective"], value))

    for i, (row, d) in enumerate(zip(obj["per_layer"], degrees)):
        if row["degree"] != d or row["tau"] != tau_rows[i][str(d)]:
            raise ReportInconsistencyError("Layer {0} doesn't match the "
                                           "solution".format(i + 1))


def write_report(obj, path):
    with open(path, 'w') as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.write('\n')


def write_curve_csv(curve, path):
    with open(path, 'w', newline='') as f:
        w = csv.writer(f, lineterminator='\n')
        w.writerow(["r", "accuracy"])
        for r, a in curve:
            w.writerow([repr(float(r)), repr(float(a))])


def write_series(fitter, solution, directory):
    """ One series JSON per layer plus the approximated model. Return the file names. """

    if not exists(directory):
        makedirs(directory)
    names = []
    for i, d in enumerate(solution.degrees):
        if d == c.SENTINEL_DEGREE:
            names.append(None)
            continue
        name = "layer_{0:02d}.json".format(i + 1)
        with open(join(directory, name), 'w') as f:
            json.dump(fitter.series(i, solution.r, d).to_json(), f, indent=1)
            f.write('\n')
        names.append(name)
    if not solution.has_sentinel:
        save_model(fitter.install(solution.degrees, solution.r),
                   join(directory, "approx_model.json"))
    return names


def load_runtime(config, n_layers):
    if config.profile_path is None:
        logging.warning("No runtime profile given, using the synthetic one")
        runtime = synthetic_profile(n_layers, config.degrees)
    else:
        runtime = load_profile(config.profile_path, config.degrees)
    if len(runtime) != n_layers:
        raise LayerCountMismatchError("The profile has {0} layers but the model has {1} "
                                      "activation layers".format(len(runtime), n_layers))
    return runtime


def run_pipeline(config, console=False):
    """ Run the four steps and write the outputs asked for in config.

    Raises BoundUnreachableError after writing the report with the best
    attempt when no budget keeps the accuracy bound.
    """

    timings = {}
    clock = time.perf_counter()

    def lap(name):
        nonlocal clock
        now = time.perf_counter()
        timings[name] = now - clock
        clock = now

    model = load_model(config.model_path)
    check_clean(model)
    dataset = load_dataset(config.dataset_path, model.n_classes)
    n_layers = model.n_activation_layers
    space = config.degrees
    baseline = accuracy(model, dataset)
    logging.info("Baseline accuracy %.4f on %d samples", baseline, len(dataset))

    # 1
    stats = collect_stats(model, dataset, config.processes, console, config.verbose)
    mse, fits = mse_tables(model, stats, space)
    lap("stats")

    # 2
    runtime = load_runtime(config, n_layers)
    tau = discretize(runtime, config.nu)
    n_budget = config.budget
    if n_budget is None:
        n_budget = total_cost(tau, [space.max] * n_layers)
    lap("profile")

    # 3
    dp = solve_dp(stats.A, mse, tau, n_budget, space)
    lap("dp")

    # 4
    fitter = LayerFitter(model, stats, space.max)
    fitter.seed(fits)
    evaluator = DegreeEvaluator(fitter, dataset, config.r_grid)
    error, search = None, None
    try:
        search = search_budget(dp, evaluator, baseline, config.acc_drop_pct)
        solution, approx_acc = search.solution, search.accuracy
        status = "ok"
    except BoundUnreachableError as e:
        error = e
        solution, approx_acc = e.best, e.accuracy
        status = "bound_unreachable"
    curve = [] if solution.has_sentinel else evaluator.curve(solution.degrees)
    if curve:
        solution = solution.with_r(best_r(curve))
    lap("search")

    uniform, uniform_wls = None, None
    if config.compare_uniform:
        threshold = baseline - config.acc_drop_pct / 100.0
        uniform = uniform_comparison(evaluator, tau, space, threshold, n_layers)
        uniform_wls = uniform_wls_comparison(model, dataset, tau, space, threshold)
        lap("uniform")

    ties = dp.first_row_ties()
    if ties:
        logging.info("Layer 1 took a smaller degree than the largest affordable one on "
                     "%d budgets, the objective was equal", len(ties))

    series_files = None
    if config.series_dir is not None:
        series_files = write_series(fitter, solution, config.series_dir)
    report = RunReport(config, solution, stats, runtime, tau, mse, baseline, approx_acc,
                       search, uniform, curve, status, series_files, timings,
                       uniform_wls, ties)
    obj = report.to_json(config.timestamps)
    verify_report(obj)
    if config.output_path is not None:
        write_report(obj, config.output_path)
        logging.info("Report written to %s", config.output_path)
    if config.curve_csv is not None and curve:
        write_curve_csv(curve, config.curve_csv)

    if error is not None:
        error.report = report
        raise error
    return report


def optimize(model, stats, runtime, nu, space, budget=None):
    """ Steps 2 and 3 only: the DP solution for a budget, no accuracy search. """

    check_clean(model)
    tau = discretize(runtime, nu)
    mse, _ = mse_tables(model, stats, space)
    if budget is None:
        budget = total_cost(tau, [space.max] * len(stats))
    return solve_dp(stats.A, mse, tau, budget, space).solution(budget)


def observed_range(model, dataset, layer):
    """ (min, max) of the inputs of an activation layer over the dataset. """

    lo, hi = float("inf"), float("-inf")
    for ch in dataset.chunks():
        z = forward(model, ch.features).inputs[layer - 1]
        lo, hi = min(lo, float(np.min(z))), max(hi, float(np.max(z)))
    return lo, hi


def tail_region(mu, sigma, lo, hi):
    """ The observed inputs more than 3 sigma away from mu, on the wider side. """

    upper = (mu + 3 * sigma, hi) if hi > mu + 3 * sigma else None
    lower = (lo, mu - 3 * sigma) if lo < mu - 3 * sigma else None
    if upper and lower:
        return upper if upper[1] - upper[0] >= lower[1] - lower[0] else lower
    if upper or lower:
        return upper or lower
    raise ValueError("No observed input is more than 3 sigma away from the mean")


def _safe_probe(model, dataset, layer, region, series):
    try:
        return region_probe(model, dataset, layer, region, series)
    except NonFiniteError:
        return float("inf")


def run_probe(model, dataset, stats, layer, degree=c.PROBE_DEGREE, r_grid=None):
    """ Loss with the series installed only on a region of one layer.

    The scale ratio is tuned on accuracy with only that layer substituted.
    Compares the central region [mu - sigma, mu + sigma] with the tail
    region at r = 1 and at the tuned r, and sweeps unit sigma regions
    over the observed inputs.
    """

    check_clean(model)
    if not 1 <= layer <= model.n_activation_layers:
        raise ModelFormatError("No activation layer {0}".format(layer))
    r_grid = list(c.DEFAULT_R_GRID if r_grid is None else r_grid)
    st = stats.layers[layer - 1]
    act = model.activations[layer - 1]
    weight = GaussianWeight(st.mu, st.sigma)

    def series_at(r):
        return fit(act, weight.scaled(r), degree)

    def one_layer_accuracy(r):
        acts = model.activations
        acts[layer - 1] = series_at(r)
        try:
            return accuracy(model.with_activations(acts), dataset)
        except NonFiniteError:
            return 0.0

    curve = scan_r(r_grid, one_layer_accuracy)
    tuned = best_r(curve)
    lo, hi = observed_range(model, dataset, layer)
    central = (st.mu - st.sigma, st.mu + st.sigma)
    tail = tail_region(st.mu, st.sigma, lo, hi)
    base, scaled = series_at(1.0), series_at(tuned)

    def losses(region):
        return {"region": list(region),
                "loss_r1": json_float(_safe_probe(model, dataset, layer, region, base)),
                "loss_tuned": json_float(_safe_probe(model, dataset, layer, region, scaled))}

    sweep = region_sweep(model, dataset, layer, probe_regions(st.mu, st.sigma, lo, hi),
                         {1.0: base, tuned: scaled})
    logging.info("Probe on layer %d at degree %d, tuned r = %s", layer, degree, tuned)
    return {"layer": layer, "degree": degree, "mu": st.mu, "sigma": st.sigma,
            "observed": [lo, hi], "r": tuned, "clean_loss": mean_loss(model, dataset),
            "r_curve": [{"r": r, "accuracy": a} for r, a in curve],
            "central": losses(central), "tail": losses(tail),
            "sweep": [{"lo": row["lo"], "hi": row["hi"],
                       "loss": {repr(r): json_float(v) for r, v in row["loss"].items()}}
                      for row in sweep]}


def probe_summary(result):
    cols = [["Region", "central", "tail"],
            ["r = 1", result["central"]["loss_r1"], result["tail"]["loss_r1"]],
            ["r = {0}".format(result["r"]), result["central"]["loss_tuned"],
             result["tail"]["loss_tuned"]]]
    return (entitle("Region probe, layer {0}".format(result["layer"]), 1) + table(cols) +
            "\nClean loss {0:.6g}\n".format(result["clean_loss"]))

