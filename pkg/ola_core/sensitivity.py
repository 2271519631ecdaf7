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
Per layer input statistics and loss-variance sensitivity weights.

For activation layer i the inputs are pooled over all nodes and samples
into (mu_i, sigma_i), and A_i is the dataset average of
alpha_{i,k} = sum_j (dL_k / da_{i,j})^2, computed on the clean network.
The loss variance of a degree vector is V(d) = sum_i A_i E_i(d_i).
"""

import json
import logging
import math

import numpy as np

import ola_core.constants as c
from ola_core.netsim import forward, backward
from ola_core.scan import scan_dataset, console_scan_dataset
from ola_core.util import OlaError, DegreeLookupError


class DegenerateLayerError(OlaError):
    """ Raised when the inputs of an activation layer have zero variance. """
    return_value = c.RV_NUMERIC

    def __init__(self, layer):
        OlaError.__init__(self, "Activation layer {0} has constant inputs "
                                "(zero variance)".format(layer))
        self.layer = layer

    def __reduce__(self):
        return (DegenerateLayerError, (self.layer,))


class NumericError(OlaError):
    """ Raised when statistics or gradients come out as nan or inf. """
    return_value = c.RV_NUMERIC


class RunningStats:
    """ Streaming mean and variance (Welford), mergeable.

    Merging is associative up to rounding; merges are always done in chunk
    order so results don't depend on how the work was split among workers.
    """

    def __init__(self, count=0, mean=0.0, m2=0.0):
        self.count = count
        self.mean = mean
        self.m2 = m2

    @classmethod
    def from_values(cls, values):
        values = np.asarray(values, dtype=float).ravel()
        if len(values) == 0:
            return cls()
        mean = float(np.mean(values))
        return cls(len(values), mean, float(np.sum((values - mean) ** 2)))

    def merge(self, other):
        """ Chan et al. pairwise combination, returns a new object. """
        if other.count == 0:
            return RunningStats(self.count, self.mean, self.m2)
        if self.count == 0:
            return RunningStats(other.count, other.mean, other.m2)
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return RunningStats(n, mean, m2)

    def push(self, values):
        return self.merge(RunningStats.from_values(values))

    @property
    def variance(self):
        """ Population variance. """
        return self.m2 / self.count if self.count else float("nan")

    @property
    def sigma(self):
        return math.sqrt(self.variance)


class LayerStats:
    """ Statistics of one activation layer.

    Inputs:
     - layer_index -- 1-based
     - mu, sigma -- Pooled mean and population standard deviation of the inputs
     - A -- Average over the dataset of sum_j (dL/da_{i,j})^2
     - n_nodes -- Width of the layer

    """

    def __init__(self, layer_index, mu, sigma, A, n_nodes):
        if not sigma > 0:
            raise DegenerateLayerError(layer_index)
        if not A >= 0:
            raise NumericError("Sensitivity of layer {0} is {1}".format(layer_index, A))
        self.layer_index = int(layer_index)
        self.mu = float(mu)
        self.sigma = float(sigma)
        self.A = float(A)
        self.n_nodes = int(n_nodes)

    def to_json(self):
        return {"layer": self.layer_index, "mu": self.mu, "sigma": self.sigma,
                "A": self.A, "n_nodes": self.n_nodes}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["layer"], obj["mu"], obj["sigma"], obj["A"], obj["n_nodes"])


class SensitivityProfile:
    """ LayerStats for layers 1..N_L, plus the number of samples used. """

    def __init__(self, layers, n_train):
        for i, l in enumerate(layers):
            if l.layer_index != i + 1:
                raise ValueError("Layer indices must be 1..N_L in order, "
                                 "found {0} at position {1}".format(l.layer_index, i + 1))
        if n_train < 1:
            raise ValueError("A profile needs at least one sample")
        self.layers = tuple(layers)
        self.n_train = int(n_train)

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, i):
        return self.layers[i]

    @property
    def A(self):
        return [l.A for l in self.layers]

    def to_json(self):
        return [l.to_json() for l in self.layers]

    @classmethod
    def from_json(cls, obj, n_train=1):
        return cls([LayerStats.from_json(o) for o in obj], n_train)


def stats_chunk(model, chunk):
    """ Per layer RunningStats of the inputs and sum of alpha over the chunk. """

    fwd = forward(model, chunk.features)
    grads = backward(model, chunk.features, chunk.labels, fwd)
    out = []
    for z, g in zip(fwd.inputs, grads):
        alpha = np.sum(g * g, axis=1)
        out.append((RunningStats.from_values(z), float(np.sum(alpha))))
    return out


def reduce_stats(model, chunk_results, n_train):
    """ Merge chunk results, in order, into a SensitivityProfile. """

    n_layers = model.n_activation_layers
    stats = [RunningStats() for _ in range(n_layers)]
    alpha_sums = [0.0] * n_layers
    for result in chunk_results:
        for i, (s, a) in enumerate(result):
            stats[i] = stats[i].merge(s)
            alpha_sums[i] += a

    layers = []
    for i in range(n_layers):
        s = stats[i]
        if not (math.isfinite(s.mean) and math.isfinite(s.m2) and math.isfinite(alpha_sums[i])):
            raise NumericError("Non finite statistics in activation layer {0}".format(i + 1))
        if s.m2 <= 0:
            raise DegenerateLayerError(i + 1)
        A = alpha_sums[i] / n_train
        logging.info("Layer %d: mu=%s sigma=%s A=%s", i + 1, s.mean, s.sigma, A)
        layers.append(LayerStats(i + 1, s.mean, s.sigma, A, model.layers[i].n_out))
    return SensitivityProfile(layers, n_train)


def collect_stats(model, dataset, processes=1, console=False, verbose=False):
    """ Input distribution and sensitivity of every activation layer.

    Inputs:
     - model -- Clean NetModel (exact activations)
     - dataset -- Non empty Dataset
     - processes -- Worker processes for the scan
     - console -- Print a progress bar while scanning

    """

    if model.n_activation_layers < 1:
        raise ValueError("The model has no activation layer")
    if len(dataset) == 0:
        raise ValueError("The dataset is empty")
    if console:
        results = console_scan_dataset("Collecting layer statistics", model, dataset,
                                       stats_chunk, processes, verbose)
    else:
        results = scan_dataset(model, dataset, stats_chunk, processes)
    return reduce_stats(model, results, len(dataset))


def loss_variance(profile, mse_tables, degrees):
    """ V(d) = sum_i A_i E_i(d_i).

    Inputs:
     - profile -- SensitivityProfile, or simply a list of A_i
     - mse_tables -- Per layer dict degree -> E_i(degree)
     - degrees -- One degree per layer; SENTINEL_DEGREE makes V infinite

    """

    A = profile.A if isinstance(profile, SensitivityProfile) else list(profile)
    if len(degrees) != len(A) or len(mse_tables) != len(A):
        raise ValueError("Expected {0} degrees and tables, got {1} and {2}".format(
            len(A), len(degrees), len(mse_tables)))
    total = 0.0
    for i, (a, table, d) in enumerate(zip(A, mse_tables, degrees)):
        if d == c.SENTINEL_DEGREE:
            return float("inf")
        try:
            e = table[d]
        except KeyError:
            raise DegreeLookupError(i + 1, d)
        total += a * e
    return total


def save_profile_json(profile, path):
    with open(path, 'w') as f:
        json.dump(profile.to_json(), f, indent=1)
        f.write('\n')


def load_profile_json(path, n_train=1):
    with open(path, 'r') as f:
        return SensitivityProfile.from_json(json.load(f), n_train)
