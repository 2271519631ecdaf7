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
A minimal dense feed-forward network: forward and backward passes,
activation substitution, accuracy and the region probe.

Layers are numbered from 1 as activation layers; the last dense layer is
linear and feeds a softmax cross-entropy. Batches are (samples, features)
arrays and weights are (out, in).
"""

import json
import logging
import math

import numpy as np

import ola_core.constants as c
from ola_core.approx import ScalarActivation, HermiteSeries
from ola_core.util import OlaError


class NonFiniteError(OlaError):
    """ Raised when a forward or backward pass produces inf or nan.

    Inputs:
     - layer -- Activation layer (1-based) where it happened, 0 for the logits
    """
    return_value = c.RV_NUMERIC

    def __init__(self, msg, layer=None):
        OlaError.__init__(self, msg)
        self.layer = layer

    def __reduce__(self):
        return (NonFiniteError, (self.args[0], self.layer))


class LayerCountMismatchError(OlaError, ValueError):
    """ Raised when a substitution doesn't give one activation per layer. """
    return_value = c.RV_BAD_INPUT


class ModelFormatError(OlaError, ValueError):
    """ Raised when a model is malformed or dimensions don't chain. """
    return_value = c.RV_BAD_INPUT


class DatasetFormatError(OlaError, ValueError):
    """ Raised when a dataset file or array can't be used. """
    return_value = c.RV_BAD_INPUT


class RegionHybrid:
    """ The series inside a region, the exact activation outside.

    Inputs:
     - base -- ScalarActivation used outside the region
     - series -- HermiteSeries used inside
     - region -- (lo, hi), both ends belong to the region

    """

    def __init__(self, base, series, region):
        lo, hi = float(region[0]), float(region[1])
        if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
            raise ValueError("Region must be a finite interval, got {0}".format(region))
        self.base = base
        self.series = series
        self.region = (lo, hi)

    def _inside(self, x):
        lo, hi = self.region
        return (x >= lo) & (x <= hi)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self.base(x)
        mask = self._inside(x)
        if np.any(mask):
            out[mask] = self.series(x[mask])
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = self.base.derivative(x)
        mask = self._inside(x)
        if np.any(mask):
            out[mask] = self.series.derivative()(x[mask])
        return out


def activation_derivative(act, z):
    """ Derivative of any of the activation types at z. """

    if isinstance(act, HermiteSeries):
        return act.derivative()(z)
    return act.derivative(z)


def activation_to_json(act):
    if act is None:
        return c.ACT_IDENTITY
    if isinstance(act, HermiteSeries):
        return {"series": act.to_json()}
    if isinstance(act, RegionHybrid):
        return {"hybrid": {"base": act.base.to_json(),
                           "series": act.series.to_json(),
                           "region": list(act.region)}}
    return act.to_json()


def activation_from_json(obj):
    if isinstance(obj, dict) and "series" in obj:
        return HermiteSeries.from_json(obj["series"])
    if isinstance(obj, dict) and "hybrid" in obj:
        h = obj["hybrid"]
        return RegionHybrid(ScalarActivation.from_json(h["base"]),
                            HermiteSeries.from_json(h["series"]), h["region"])
    return ScalarActivation.from_json(obj)


class DenseLayer:
    """ y = activation(W x + b). The output layer has activation None. """

    def __init__(self, weights, bias, activation=None):
        weights = np.array(weights, dtype=float)
        bias = np.array(bias, dtype=float).ravel()
        if weights.ndim != 2 or weights.shape[0] != len(bias):
            raise ModelFormatError("Weights {0} and bias {1} don't match".format(
                weights.shape, bias.shape))
        weights.flags.writeable = False
        bias.flags.writeable = False
        self.weights = weights
        self.bias = bias
        self.activation = activation

    @property
    def n_in(self):
        return self.weights.shape[1]

    @property
    def n_out(self):
        return self.weights.shape[0]


class NetModel:
    """ A feed-forward network of dense layers, immutable.

    Inputs:
     - layers -- List of DenseLayer, all with an activation but the last one

    """

    def __init__(self, layers):
        if len(layers) < 1:
            raise ModelFormatError("A model needs at least the output layer")
        for i, (a, b) in enumerate(zip(layers[:-1], layers[1:])):
            if a.n_out != b.n_in:
                raise ModelFormatError("Layer {0} outputs {1} values but layer {2} "
                                       "takes {3}".format(i + 1, a.n_out, i + 2, b.n_in))
        for i, l in enumerate(layers[:-1]):
            if l.activation is None:
                raise ModelFormatError("Hidden layer {0} has no activation".format(i + 1))
        if layers[-1].activation is not None:
            raise ModelFormatError("The output layer must be linear")
        self.layers = tuple(layers)

    @property
    def n_activation_layers(self):
        return len(self.layers) - 1

    @property
    def activations(self):
        return [l.activation for l in self.layers[:-1]]

    @property
    def n_features(self):
        return self.layers[0].n_in

    @property
    def n_classes(self):
        return self.layers[-1].n_out

    @property
    def n_parameters(self):
        return sum(l.weights.size + l.bias.size for l in self.layers)

    def with_activations(self, activations):
        """ New model sharing the weights, with other activations. """
        if len(activations) != self.n_activation_layers:
            raise LayerCountMismatchError("Expected {0} activations, got {1}".format(
                self.n_activation_layers, len(activations)))
        layers = [DenseLayer(l.weights, l.bias, a)
                  for l, a in zip(self.layers[:-1], activations)]
        layers.append(self.layers[-1])
        return NetModel(layers)

    def to_json(self):
        return {"layers": [{"weights": l.weights.tolist(),
                            "bias": l.bias.tolist(),
                            "activation": activation_to_json(l.activation)}
                           for l in self.layers]}

    @classmethod
    def from_json(cls, obj):
        try:
            rows = obj["layers"]
            layers = []
            for i, row in enumerate(rows):
                act = None if i == len(rows) - 1 else activation_from_json(row["activation"])
                layers.append(DenseLayer(row["weights"], row["bias"], act))
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, OlaError):
                raise
            raise ModelFormatError("Malformed model: {0}".format(e))
        return cls(layers)


class Dataset:
    """ Samples as a (n, features) array plus integer labels. """

    def __init__(self, features, labels, n_classes=None):
        features = np.array(features, dtype=float)
        labels = np.array(labels)
        if features.ndim != 2 or labels.ndim != 1 or len(features) != len(labels):
            raise DatasetFormatError("Features {0} and labels {1} don't match".format(
                features.shape, labels.shape))
        if len(labels) and not np.all(labels == np.round(labels)):
            raise DatasetFormatError("Labels must be integers")
        labels = labels.astype(int)
        if n_classes is None:
            n_classes = int(labels.max()) + 1 if len(labels) else 0
        if len(labels) and (labels.min() < 0 or labels.max() >= n_classes):
            raise DatasetFormatError("Labels must be in [0, {0})".format(n_classes))
        features.flags.writeable = False
        labels.flags.writeable = False
        self.features = features
        self.labels = labels
        self.n_classes = n_classes

    def __len__(self):
        return len(self.labels)

    @property
    def dim(self):
        return self.features.shape[1]

    def chunk(self, start, stop):
        return Dataset(self.features[start:stop], self.labels[start:stop], self.n_classes)

    def chunks(self, size=c.SCAN_CHUNK_SIZE):
        """ Fixed size slices, in order. """
        return [self.chunk(i, i + size) for i in range(0, len(self), size)]


class ForwardResult:
    """ What a forward pass remembers.

    Attributes:
     - logits -- (n, classes)
     - inputs -- Per activation layer, the pre-activation values z_i
     - outputs -- Per activation layer, the activation outputs a_i
    """

    def __init__(self, logits, inputs, outputs):
        self.logits = logits
        self.inputs = inputs
        self.outputs = outputs


def _as_batch(x):
    x = np.asarray(x, dtype=float)
    return x[np.newaxis, :] if x.ndim == 1 else x


def _check_finite(values, layer):
    if not np.all(np.isfinite(values)):
        where = "the logits" if layer == 0 else "activation layer {0}".format(layer)
        raise NonFiniteError("Non finite values in {0}".format(where), layer)


def forward(model, x):
    """ Forward pass, recording the inputs and outputs of every activation.

    Inputs:
     - model -- NetModel
     - x -- One sample (features,) or a batch (n, features)

    """

    a = _as_batch(x)
    if a.shape[1] != model.n_features:
        raise ModelFormatError("The model takes {0} features, got {1}".format(
            model.n_features, a.shape[1]))
    inputs, outputs = [], []
    for i, layer in enumerate(model.layers[:-1]):
        z = a @ layer.weights.T + layer.bias
        a = layer.activation(z)
        _check_finite(a, i + 1)
        inputs.append(z)
        outputs.append(a)
    out = model.layers[-1]
    logits = a @ out.weights.T + out.bias
    _check_finite(logits, 0)
    return ForwardResult(logits, inputs, outputs)


def forward_from(model, layer, a):
    """ Logits obtained feeding a as the output of activation layer `layer`. """

    a = _as_batch(a)
    for l in model.layers[layer:-1]:
        a = l.activation(a @ l.weights.T + l.bias)
    out = model.layers[-1]
    return a @ out.weights.T + out.bias


def log_softmax(logits):
    m = np.max(logits, axis=1, keepdims=True)
    shifted = logits - m
    return shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))


def cross_entropy(logits, labels):
    """ Per sample softmax cross-entropy. """

    logits = _as_batch(logits)
    labels = np.atleast_1d(labels)
    return -log_softmax(logits)[np.arange(len(labels)), labels]


def backward(model, x, labels, fwd=None):
    """ Gradients of the per sample loss w.r.t. every activation output.

    Inputs:
     - model -- NetModel
     - x -- Sample or batch
     - labels -- Integer label(s)
     - fwd -- ForwardResult of the same batch, computed if not given

    Return:
     - List, one (n, units) array per activation layer: dL_k / da_{i,j}

    """

    if fwd is None:
        fwd = forward(model, x)
    labels = np.atleast_1d(labels)
    n = len(labels)
    # dL/dlogits for softmax cross-entropy
    delta = np.exp(log_softmax(fwd.logits))
    delta[np.arange(n), labels] -= 1.0

    grads = [None] * model.n_activation_layers
    da = delta @ model.layers[-1].weights
    for i in range(model.n_activation_layers - 1, -1, -1):
        _check_finite(da, i + 1)
        grads[i] = da
        if i == 0:
            break
        layer = model.layers[i]
        dz = da * activation_derivative(layer.activation, fwd.inputs[i])
        da = dz @ layer.weights
    return grads


def substitute(model, series):
    """ Replace every activation with the given series (or hybrids).

    Weights and biases are shared, bit for bit.
    """

    if len(series) != model.n_activation_layers:
        raise LayerCountMismatchError("The model has {0} activation layers but {1} "
                                      "series were given".format(model.n_activation_layers,
                                                                 len(series)))
    if any(s is None for s in series):
        raise LayerCountMismatchError("Every activation layer needs a series, "
                                      "a layer without degree can't be evaluated")
    return model.with_activations(list(series))


def predict(model, features):
    return np.argmax(forward(model, features).logits, axis=1)


def accuracy(model, dataset):
    """ Top-1 accuracy, argmax ties go to the lower class index. """

    if len(dataset) == 0:
        raise DatasetFormatError("Can't measure accuracy on an empty dataset")
    correct = 0
    for ch in dataset.chunks():
        correct += int(np.sum(predict(model, ch.features) == ch.labels))
    return correct / len(dataset)


def mean_loss(model, dataset):
    """ Average softmax cross-entropy over the dataset. """

    total = 0.0
    for ch in dataset.chunks():
        total += float(np.sum(cross_entropy(forward(model, ch.features).logits, ch.labels)))
    return total / len(dataset)


def region_probe(model, dataset, layer, region, series):
    """ Average loss with the series installed only inside region, at one layer.

    Inputs:
     - model -- Clean NetModel
     - dataset -- Dataset the loss is averaged over
     - layer -- Activation layer, 1-based
     - region -- (lo, hi) in the layer's input units
     - series -- HermiteSeries fitted for that layer

    """

    if not 1 <= layer <= model.n_activation_layers:
        raise ModelFormatError("No activation layer {0}".format(layer))
    acts = model.activations
    acts[layer - 1] = RegionHybrid(acts[layer - 1], series, region)
    return mean_loss(model.with_activations(acts), dataset)


def probe_regions(mu, sigma, lo, hi):
    """ Unit sigma intervals [mu + j sigma, mu + (j + 1) sigma] covering [lo, hi]. """

    first = int(math.floor((lo - mu) / sigma))
    last = int(math.ceil((hi - mu) / sigma))
    return [(mu + j * sigma, mu + (j + 1) * sigma) for j in range(first, last)]


def region_sweep(model, dataset, layer, regions, series_by_r):
    """ Probe loss for every region and every scale ratio.

    Inputs:
     - series_by_r -- dict r -> HermiteSeries for that layer

    Return:
     - List of dicts {"lo", "hi", "loss": {r: loss}}, the loss is inf where
       the forward pass overflowed
    """

    rows = []
    for lo, hi in regions:
        losses = {}
        for r, s in series_by_r.items():
            try:
                losses[r] = region_probe(model, dataset, layer, (lo, hi), s)
            except NonFiniteError:
                losses[r] = float("inf")
        logging.debug("Probe region [%s, %s]: %s", lo, hi, losses)
        rows.append({"lo": lo, "hi": hi, "loss": losses})
    return rows


def load_model(path):
    with open(path, 'r') as f:
        try:
            obj = json.load(f)
        except ValueError as e:
            raise ModelFormatError("Can't parse {0}: {1}".format(path, e))
    return NetModel.from_json(obj)


def save_model(model, path):
    with open(path, 'w') as f:
        json.dump(model.to_json(), f)
        f.write('\n')


def load_dataset(path, n_classes=None):
    """ Header free CSV, one sample per row, features then integer label. """

    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as e:
        raise DatasetFormatError("Can't parse {0}: {1}".format(path, e))
    if data.shape[1] < 2:
        raise DatasetFormatError("Rows need at least one feature and a label")
    return Dataset(data[:, :-1], data[:, -1], n_classes)


def save_dataset(dataset, path):
    with open(path, 'w') as f:
        for x, y in zip(dataset.features, dataset.labels):
            f.write(",".join(repr(float(v)) for v in x) + ",{0}\n".format(int(y)))
