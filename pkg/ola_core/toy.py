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
The bundled toy task: synthetic classification data, a He-normal
initialiser and a small minibatch SGD trainer.
"""

import logging
import math

import numpy as np

import ola_core.constants as c
from ola_core.approx import ScalarActivation
from ola_core.netsim import (DenseLayer, NetModel, Dataset, forward, backward,
                             activation_derivative, log_softmax, mean_loss)


def make_blobs(n=c.TOY_SAMPLES, n_classes=c.TOY_CLASSES, dim=c.TOY_FEATURES, seed=0,
               heavy_tail_fraction=c.TOY_HEAVY_TAIL_FRACTION,
               heavy_tail_scale=c.TOY_HEAVY_TAIL_SCALE):
    """ Gaussian blobs, with a fraction of the samples pushed far out.

    Class centers sit on a circle of radius 3 (random directions when
    dim > 2). The heavy tail samples are scaled by heavy_tail_scale, so
    they keep their class direction and give the hidden layers inputs a
    few standard deviations away from the bulk.
    """

    rng = np.random.default_rng(seed)
    if dim == 2:
        angles = 2 * math.pi * np.arange(n_classes) / n_classes
        centers = 3.0 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    else:
        centers = rng.normal(size=(n_classes, dim))
        centers *= 3.0 / np.linalg.norm(centers, axis=1, keepdims=True)
    labels = rng.permutation(np.arange(n) % n_classes)
    features = centers[labels] + 0.6 * rng.normal(size=(n, dim))
    n_tail = int(round(heavy_tail_fraction * n))
    if n_tail:
        tail = rng.choice(n, size=n_tail, replace=False)
        features[tail] *= heavy_tail_scale
    return Dataset(features, labels, n_classes)


def make_spiral(n=c.TOY_SAMPLES, n_classes=c.TOY_CLASSES, seed=0, noise=0.2):
    """ Interleaved 2-D spirals, one arm per class. """

    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % n_classes)
    t = rng.uniform(0.0, 1.0, size=n)
    radius = 4.0 * t
    angle = 4.0 * t + 2 * math.pi * labels / n_classes + noise * rng.normal(size=n)
    features = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)
    return Dataset(features, labels, n_classes)


def init_model(sizes, activation=c.ACT_RELU, seed=0):
    """ He-normal weights and zero biases.

    Inputs:
     - sizes -- [features, hidden..., classes]
     - activation -- Activation name of every hidden layer

    """

    if len(sizes) < 2:
        raise ValueError("A model needs at least input and output sizes")
    rng = np.random.default_rng(seed)
    act = ScalarActivation.from_json(activation)
    layers = []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        w = rng.normal(scale=math.sqrt(2.0 / n_in), size=(n_out, n_in))
        last = i == len(sizes) - 2
        layers.append(DenseLayer(w, np.zeros(n_out), None if last else act))
    return NetModel(layers)


def gradients(model, features, labels):
    """ Mean gradients of the loss w.r.t. every weight matrix and bias. """

    fwd = forward(model, features)
    da = backward(model, features, labels, fwd)
    n = len(labels)

    delta = np.exp(log_softmax(fwd.logits))
    delta[np.arange(n), labels] -= 1.0
    top = fwd.outputs[-1] if fwd.outputs else features
    grads = [(delta.T @ top / n, delta.sum(axis=0) / n)]
    for i in range(model.n_activation_layers - 1, -1, -1):
        layer = model.layers[i]
        dz = da[i] * activation_derivative(layer.activation, fwd.inputs[i])
        below = fwd.outputs[i - 1] if i > 0 else features
        grads.append((dz.T @ below / n, dz.sum(axis=0) / n))
    return list(reversed(grads))


def train(model, dataset, epochs=c.TRAIN_EPOCHS, lr=c.TRAIN_LEARNING_RATE,
          batch_size=c.TRAIN_BATCH_SIZE, seed=0):
    """ Minibatch SGD on softmax cross-entropy, returns a new model. """

    rng = np.random.default_rng(seed)
    weights = [np.array(l.weights) for l in model.layers]
    biases = [np.array(l.bias) for l in model.layers]
    activations = [l.activation for l in model.layers]

    def build():
        return NetModel([DenseLayer(w, b, a) for w, b, a in zip(weights, biases, activations)])

    current = model
    for _ in range(epochs):
        order = rng.permutation(len(dataset))
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            grads = gradients(current, dataset.features[idx], dataset.labels[idx])
            for i, (gw, gb) in enumerate(grads):
                weights[i] -= lr * gw
                biases[i] -= lr * gb
            current = build()
    logging.info("Trained %d epochs, final loss %s", epochs, mean_loss(current, dataset))
    return current
