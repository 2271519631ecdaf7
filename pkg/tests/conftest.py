import numpy as np
import pytest

import ola_core.constants as c
from ola_core.approx import ScalarActivation
from ola_core.netsim import DenseLayer, NetModel, Dataset, save_model, save_dataset
from ola_core.toy import make_blobs, init_model, train


def small_mlp(sizes, activation=c.ACT_GELU, seed=0, scale=0.7):
    """ Random dense net, biases included, the last layer linear. """
    rng = np.random.default_rng(seed)
    act = ScalarActivation.from_json(activation)
    layers = []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        last = i == len(sizes) - 2
        layers.append(DenseLayer(scale * rng.normal(size=(n_out, n_in)),
                                 0.1 * rng.normal(size=n_out), None if last else act))
    return NetModel(layers)


def small_dataset(n, dim, n_classes, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(rng.normal(size=(n, dim)), rng.integers(0, n_classes, size=n), n_classes)


@pytest.fixture
def mlp():
    return small_mlp([4, 10, 8, 3])


@pytest.fixture
def mlp_data():
    return small_dataset(16, 4, 3, seed=1)


class ToyTask:
    def __init__(self, model, dataset, model_path, dataset_path):
        self.model = model
        self.dataset = dataset
        self.model_path = model_path
        self.dataset_path = dataset_path


@pytest.fixture(scope="session")
def toy(tmp_path_factory):
    """ The bundled toy task, trained once per session. """
    root = tmp_path_factory.mktemp("toy")
    dataset = make_blobs(seed=0)
    model = init_model([c.TOY_FEATURES] + c.TOY_HIDDEN + [c.TOY_CLASSES], c.ACT_RELU, seed=0)
    model = train(model, dataset, seed=0)
    model_path = str(root / "model.json")
    dataset_path = str(root / "train.csv")
    save_model(model, model_path)
    save_dataset(dataset, dataset_path)
    return ToyTask(model, dataset, model_path, dataset_path)
