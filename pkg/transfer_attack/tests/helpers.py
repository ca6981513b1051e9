"""Small models and datasets shared by the test modules."""

import numpy as np

from transfer_attack.data.synthetic import synthetic_blobs
from transfer_attack.models.architectures import Classifier, init_model, model_spec
from transfer_attack.models.training import TrainConfig, train
from transfer_attack.tensor import ops
from transfer_attack.tensor.autograd import Tensor


def tiny_dataset(n_per_class=20, classes=3, size=8, seed=0):
    return synthetic_blobs(n_per_class, classes, size, seed=seed)


def random_classifier(arch="mlp-a", shape=(1, 8, 8), classes=3, seed=0, name=""):
    spec = model_spec(arch, shape, classes)
    return Classifier(spec, init_model(spec, seed), name=name or f"{arch}-{seed}")


def trained_classifier(arch, dataset, epochs=3, seed=0, name="", **kwargs):
    spec = model_spec(arch, dataset.image_shape, dataset.num_classes)
    cfg = TrainConfig(epochs=epochs, batch_size=16, seed=seed, **kwargs)
    return Classifier(spec, train(spec, dataset, cfg), name=name or arch)


def smooth_point(model, rng, margin=1e-4, tries=200):
    """A random input whose ReLU pre-activations all sit at least ``margin`` from 0."""
    for _ in range(tries):
        x = rng.uniform(0.0, 1.0, size=model.input_shape)
        if model.relu_margin(x) > margin:
            return x
    raise RuntimeError("No input away from ReLU kinks found")


class LinearModel:
    """Affine logits W·flatten(x) + b; differentiable, no kinks."""

    def __init__(self, weight, bias, input_shape, name="linear"):
        self.weight = np.asarray(weight, dtype=np.float64)
        self.bias = np.asarray(bias, dtype=np.float64)
        self.input_shape = tuple(input_shape)
        self.num_classes = self.bias.shape[0]
        self.name = name

    def forward(self, x):
        batched = x.ndim == len(self.input_shape) + 1
        return ops.dense(ops.flatten(x, batched=batched), Tensor(self.weight), Tensor(self.bias))

    def loss(self, x, y):
        return ops.softmax_cross_entropy(self.forward(x), y)

    def predict(self, images, batch_size=256):
        return np.argmax(self.forward(Tensor(images)).data, axis=-1)


class LabelPixelModel:
    """Predicts round(10 · pixel[0,0,0]): lets fixtures encode the prediction."""

    def predict(self, images, batch_size=256):
        images = np.asarray(images)
        return np.rint(images[:, 0, 0, 0] * 10).astype(np.int64)


class ConstantModel:
    def __init__(self, label=0):
        self.label = label

    def predict(self, images, batch_size=256):
        return np.full(len(images), self.label, dtype=np.int64)
