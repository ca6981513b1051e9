"""
Mini-batch SGD with momentum on softmax cross-entropy, with optional
adversarial training: a fraction q of every batch is replaced by one-step
sign-gradient adversarial versions computed against the current weights.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..data.dataset import LabeledDataset
from ..errors import ConfigurationError, DimensionError, NumericalError
from ..tensor.autograd import Tensor
from ..tensor import ops
from .architectures import Classifier, ModelSpec, Weights, init_model

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 3
    batch_size: int = 64
    learning_rate: float = 0.05
    momentum: float = 0.9
    seed: int = 0
    adversarial_fraction: float = 0.0
    adversarial_epsilon: float = 0.2

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigurationError(f"learning rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(f"momentum must be in [0,1), got {self.momentum}")
        if not 0.0 <= self.adversarial_fraction <= 1.0:
            raise ConfigurationError(
                f"adversarial_fraction must be in [0,1], got {self.adversarial_fraction}"
            )


def fgsm_batch(model: Classifier, images: np.ndarray, labels: np.ndarray,
               epsilon: float) -> np.ndarray:
    """One sign step of size epsilon on a whole batch, clamped to [0,1]."""
    x = Tensor(images, requires_grad=True)
    ops.softmax_cross_entropy(model.forward(x), labels).backward()
    return np.clip(images + epsilon * np.sign(x.grad), 0.0, 1.0)


def train(spec: ModelSpec, dataset: LabeledDataset, cfg: TrainConfig,
          progress_callback: Optional[Callable] = None,
          history: Optional[list] = None) -> Weights:
    """
    Train a fresh model of ``spec`` on ``dataset``. Deterministic for a given
    (spec, dataset order, cfg). When ``history`` is a list, one dict per epoch
    (loss, accuracy) is appended to it.
    """
    if len(dataset) == 0:
        raise ConfigurationError("Cannot train on an empty dataset")
    if dataset.image_shape != spec.input_shape:
        raise DimensionError(f"Dataset images {dataset.image_shape} do not match "
                             f"{spec.arch} input {spec.input_shape}")
    if dataset.num_classes != spec.num_classes:
        raise ConfigurationError(f"Dataset has {dataset.num_classes} classes, "
                                 f"{spec.arch} outputs {spec.num_classes}")

    rng = np.random.default_rng(cfg.seed)
    weights = init_model(spec, seed=cfg.seed)
    velocity = {k: np.zeros_like(v) for k, v in weights.items()}
    n = len(dataset)
    batches_per_epoch = (n + cfg.batch_size - 1) // cfg.batch_size

    logger.info(f"Training {spec.arch} on {n} images for {cfg.epochs} epochs "
                f"(batch {cfg.batch_size}, lr {cfg.learning_rate}, "
                f"adversarial fraction {cfg.adversarial_fraction})")

    batch_index = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        correct = 0

        for b in range(batches_per_epoch):
            idx = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            images = dataset.images[idx]
            labels = dataset.labels[idx]
            model = Classifier(spec, weights)

            n_adv = int(round(cfg.adversarial_fraction * len(idx)))
            if n_adv:
                chosen = rng.choice(len(idx), size=n_adv, replace=False)
                images = images.copy()
                images[chosen] = fgsm_batch(model, images[chosen], labels[chosen],
                                            cfg.adversarial_epsilon)

            params = model.parameters()
            try:
                logits = model.forward(Tensor(images), params=params)
                loss = ops.softmax_cross_entropy(logits, labels)
                loss.backward()
            except NumericalError as e:
                raise NumericalError(f"Training diverged at batch {batch_index} "
                                     f"(epoch {epoch + 1}): {e}") from e

            for name, p in params.items():
                velocity[name] = cfg.momentum * velocity[name] - cfg.learning_rate * p.grad
                weights[name] = weights[name] + velocity[name]
                if not np.all(np.isfinite(weights[name])):
                    raise NumericalError(f"Non-finite weights after batch {batch_index} "
                                         f"(epoch {epoch + 1}, tensor {name})")

            epoch_loss += loss.item() * len(idx)
            correct += int(np.sum(np.argmax(logits.data, axis=1) == labels))
            batch_index += 1

            if progress_callback:
                progress_callback(b + 1, batches_per_epoch, f"epoch {epoch + 1}")

        mean_loss = epoch_loss / n
        accuracy = correct / n
        logger.info(f"Epoch {epoch + 1}/{cfg.epochs}: loss {mean_loss:.4f}, "
                    f"train accuracy {accuracy:.1%}")
        if history is not None:
            history.append({"epoch": epoch + 1, "loss": mean_loss, "accuracy": accuracy})

    return weights


def train_classifier(spec: ModelSpec, dataset: LabeledDataset, cfg: TrainConfig,
                     name: str = "", **kwargs) -> Classifier:
    return Classifier(spec, train(spec, dataset, cfg, **kwargs), name=name)
