"""
Desk-scale classifiers.

    mlp-a: flatten → dense(256) → relu → dense(K)
    cnn-a: conv(8, 3×3, same) → relu → avgpool2 → conv(16, 3×3, same)
           → relu → avgpool2 → flatten → dense(K)
    cnn-b: conv(6, 5×5, same) → relu → avgpool2 → flatten → dense(64)
           → relu → dense(K)

Parameters are named "<arch>.<layer>.weight|bias", which lets a weight file
describe its own architecture (see ``infer_spec``).
"""

import math
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ConfigurationError, DimensionError, ShapeError
from ..tensor.autograd import Tensor
from ..tensor import ops

logger = logging.getLogger(__name__)

ARCHITECTURES = ("mlp-a", "cnn-a", "cnn-b")

Weights = dict[str, np.ndarray]


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # conv | relu | avgpool2 | flatten | dense
    name: str = ""
    units: int = 0
    kernel: int = 0


_LAYOUTS = {
    "mlp-a": (
        LayerSpec("flatten"),
        LayerSpec("dense", "dense1", 256),
        LayerSpec("relu"),
        LayerSpec("dense", "dense2"),
    ),
    "cnn-a": (
        LayerSpec("conv", "conv1", 8, 3),
        LayerSpec("relu"),
        LayerSpec("avgpool2"),
        LayerSpec("conv", "conv2", 16, 3),
        LayerSpec("relu"),
        LayerSpec("avgpool2"),
        LayerSpec("flatten"),
        LayerSpec("dense", "dense1"),
    ),
    "cnn-b": (
        LayerSpec("conv", "conv1", 6, 5),
        LayerSpec("relu"),
        LayerSpec("avgpool2"),
        LayerSpec("flatten"),
        LayerSpec("dense", "dense1", 64),
        LayerSpec("relu"),
        LayerSpec("dense", "dense2"),
    ),
}


@dataclass(frozen=True)
class ModelSpec:
    arch: str
    input_shape: tuple
    num_classes: int
    layers: tuple

    def parameter_shapes(self) -> dict[str, tuple]:
        """Ordered parameter name → shape, validating the layer stack."""
        shapes: dict[str, tuple] = {}
        c, h, w = self.input_shape
        flat: Optional[int] = None
        for layer in self.layers:
            if layer.kind == "conv":
                key = f"{self.arch}.{layer.name}"
                shapes[f"{key}.weight"] = (layer.units, c, layer.kernel, layer.kernel)
                shapes[f"{key}.bias"] = (layer.units,)
                c = layer.units
            elif layer.kind == "avgpool2":
                if h % 2 or w % 2:
                    raise ConfigurationError(
                        f"{self.arch} cannot pool odd spatial size {h}×{w}"
                    )
                h, w = h // 2, w // 2
            elif layer.kind == "flatten":
                flat = c * h * w
            elif layer.kind == "dense":
                units = layer.units or self.num_classes
                key = f"{self.arch}.{layer.name}"
                shapes[f"{key}.weight"] = (flat, units)
                shapes[f"{key}.bias"] = (units,)
                flat = units
        return shapes


def model_spec(arch: str, input_shape: tuple = (1, 28, 28),
               num_classes: int = 10) -> ModelSpec:
    arch = arch.lower()
    if arch not in _LAYOUTS:
        raise ConfigurationError(f"Unknown architecture '{arch}' (expected one of {ARCHITECTURES})")
    if len(input_shape) != 3:
        raise ConfigurationError(f"Input shape must be C×H×W, got {input_shape}")
    if num_classes < 2:
        raise ConfigurationError(f"Need at least 2 classes, got {num_classes}")
    spec = ModelSpec(arch, tuple(int(d) for d in input_shape), int(num_classes), _LAYOUTS[arch])
    spec.parameter_shapes()
    return spec


def init_model(spec: ModelSpec, seed: int = 0) -> Weights:
    """Glorot-uniform weights, zero biases; deterministic per (spec, seed)."""
    rng = np.random.default_rng(seed)
    weights: Weights = {}
    for name, shape in spec.parameter_shapes().items():
        if name.endswith(".bias"):
            weights[name] = np.zeros(shape)
            continue
        if len(shape) == 4:
            receptive = shape[2] * shape[3]
            fan_in, fan_out = shape[1] * receptive, shape[0] * receptive
        else:
            fan_in, fan_out = shape
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights[name] = rng.uniform(-bound, bound, size=shape)
    return weights


def infer_spec(weights: Weights) -> ModelSpec:
    """Recover the ModelSpec from parameter names and shapes."""
    if not weights:
        raise ShapeError("Empty weight set")
    arch = next(iter(weights)).split(".", 1)[0]
    if arch not in _LAYOUTS:
        raise ShapeError(f"Unrecognized architecture prefix '{arch}'")
    last_bias = [v for k, v in weights.items() if k.endswith(".bias")][-1]
    num_classes = int(last_bias.shape[0])
    first = next(iter(weights.values()))
    channel_options = (first.shape[1],) if first.ndim == 4 else (1, 3)
    actual = {k: tuple(v.shape) for k, v in weights.items()}

    for channels in channel_options:
        for size in range(1, 1025):
            try:
                spec = model_spec(arch, (channels, size, size), num_classes)
            except ConfigurationError:
                continue
            if spec.parameter_shapes() == actual:
                return spec
    raise ShapeError(f"Weights do not match any {arch} input size")


class Classifier:
    """A ModelSpec plus its weights, evaluated on the autograd tape."""

    def __init__(self, spec: ModelSpec, weights: Weights, name: str = ""):
        expected = spec.parameter_shapes()
        if list(expected) != list(weights):
            raise ShapeError(f"{spec.arch} expects parameters {list(expected)}, "
                             f"got {list(weights)}")
        for key, shape in expected.items():
            if tuple(weights[key].shape) != shape:
                raise ShapeError(f"{key}: expected shape {shape}, got {weights[key].shape}")
        self.spec = spec
        self.weights = weights
        self.name = name or spec.arch

    @property
    def input_shape(self) -> tuple:
        return self.spec.input_shape

    @property
    def num_classes(self) -> int:
        return self.spec.num_classes

    def __repr__(self) -> str:
        return f"Classifier({self.name!r}, arch={self.spec.arch}, input={self.input_shape})"

    def parameters(self) -> dict[str, Tensor]:
        """Fresh leaf tensors over the weights, for training."""
        return {k: Tensor(v, requires_grad=True) for k, v in self.weights.items()}

    def forward(self, x: Tensor, params: Optional[dict[str, Tensor]] = None,
                preactivations: Optional[list] = None) -> Tensor:
        """Logits for one C×H×W image (K) or a batch N×C×H×W (N×K)."""
        batched = x.ndim == 4
        shape = tuple(x.shape[1:] if batched else x.shape)
        if shape != self.input_shape:
            raise DimensionError(f"{self.name} expects input {self.input_shape}, got {x.shape}")
        if params is None:
            params = {k: Tensor(v) for k, v in self.weights.items()}

        out = x
        for layer in self.spec.layers:
            key = f"{self.spec.arch}.{layer.name}"
            if layer.kind == "conv":
                out = ops.conv2d(out, params[f"{key}.weight"], padding="same")
                out = ops.add_channel_bias(out, params[f"{key}.bias"])
            elif layer.kind == "relu":
                if preactivations is not None:
                    preactivations.append(out.data)
                out = ops.relu(out)
            elif layer.kind == "avgpool2":
                out = ops.avgpool2(out)
            elif layer.kind == "flatten":
                out = ops.flatten(out, batched=batched)
            elif layer.kind == "dense":
                out = ops.dense(out, params[f"{key}.weight"], params[f"{key}.bias"])
        return out

    def loss(self, x: Tensor, y) -> Tensor:
        return ops.softmax_cross_entropy(self.forward(x), y)

    def logits(self, images: np.ndarray) -> np.ndarray:
        return self.forward(Tensor(images)).data

    def predict_proba(self, images: np.ndarray) -> np.ndarray:
        return ops.softmax(self.logits(images))

    def predict(self, images: np.ndarray, batch_size: int = 256) -> np.ndarray:
        """Argmax labels for an N×C×H×W batch (evaluated in chunks)."""
        images = np.asarray(images, dtype=np.float64)
        if images.ndim == 3:
            return np.asarray([int(np.argmax(self.logits(images)))])
        chunks = [np.argmax(self.logits(images[i:i + batch_size]), axis=1)
                  for i in range(0, len(images), batch_size)]
        return np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)

    def accuracy(self, images: np.ndarray, labels: np.ndarray) -> float:
        if len(labels) == 0:
            return 0.0
        return float(np.mean(self.predict(images) == np.asarray(labels)))

    def relu_margin(self, x: np.ndarray) -> float:
        """Smallest |pre-activation| feeding any ReLU (distance to a kink)."""
        pre: list[np.ndarray] = []
        self.forward(Tensor(x), preactivations=pre)
        return float(min(np.abs(p).min() for p in pre)) if pre else math.inf
