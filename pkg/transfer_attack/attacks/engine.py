"""
Attack engine: FGSM / I-FGSM / MI-FGSM / NI-FGSM crossed with an update
rule (sign or rescale), a sampler (none, depth-first, Gaussian) and an
input-transformation pipeline, against a single model or a logit ensemble.

Per iteration t:
    point  = x_adv                       (NI: x_adv + α·μ·g)
    ĝ      = mean over sampled points of composite_gradient(point_i)
    g      = μ·g + ĝ/‖ĝ‖₁                (MI/NI)   or   g = ĝ
    x_adv  = clip(x_adv + α·rule(g), x, ε)
"""

import json
import hashlib
import logging
import concurrent.futures
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ..errors import ConfigurationError, DimensionError
from ..models.architectures import Classifier
from ..tensor.autograd import Tensor
from ..tensor.gradients import input_gradient
from ..tensor import ops
from .sampling import RngStream, SamplerConfig, average_gradients
from .transforms import DimConfig, SimConfig, TimConfig, TransformPipeline, composite_gradient
from .update_rules import RescaleParams, UpdateRule, clip_to_budget, l1_normalize

logger = logging.getLogger(__name__)

METHODS = ("fgsm", "ifgsm", "mifgsm", "nifgsm")
MOMENTUM_METHODS = ("mifgsm", "nifgsm")

PROFILES = {
    "imagenet": {"epsilon": 16 / 255, "alpha": 1.6 / 255},
    "mnist": {"epsilon": 0.3, "alpha": 0.03},
}

_CTM = TransformPipeline(DimConfig(), SimConfig(), TimConfig())

# name → (method, rule variant, sampler, pipeline)
PRESETS = {
    "fgsm": ("fgsm", "sign", SamplerConfig(), TransformPipeline()),
    "i-fgsm": ("ifgsm", "sign", SamplerConfig(), TransformPipeline()),
    "mi-fgsm": ("mifgsm", "sign", SamplerConfig(), TransformPipeline()),
    "ni-fgsm": ("nifgsm", "sign", SamplerConfig(), TransformPipeline()),
    "i-fgrm": ("ifgsm", "rescale", SamplerConfig(), TransformPipeline()),
    "si-fgsm": ("ifgsm", "sign", SamplerConfig.depth_first(), TransformPipeline()),
    "si-fgrm": ("ifgsm", "rescale", SamplerConfig.depth_first(), TransformPipeline()),
    "smi-fgrm": ("mifgsm", "rescale", SamplerConfig.depth_first(), TransformPipeline()),
    "sni-fgrm": ("nifgsm", "rescale", SamplerConfig.depth_first(), TransformPipeline()),
    "smi-ct-fgsm": ("mifgsm", "sign", SamplerConfig.depth_first(), _CTM),
    "sni-ct-fgsm": ("nifgsm", "sign", SamplerConfig.depth_first(), _CTM),
    "smi-ct-fgrm": ("mifgsm", "rescale", SamplerConfig.depth_first(), _CTM),
    "sni-ct-fgrm": ("nifgsm", "rescale", SamplerConfig.depth_first(), _CTM),
    "sgmi-ct-fgsm": ("mifgsm", "sign", SamplerConfig.gaussian(n=20), _CTM),
    "sgni-ct-fgsm": ("nifgsm", "sign", SamplerConfig.gaussian(n=20), _CTM),
}


# ── Gradient sources ────────────────────────────────────────────────

class GradientSource:
    """One classifier, or an ensemble attacked through its averaged logits."""

    def __init__(self, models: Union[Classifier, Sequence[Classifier]], name: str = ""):
        if isinstance(models, Classifier):
            models = [models]
        models = list(models)
        if not models:
            raise ConfigurationError("A gradient source needs at least one model")
        first = models[0]
        for m in models[1:]:
            if m.input_shape != first.input_shape or m.num_classes != first.num_classes:
                raise ConfigurationError(
                    f"Ensemble members disagree: {first.name} is {first.input_shape}→"
                    f"{first.num_classes}, {m.name} is {m.input_shape}→{m.num_classes}"
                )
        self.models = models
        self.name = name or "+".join(m.name for m in models)

    def __len__(self) -> int:
        return len(self.models)

    def __repr__(self) -> str:
        return f"GradientSource({self.name!r}, members={len(self.models)})"

    @property
    def input_shape(self) -> tuple:
        return self.models[0].input_shape

    @property
    def num_classes(self) -> int:
        return self.models[0].num_classes

    def forward(self, x: Tensor) -> Tensor:
        if len(self.models) == 1:
            return self.models[0].forward(x)
        summed = self.models[0].forward(x)
        for m in self.models[1:]:
            summed = summed + m.forward(x)
        return summed * (1.0 / len(self.models))

    def loss(self, x: Tensor, y) -> Tensor:
        return ops.softmax_cross_entropy(self.forward(x), y)

    def gradient(self, x: np.ndarray, y) -> np.ndarray:
        return input_gradient(self, x, y)

    def logits(self, images: np.ndarray) -> np.ndarray:
        return self.forward(Tensor(images)).data

    def predict(self, images: np.ndarray, batch_size: int = 256) -> np.ndarray:
        if len(self.models) == 1:
            return self.models[0].predict(images, batch_size)
        images = np.asarray(images, dtype=np.float64)
        chunks = [np.argmax(self.logits(images[i:i + batch_size]), axis=1)
                  for i in range(0, len(images), batch_size)]
        return np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)


def source_gradient(src: Union[GradientSource, Classifier], x: np.ndarray, y) -> np.ndarray:
    """∇ₓ of the cross-entropy on the (averaged) logits."""
    if isinstance(src, Classifier):
        src = GradientSource(src)
    return src.gradient(x, y)


# ── Configuration ───────────────────────────────────────────────────

@dataclass(frozen=True)
class AttackConfig:
    """Every hyperparameter of one attack; FGSM forces T = 1 and α = ε."""

    method: str = "mifgsm"
    rule: UpdateRule = field(default_factory=UpdateRule)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    pipeline: TransformPipeline = field(default_factory=TransformPipeline)
    epsilon: float = 16 / 255
    iterations: int = 10
    alpha: float = 1.6 / 255
    mu: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"Unknown method '{self.method}' (expected one of {METHODS})")
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        if self.method == "fgsm":
            object.__setattr__(self, "iterations", 1)
            object.__setattr__(self, "alpha", self.epsilon)
        if self.iterations < 1:
            raise ConfigurationError(f"iterations must be >= 1, got {self.iterations}")
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")
        if self.mu < 0:
            raise ConfigurationError(f"mu must be non-negative, got {self.mu}")

    @property
    def c(self) -> float:
        return self.rule.c

    def with_updates(self, **changes) -> "AttackConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        p = self.pipeline
        return {
            "method": self.method,
            "rule": {"variant": self.rule.variant, "c": self.rule.c},
            "sampler": {"kind": self.sampler.kind, "n": self.sampler.n,
                        "beta": self.sampler.beta, "sigma": self.sampler.sigma},
            "pipeline": {
                "dim": None if p.dim is None else {"p": p.dim.p,
                                                   "r_min_fraction": p.dim.r_min_fraction},
                "sim": None if p.sim is None else {"m": p.sim.m},
                "tim": None if p.tim is None else {"kernel_size": p.tim.kernel_size,
                                                   "kernel_sigma": p.tim.kernel_sigma},
            },
            "epsilon": self.epsilon,
            "iterations": self.iterations,
            "alpha": self.alpha,
            "mu": self.mu,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AttackConfig":
        rule = data.get("rule", {})
        sampler = data.get("sampler", {})
        pipeline = data.get("pipeline", {})
        dim, sim, tim = (pipeline.get(k) for k in ("dim", "sim", "tim"))
        return cls(
            method=data.get("method", "mifgsm"),
            rule=UpdateRule(rule.get("variant", "sign"), RescaleParams(rule.get("c", 2.0))),
            sampler=SamplerConfig(sampler.get("kind", "none"), sampler.get("n", 12),
                                  sampler.get("beta", 1.5), sampler.get("sigma")),
            pipeline=TransformPipeline(
                dim=DimConfig(**dim) if dim is not None else None,
                sim=SimConfig(**sim) if sim is not None else None,
                tim=TimConfig(**tim) if tim is not None else None,
            ),
            epsilon=data.get("epsilon", 16 / 255),
            iterations=data.get("iterations", 10),
            alpha=data.get("alpha", 1.6 / 255),
            mu=data.get("mu", 1.0),
            seed=data.get("seed", 0),
        )

    def fingerprint(self) -> str:
        """SHA-256 of the canonical JSON form."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @classmethod
    def preset(cls, name: str, profile: str = "imagenet", seed: int = 0,
               c: float = 2.0) -> "AttackConfig":
        """Named attack (e.g. 'smi-fgrm') at a budget profile ('imagenet' or 'mnist')."""
        key = name.lower()
        if key not in PRESETS:
            raise ConfigurationError(f"Unknown preset '{name}' (expected one of {sorted(PRESETS)})")
        if profile not in PROFILES:
            raise ConfigurationError(f"Unknown profile '{profile}' (expected one of {sorted(PROFILES)})")
        method, variant, sampler, pipeline = PRESETS[key]
        return cls(method=method, rule=UpdateRule(variant, RescaleParams(c)),
                   sampler=sampler, pipeline=pipeline, seed=seed, **PROFILES[profile])


# ── Attack loop ─────────────────────────────────────────────────────

@dataclass
class AttackOutcome:
    index: int
    adversarial: Optional[np.ndarray] = None
    iterations: int = 0
    linf: float = 0.0
    clipped_fractions: list[float] = field(default_factory=list)
    degenerate_steps: int = 0
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.adversarial is not None and not self.error


def sampled_gradient(src: GradientSource, point: np.ndarray, y: int, cfg: AttackConfig,
                     stream: RngStream,
                     executor: Optional[concurrent.futures.Executor] = None) -> np.ndarray:
    """Sampler around ``point``; each sample gets its own transform draws."""
    points = cfg.sampler.sample_points(point, cfg.epsilon, stream)

    def grad_at(i: int, p: np.ndarray) -> np.ndarray:
        return composite_gradient(src, p, y, cfg.pipeline, stream.sample_generator(i))

    return average_gradients(grad_at, points, executor)


def attack_with_trace(src: Union[GradientSource, Classifier], x: np.ndarray, y: int,
                      cfg: AttackConfig, image_index: int = 0,
                      executor: Optional[concurrent.futures.Executor] = None) -> AttackOutcome:
    if isinstance(src, Classifier):
        src = GradientSource(src)
    x = np.asarray(x, dtype=np.float64)
    if tuple(x.shape) != tuple(src.input_shape):
        raise DimensionError(f"Image shape {x.shape} does not match {src.name} "
                             f"input {src.input_shape}")

    x_adv = x.copy()
    g = np.zeros_like(x)
    outcome = AttackOutcome(index=image_index)
    momentum = cfg.method in MOMENTUM_METHODS

    for t in range(cfg.iterations):
        stream = RngStream(cfg.seed, image_index, t)
        point = x_adv + cfg.alpha * cfg.mu * g if cfg.method == "nifgsm" else x_adv

        g_hat = sampled_gradient(src, point, y, cfg, stream, executor)
        if not np.any(g_hat):
            outcome.degenerate_steps += 1
        g = cfg.mu * g + l1_normalize(g_hat) if momentum else g_hat

        stepped = x_adv + cfg.alpha * cfg.rule.apply(g)
        x_adv = clip_to_budget(stepped, x, cfg.epsilon)
        outcome.clipped_fractions.append(float(np.mean(x_adv != stepped)))
        outcome.iterations = t + 1

    if outcome.degenerate_steps == cfg.iterations:
        logger.warning(f"Image {image_index}: gradient was zero at every iteration; "
                       f"returning the original image")
        x_adv = x.copy()

    outcome.adversarial = x_adv
    outcome.linf = float(np.max(np.abs(x_adv - x))) if x.size else 0.0
    return outcome


def run_attack(src: Union[GradientSource, Classifier], x: np.ndarray, y: int,
               cfg: AttackConfig, image_index: int = 0,
               executor: Optional[concurrent.futures.Executor] = None) -> np.ndarray:
    """Craft one adversarial example; ‖x_adv − x‖_∞ ≤ ε and x_adv ∈ [0,1]."""
    return attack_with_trace(src, x, y, cfg, image_index, executor).adversarial


def attack_batch(src: Union[GradientSource, Classifier], images: np.ndarray,
                 labels: Sequence[int], cfg: AttackConfig,
                 indices: Optional[Sequence[int]] = None, threads: int = 1,
                 progress_callback: Optional[Callable] = None) -> list[AttackOutcome]:
    """
    Attack every image. ``indices`` are the dataset positions that key each
    image's random stream (default 0..n-1). Results come back in input order;
    a failing image is logged and recorded, the rest continue.
    """
    if isinstance(src, Classifier):
        src = GradientSource(src)
    images = np.asarray(images, dtype=np.float64)
    labels = [int(v) for v in labels]
    if len(images) != len(labels):
        raise ConfigurationError(f"{len(images)} images but {len(labels)} labels")
    indices = list(range(len(images))) if indices is None else [int(i) for i in indices]
    if len(indices) != len(images):
        raise ConfigurationError(f"{len(indices)} indices for {len(images)} images")

    total = len(images)
    results: list[Optional[AttackOutcome]] = [None] * total

    def attack_one(pos: int) -> AttackOutcome:
        try:
            return attack_with_trace(src, images[pos], labels[pos], cfg, indices[pos])
        except Exception as e:
            logger.error(f"Attack failed for image {indices[pos]}: {e}")
            return AttackOutcome(index=indices[pos], error=str(e))

    if threads <= 1 or total <= 1:
        for pos in range(total):
            results[pos] = attack_one(pos)
            if progress_callback:
                progress_callback(pos + 1, total, f"image {indices[pos]}")
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(attack_one, pos): pos for pos in range(total)}
            for done, future in enumerate(concurrent.futures.as_completed(futures), 1):
                pos = futures[future]
                results[pos] = future.result()
                if progress_callback:
                    progress_callback(done, total, f"image {indices[pos]}")

    failed = sum(1 for r in results if not r.ok)
    if failed:
        logger.warning(f"{failed}/{total} images failed to attack")
    return results
