"""
PNG export of clean images, adversarial examples and perturbation maps.
"""

import os
import logging

import numpy as np
from PIL import Image

from ..errors import ConfigurationError

logger = logging.getLogger(__name__)


def to_pil(image: np.ndarray) -> Image.Image:
    """C×H×W array in [0,1] → 8-bit grayscale (C=1) or RGB (C=3) image."""
    image = np.asarray(image, dtype=np.float64)
    pixels = np.round(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8)
    if pixels.shape[0] == 1:
        return Image.fromarray(pixels[0])
    if pixels.shape[0] == 3:
        return Image.fromarray(np.ascontiguousarray(pixels.transpose(1, 2, 0)))
    raise ConfigurationError(f"Cannot render {pixels.shape[0]}-channel image")


def perturbation_map(adversarial: np.ndarray, original: np.ndarray,
                     epsilon: float) -> np.ndarray:
    """Perturbation rescaled so -ε → 0, 0 → 0.5 and +ε → 1."""
    delta = np.asarray(adversarial) - np.asarray(original)
    if epsilon <= 0:
        return np.full_like(delta, 0.5)
    return np.clip(delta / (2 * epsilon) + 0.5, 0.0, 1.0)


def export_examples(originals: np.ndarray, adversarials: np.ndarray,
                    indices, out_dir: str, epsilon: float,
                    scale: int = 4) -> list[str]:
    """
    Write clean / adversarial / perturbation PNGs per example, upscaled by
    ``scale`` with nearest-neighbour so single pixels stay visible.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for index, original, adversarial in zip(indices, originals, adversarials):
        panels = {
            "clean": original,
            "adv": adversarial,
            "delta": perturbation_map(adversarial, original, epsilon),
        }
        for kind, array in panels.items():
            img = to_pil(array)
            if scale > 1:
                img = img.resize((img.width * scale, img.height * scale), Image.Resampling.NEAREST)
            path = os.path.join(out_dir, f"{int(index):06d}_{kind}.png")
            img.save(path)
            written.append(path)
    logger.info(f"Wrote {len(written)} PNG files to {out_dir}")
    return written
