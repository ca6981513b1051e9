"""
Transfer-success measurement.

An image is eligible for a surrogate row when the surrogate classifies it
correctly before the attack. A target is fooled by an eligible image when
its argmax on the adversarial version differs from the true label.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from ..attacks.engine import AttackConfig, GradientSource, attack_batch
from ..data.dataset import LabeledDataset
from ..errors import ConfigurationError, NoEligibleSamplesError
from ..models.architectures import Classifier

logger = logging.getLogger(__name__)

Model = Union[Classifier, GradientSource]


def eligibility_mask(surrogate: Model, originals: np.ndarray, labels) -> np.ndarray:
    """True where the surrogate already gets the clean image right."""
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        return np.zeros(0, dtype=bool)
    return surrogate.predict(np.asarray(originals, dtype=np.float64)) == labels


def success_rate(target: Model, originals: np.ndarray, adversarials: np.ndarray,
                 labels, mask) -> float:
    """Percentage of masked images whose adversarial version the target mislabels."""
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    if not (len(originals) == len(adversarials) == len(labels) == len(mask)):
        raise ConfigurationError(
            f"Misaligned inputs: {len(originals)} originals, {len(adversarials)} "
            f"adversarials, {len(labels)} labels, {len(mask)} mask entries"
        )
    eligible = int(mask.sum())
    if eligible == 0:
        raise NoEligibleSamplesError("No eligible samples: the surrogate misclassifies "
                                     "every clean image in the evaluation set")
    predictions = target.predict(np.asarray(adversarials, dtype=np.float64)[mask])
    fooled = int(np.sum(predictions != labels[mask]))
    return 100.0 * fooled / eligible


@dataclass
class TransferReport:
    """Surrogate × target success rates (percent) with per-cell sample counts."""

    surrogates: list[str]
    targets: list[str]
    rates: list[list[float]]
    counts: list[list[int]]
    fingerprint: str = ""
    metadata: dict = field(default_factory=dict)
    white_box: list[list[bool]] = field(init=False)

    def __post_init__(self):
        if len(self.rates) != len(self.surrogates) or len(self.counts) != len(self.surrogates):
            raise ConfigurationError(f"{len(self.surrogates)} surrogates but "
                                     f"{len(self.rates)} rate rows")
        for row, counts in zip(self.rates, self.counts):
            if len(row) != len(self.targets) or len(counts) != len(self.targets):
                raise ConfigurationError(f"Rate row of length {len(row)} for "
                                         f"{len(self.targets)} targets")
            for rate in row:
                if not (np.isfinite(rate) and 0.0 <= rate <= 100.0):
                    raise ConfigurationError(f"Success rate {rate} outside [0, 100]")
        self.white_box = [[s == t for t in self.targets] for s in self.surrogates]

    def rate(self, surrogate: str, target: str) -> float:
        return self.rates[self.surrogates.index(surrogate)][self.targets.index(target)]

    def cells(self):
        """Yield (surrogate, target, rate, n, white_box) in row-major order."""
        for i, s in enumerate(self.surrogates):
            for j, t in enumerate(self.targets):
                yield s, t, self.rates[i][j], self.counts[i][j], self.white_box[i][j]

    def to_dict(self) -> dict:
        return {
            "surrogates": self.surrogates,
            "targets": self.targets,
            "rates": self.rates,
            "counts": self.counts,
            "white_box": self.white_box,
            "fingerprint": self.fingerprint,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "TransferReport":
        return cls(
            surrogates=list(data["surrogates"]),
            targets=list(data["targets"]),
            rates=[list(map(float, r)) for r in data["rates"]],
            counts=[list(map(int, r)) for r in data["counts"]],
            fingerprint=data.get("fingerprint", ""),
            metadata=dict(data.get("metadata", {})),
        )


def evaluate_row(targets: dict[str, Model], originals: np.ndarray,
                 adversarials: np.ndarray, labels, mask) -> tuple[list[float], list[int]]:
    """One report row: a success rate and an eligible count per target."""
    mask = np.asarray(mask, dtype=bool)
    rates = [success_rate(t, originals, adversarials, labels, mask) for t in targets.values()]
    return rates, [int(mask.sum())] * len(targets)


def transfer_matrix(surrogates: dict[str, Model], targets: dict[str, Model],
                    dataset: LabeledDataset, cfg: AttackConfig, threads: int = 1,
                    progress_callback: Optional[Callable] = None,
                    index_offset: int = 0) -> TransferReport:
    """
    Craft adversarials once per surrogate (on its eligible images only) and
    score them against every target. Deterministic for a fixed cfg.seed.
    Image i draws from the random stream of dataset index index_offset + i.
    """
    if not surrogates or not targets:
        raise ConfigurationError("transfer_matrix needs at least one surrogate and one target")
    if len(dataset) == 0:
        raise ConfigurationError("transfer_matrix needs a nonempty dataset")

    rate_rows, count_rows = [], []
    for name, surrogate in surrogates.items():
        mask = eligibility_mask(surrogate, dataset.images, dataset.labels)
        eligible = np.flatnonzero(mask)
        logger.info(f"Surrogate {name}: {len(eligible)}/{len(dataset)} eligible images")
        if len(eligible) == 0:
            raise NoEligibleSamplesError(f"Surrogate {name} classifies no image correctly")

        outcomes = attack_batch(surrogate, dataset.images[eligible], dataset.labels[eligible],
                                cfg, indices=eligible + index_offset, threads=threads,
                                progress_callback=progress_callback)
        adversarials = dataset.images.copy()
        row_mask = mask.copy()
        for pos, outcome in zip(eligible, outcomes):
            if outcome.ok:
                adversarials[pos] = outcome.adversarial
            else:
                row_mask[pos] = False

        rates, counts = evaluate_row(targets, dataset.images, adversarials,
                                     dataset.labels, row_mask)
        for target_name, rate in zip(targets, rates):
            marker = " (white-box)" if target_name == name else ""
            logger.info(f"  {name} → {target_name}{marker}: {rate:.1f}%")
        rate_rows.append(rates)
        count_rows.append(counts)

    return TransferReport(
        surrogates=list(surrogates),
        targets=list(targets),
        rates=rate_rows,
        counts=count_rows,
        fingerprint=cfg.fingerprint(),
        metadata={"config": cfg.to_dict(), "images": len(dataset)},
    )
