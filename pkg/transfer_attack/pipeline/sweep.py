"""
One-parameter sweeps over the sample count N, the sampling range β and the
rescale factor c, each grid point a full transfer evaluation.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from ..attacks.engine import AttackConfig
from ..attacks.sampling import SamplerConfig
from ..attacks.update_rules import RescaleParams, UpdateRule
from ..data.dataset import LabeledDataset
from ..errors import ConfigurationError
from .evaluation import Model, transfer_matrix

logger = logging.getLogger(__name__)

SWEEP_PARAMETERS = ("n", "beta", "c")


@dataclass
class SweepResult:
    parameter: str
    grid: list[float]
    targets: list[str]
    rates: list[list[float]]  # rates[grid point][target]
    surrogate: str = ""
    counts: list[int] = field(default_factory=list)
    fingerprints: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ConfigurationError(f"Unknown sweep parameter '{self.parameter}'")
        _check_grid(self.grid)
        if len(self.rates) != len(self.grid):
            raise ConfigurationError(f"{len(self.rates)} rate rows for {len(self.grid)} grid values")
        for row in self.rates:
            if len(row) != len(self.targets):
                raise ConfigurationError(f"Rate row of length {len(row)} for "
                                         f"{len(self.targets)} targets")
            if any(not (0.0 <= r <= 100.0) for r in row):
                raise ConfigurationError(f"Success rate outside [0, 100]: {row}")

    def series(self, target: str) -> list[float]:
        j = self.targets.index(target)
        return [row[j] for row in self.rates]


def _check_grid(grid: Sequence[float]):
    if len(grid) == 0:
        raise ConfigurationError("Sweep grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError(f"Sweep grid must be strictly increasing, got {list(grid)}")


def parse_grid(text: str) -> list[float]:
    """'0,4,8,12' → [0.0, 4.0, 8.0, 12.0]."""
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigurationError(f"Cannot parse grid '{text}': {e}") from e


def apply_parameter(cfg: AttackConfig, parameter: str, value: float) -> AttackConfig:
    """
    cfg with one knob set. Sweeping N or β on a config without a sampler
    switches on depth-first sampling; sweeping c switches on the rescale rule.
    """
    if parameter == "n":
        if value < 0 or value != int(value):
            raise ConfigurationError(f"N must be a non-negative integer, got {value}")
        sampler = cfg.sampler if cfg.sampler.kind != "none" else SamplerConfig.depth_first()
        return replace(cfg, sampler=replace(sampler, n=int(value)))
    if parameter == "beta":
        sampler = cfg.sampler if cfg.sampler.kind != "none" else SamplerConfig.depth_first()
        return replace(cfg, sampler=replace(sampler, beta=float(value)))
    if parameter == "c":
        return replace(cfg, rule=UpdateRule("rescale", RescaleParams(float(value))))
    raise ConfigurationError(f"Unknown sweep parameter '{parameter}' "
                             f"(expected one of {SWEEP_PARAMETERS})")


def run_sweep(parameter: str, grid: Sequence[float], cfg: AttackConfig,
              surrogate_name: str, surrogate: Model, targets: dict[str, Model],
              dataset: LabeledDataset, threads: int = 1,
              progress_callback: Optional[Callable] = None,
              index_offset: int = 0) -> SweepResult:
    parameter = parameter.lower()
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigurationError(f"Unknown sweep parameter '{parameter}' "
                                 f"(expected one of {SWEEP_PARAMETERS})")
    grid = [float(v) for v in grid]
    _check_grid(grid)

    rates, counts, fingerprints = [], [], []
    for k, value in enumerate(grid):
        point_cfg = apply_parameter(cfg, parameter, value)
        logger.info(f"Sweep {parameter} = {value:g} ({k + 1}/{len(grid)})")
        report = transfer_matrix({surrogate_name: surrogate}, targets, dataset,
                                 point_cfg, threads=threads,
                                 index_offset=index_offset)
        rates.append(report.rates[0])
        counts.append(report.counts[0][0])
        fingerprints.append(report.fingerprint)
        if progress_callback:
            progress_callback(k + 1, len(grid), f"{parameter}={value:g}")

    return SweepResult(parameter, grid, list(targets), rates, surrogate_name,
                       counts, fingerprints)


def best_value(result: SweepResult, target: str) -> float:
    """Grid value with the highest success rate on ``target`` (first on ties)."""
    return result.grid[int(np.argmax(result.series(target)))]
