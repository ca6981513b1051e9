"""
Configuration for the transfer attack toolkit.
"""

import os
import configparser
from dataclasses import dataclass

from .errors import ConfigurationError


@dataclass
class ToolkitConfig:
    """Paths, parallelism and default hyperparameters for every subcommand."""

    # Local directories
    data_dir: str = "./data"
    output_dir: str = "./data/runs"
    weights_dir: str = ""  # derived
    adversarial_dir: str = ""  # derived
    ledger_path: str = ""  # derived

    # Attack defaults (pixel scale [0,1])
    epsilon: float = 16 / 255
    iterations: int = 10
    alpha: float = 1.6 / 255
    mu: float = 1.0
    rescale_c: float = 2.0

    # Sampling defaults
    sample_count: int = 12
    beta: float = 1.5
    gaussian_sigma: float = 0.0  # 0 means beta * epsilon / sqrt(3)

    # Transform defaults
    dim_probability: float = 0.5
    dim_min_fraction: float = 0.9
    sim_copies: int = 5
    tim_kernel_size: int = 7

    # Training defaults
    epochs: int = 3
    batch_size: int = 64
    learning_rate: float = 0.05
    momentum: float = 0.9
    adversarial_fraction: float = 0.0

    # Synthetic corpus
    synthetic_per_class: int = 100
    synthetic_classes: int = 4
    synthetic_size: int = 16

    # Evaluation
    eval_limit: int = 1000

    # Parallelism (0 = read GATK_THREADS, else logical cores)
    threads: int = 0

    def __post_init__(self):
        if not self.weights_dir:
            self.weights_dir = os.path.join(self.output_dir, "weights")
        if not self.adversarial_dir:
            self.adversarial_dir = os.path.join(self.output_dir, "adversarial")
        if not self.ledger_path:
            self.ledger_path = os.path.join(self.output_dir, "ledger.db")
        if not self.threads:
            env = os.environ.get("GATK_THREADS", "")
            try:
                self.threads = int(env) if env.strip() else (os.cpu_count() or 1)
            except ValueError as e:
                raise ConfigurationError(f"GATK_THREADS must be an integer, got '{env}'") from e
        self.threads = max(1, self.threads)

    def ensure_directories(self):
        """Create all required output directories."""
        for d in [
            self.output_dir,
            self.weights_dir,
            self.adversarial_dir,
            os.path.dirname(self.ledger_path),
        ]:
            if d:
                os.makedirs(d, exist_ok=True)

    @classmethod
    def from_ini(cls, ini_path: str) -> "ToolkitConfig":
        """Load configuration from an INI file."""
        config = configparser.ConfigParser()
        config.read(ini_path)
        base_dir = os.path.dirname(os.path.abspath(ini_path))

        def resolve(path: str) -> str:
            if path.startswith("./") or path.startswith("../"):
                return os.path.normpath(os.path.join(base_dir, path))
            return path

        kwargs = {}

        if config.has_section("Local"):
            section = config["Local"]
            for key in ("data_dir", "output_dir", "weights_dir",
                        "adversarial_dir", "ledger_path"):
                if key in section:
                    kwargs[key] = resolve(section[key])

        typed_sections = {
            "Attack": {"epsilon": float, "iterations": int, "alpha": float,
                       "mu": float, "rescale_c": float},
            "Sampling": {"sample_count": int, "beta": float,
                         "gaussian_sigma": float},
            "Transforms": {"dim_probability": float, "dim_min_fraction": float,
                           "sim_copies": int, "tim_kernel_size": int},
            "Training": {"epochs": int, "batch_size": int,
                         "learning_rate": float, "momentum": float,
                         "adversarial_fraction": float},
            "Synthetic": {"synthetic_per_class": int, "synthetic_classes": int,
                          "synthetic_size": int},
            "Parallel": {"threads": int, "eval_limit": int},
        }
        for name, fields in typed_sections.items():
            if not config.has_section(name):
                continue
            section = config[name]
            for key, cast in fields.items():
                if key not in section:
                    continue
                try:
                    kwargs[key] = cast(section[key])
                except ValueError as e:
                    raise ConfigurationError(
                        f"{ini_path}: [{name}] {key} = '{section[key]}' is not a valid {cast.__name__}"
                    ) from e

        return cls(**kwargs)
