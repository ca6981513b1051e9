"""
Desk-scale MNIST runs. Set GATK_MNIST_DIR to a directory holding the four
MNIST IDX files (train-*/t10k-*, optionally gzipped) to enable them.
"""

import os
import time

import numpy as np
import pytest

from transfer_attack.attacks.engine import AttackConfig
from transfer_attack.config import ToolkitConfig
from transfer_attack.data.idx import load_idx, resolve_idx_pair
from transfer_attack.models.architectures import Classifier, model_spec
from transfer_attack.models.training import TrainConfig, train
from transfer_attack.pipeline.evaluation import transfer_matrix
from transfer_attack.pipeline.sweep import run_sweep

MNIST_DIR = os.environ.get("GATK_MNIST_DIR", "")

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(not MNIST_DIR, reason="GATK_MNIST_DIR not set"),
]

TRAIN_IMAGES = 20000
EVAL_IMAGES = 1000


def load_split(name):
    return load_idx(*resolve_idx_pair(os.path.join(MNIST_DIR, name)), num_classes=10)


def train_model(arch, dataset, name, seed=0, **kwargs):
    spec = model_spec(arch, dataset.image_shape, dataset.num_classes)
    cfg = TrainConfig(epochs=3, batch_size=64, seed=seed, **kwargs)
    return Classifier(spec, train(spec, dataset, cfg), name=name)


class TestMnistTransfer:
    @classmethod
    def setup_class(cls):
        start = time.perf_counter()
        cls.threads = ToolkitConfig().threads
        train_set = load_split("train").take(TRAIN_IMAGES)
        cls.t10k = load_split("t10k")

        cls.cnn_a = train_model("cnn-a", train_set, "cnn-a", seed=0)
        correct = np.flatnonzero(cls.cnn_a.predict(cls.t10k.images) == cls.t10k.labels)
        cls.test_set = cls.t10k.subset(correct[:EVAL_IMAGES])
        cls.cnn_b = train_model("cnn-b", train_set, "cnn-b", seed=1)
        cls.mlp_a = train_model("mlp-a", train_set, "mlp-a", seed=2)
        cls.cnn_b_adv = train_model("cnn-b", train_set, "cnn-b-adv", seed=1,
                                    adversarial_fraction=0.5, adversarial_epsilon=0.3)
        cls.training_seconds = time.perf_counter() - start

        cls.targets = {"cnn-b": cls.cnn_b, "mlp-a": cls.mlp_a, "cnn-b-adv": cls.cnn_b_adv}
        cls.mi = AttackConfig.preset("mi-fgsm", profile="mnist", seed=0)
        cls.smi = AttackConfig.preset("smi-fgrm", profile="mnist", seed=0)
        start = time.perf_counter()
        cls.mi_report = transfer_matrix({"cnn-a": cls.cnn_a}, cls.targets, cls.test_set,
                                        cls.mi, threads=cls.threads)
        cls.smi_report = transfer_matrix({"cnn-a": cls.cnn_a}, cls.targets, cls.test_set,
                                         cls.smi, threads=cls.threads)
        cls.transfer_seconds = time.perf_counter() - start

    def test_surrogate_accuracy(self):
        assert self.cnn_a.accuracy(self.t10k.images, self.t10k.labels) >= 0.95
        assert len(self.test_set) == EVAL_IMAGES

    @pytest.mark.parametrize("preset", ["i-fgsm", "i-fgrm"])
    def test_white_box_potency(self, preset):
        cfg = AttackConfig.preset(preset, profile="mnist", seed=0)
        assert (cfg.epsilon, cfg.iterations, cfg.alpha) == (0.3, 10, 0.03)
        report = transfer_matrix({"cnn-a": self.cnn_a}, {"cnn-a": self.cnn_a}, self.test_set,
                                 cfg, threads=self.threads)
        assert report.counts[0][0] == EVAL_IMAGES
        assert report.rates[0][0] >= 95.0

    @pytest.mark.parametrize("target", ["cnn-b", "mlp-a"])
    def test_sampling_and_rescale_improve_transfer(self, target):
        gain = self.smi_report.rate("cnn-a", target) - self.mi_report.rate("cnn-a", target)
        assert gain >= 5.0

    @pytest.mark.parametrize("attack", ["mi", "smi"])
    def test_adversarially_trained_target_is_harder(self, attack):
        report = self.mi_report if attack == "mi" else self.smi_report
        assert report.rate("cnn-a", "cnn-b-adv") < report.rate("cnn-a", "cnn-b")

    def test_adversarial_training_resists_fgsm(self):
        cfg = AttackConfig.preset("fgsm", profile="mnist", seed=0)
        report = transfer_matrix({"cnn-b": self.cnn_b, "cnn-b-adv": self.cnn_b_adv},
                                 {"cnn-b": self.cnn_b, "cnn-b-adv": self.cnn_b_adv},
                                 self.test_set, cfg, threads=self.threads)
        assert report.rate("cnn-b-adv", "cnn-b-adv") < report.rate("cnn-b", "cnn-b")

    @pytest.mark.parametrize("parameter,low,high", [("n", 0, 12), ("beta", 0, 1.5)])
    def test_sweep_shape(self, parameter, low, high):
        result = run_sweep(parameter, [low, high], self.smi, "cnn-a", self.cnn_a,
                           {"cnn-b": self.cnn_b, "mlp-a": self.mlp_a}, self.test_set,
                           threads=self.threads)
        for target in result.targets:
            low_rate, high_rate = result.series(target)
            assert high_rate >= low_rate + 2.0

    def test_end_to_end_budget(self):
        assert self.training_seconds + self.transfer_seconds < 30 * 60


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
