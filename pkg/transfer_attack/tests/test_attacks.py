"""Tests for the attack engine: methods, rules, samplers, pipelines and ensembles."""

import itertools
import concurrent.futures

import numpy as np
import pytest

from transfer_attack.attacks.engine import (
    METHODS,
    PRESETS,
    AttackConfig,
    GradientSource,
    attack_batch,
    attack_with_trace,
    run_attack,
    source_gradient,
)
from transfer_attack.attacks.sampling import SAMPLER_KINDS, SamplerConfig
from transfer_attack.attacks.transforms import DimConfig, SimConfig, TimConfig, TransformPipeline
from transfer_attack.attacks.update_rules import UPDATE_RULES, UpdateRule, clip_to_budget
from transfer_attack.errors import ConfigurationError, DimensionError
from transfer_attack.models.architectures import Classifier
from transfer_attack.tensor.autograd import Tensor
from transfer_attack.tensor.gradients import input_gradient
from transfer_attack.tests.helpers import LinearModel, random_classifier, tiny_dataset

EPS = 0.1
ALPHA = 0.02


def config(**kwargs):
    base = dict(method="ifgsm", epsilon=EPS, iterations=4, alpha=ALPHA, seed=11)
    base.update(kwargs)
    return AttackConfig(**base)


class TestSingleStep:
    def setup_method(self):
        self.model = random_classifier("cnn-a", seed=2)
        self.x = np.random.default_rng(0).uniform(size=(1, 8, 8))

    def test_fgsm_closed_form(self):
        cfg = config(method="fgsm", iterations=7, alpha=0.5)
        assert (cfg.iterations, cfg.alpha) == (1, EPS)
        expected = clip_to_budget(self.x + EPS * np.sign(input_gradient(self.model, self.x, 1)),
                                  self.x, EPS)
        np.testing.assert_array_equal(run_attack(self.model, self.x, 1, cfg), expected)

    def test_source_gradient_wraps_classifier(self):
        np.testing.assert_array_equal(source_gradient(self.model, self.x, 2),
                                      input_gradient(self.model, self.x, 2))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            run_attack(self.model, np.zeros((1, 6, 6)), 0, config())


class TestReductionLattice:
    """Neutral settings collapse onto simpler attacks bit-exactly."""

    def setup_method(self):
        self.model = random_classifier("mlp-a", seed=4)
        self.x = np.random.default_rng(1).uniform(size=(1, 8, 8))

    def attack(self, cfg, src=None):
        return run_attack(self.model if src is None else src, self.x, 2, cfg, image_index=3)

    @pytest.mark.parametrize("method", ["mifgsm", "nifgsm"])
    def test_zero_momentum_is_iterative_fgsm(self, method):
        np.testing.assert_array_equal(self.attack(config(method=method, mu=0.0)),
                                      self.attack(config()))

    @pytest.mark.parametrize("sampler", [
        SamplerConfig.depth_first(n=0),
        SamplerConfig.depth_first(n=12, beta=0.0),
        SamplerConfig.gaussian(n=0),
        SamplerConfig.gaussian(n=20, sigma=0.0),
    ])
    @pytest.mark.parametrize("pipeline", [TransformPipeline(),
                                          TransformPipeline(DimConfig(), SimConfig(2), TimConfig(3))])
    def test_collapsed_sampler_is_no_sampler(self, sampler, pipeline):
        cfg = config(method="mifgsm", pipeline=pipeline)
        np.testing.assert_array_equal(self.attack(cfg.with_updates(sampler=sampler)),
                                      self.attack(cfg))

    @pytest.mark.parametrize("pipeline", [
        TransformPipeline(dim=DimConfig(p=0.0)),
        TransformPipeline(sim=SimConfig(1)),
        TransformPipeline(tim=TimConfig(1)),
    ])
    def test_neutral_transforms(self, pipeline):
        np.testing.assert_array_equal(self.attack(config(pipeline=pipeline)),
                                      self.attack(config()))

    def test_single_model_ensemble(self):
        cfg = config(method="mifgsm", sampler=SamplerConfig.depth_first(n=3))
        np.testing.assert_array_equal(self.attack(cfg, GradientSource([self.model])),
                                      self.attack(cfg))

    def test_identical_pair_ensemble(self):
        twin = Classifier(self.model.spec, dict(self.model.weights), name="twin")
        cfg = config(method="nifgsm", rule=UpdateRule.rescale_rule())
        np.testing.assert_array_equal(self.attack(cfg, GradientSource([self.model, twin])),
                                      self.attack(cfg))


class TestEnsembles:
    def test_linear_closed_form(self):
        rng = np.random.default_rng(2)
        w1, w2 = rng.normal(size=(16, 3)), rng.normal(size=(16, 3))
        b1, b2 = rng.normal(size=3), rng.normal(size=3)
        shape = (1, 4, 4)
        ensemble = GradientSource([LinearModel(w1, b1, shape, "a"), LinearModel(w2, b2, shape, "b")])
        averaged = LinearModel((w1 + w2) / 2, (b1 + b2) / 2, shape)
        x = rng.uniform(size=shape)
        np.testing.assert_allclose(ensemble.gradient(x, 1), input_gradient(averaged, x, 1),
                                   rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(ensemble.logits(x), averaged.forward(Tensor(x)).data, rtol=1e-12)

    def test_mismatched_members(self):
        with pytest.raises(ConfigurationError):
            GradientSource([random_classifier(classes=3), random_classifier(classes=4)])
        with pytest.raises(ConfigurationError):
            GradientSource([random_classifier(shape=(1, 8, 8)), random_classifier(shape=(1, 4, 4))])
        with pytest.raises(ConfigurationError):
            GradientSource([])

    def test_ensemble_prediction(self):
        a, b = random_classifier("mlp-a", seed=0), random_classifier("cnn-b", seed=1)
        source = GradientSource([a, b])
        x = np.random.default_rng(3).uniform(size=(5, 1, 8, 8))
        expected = np.argmax((a.logits(x) + b.logits(x)) / 2, axis=1)
        np.testing.assert_array_equal(source.predict(x, batch_size=2), expected)
        assert source.name == "mlp-a-0+cnn-b-1"
        assert len(source) == 2


class TestBudget:
    def test_every_combination_stays_in_budget(self):
        data = tiny_dataset(n_per_class=14)
        model = random_classifier("mlp-a", seed=5)
        samplers = {"none": SamplerConfig(),
                    "dfs": SamplerConfig.depth_first(n=3),
                    "gaussian": SamplerConfig.gaussian(n=3)}
        checked = 0
        for method, rule, kind in itertools.product(METHODS, UPDATE_RULES, SAMPLER_KINDS):
            cfg = config(method=method, rule=UpdateRule(rule), sampler=samplers[kind],
                         iterations=3, alpha=0.06)
            for outcome in attack_batch(model, data.images, data.labels, cfg):
                assert outcome.ok
                original = data.images[outcome.index]
                assert np.max(np.abs(outcome.adversarial - original)) <= EPS + 1e-9
                assert outcome.adversarial.min() >= 0.0 and outcome.adversarial.max() <= 1.0
                assert outcome.linf <= EPS + 1e-9
                checked += 1
        assert checked >= 1000


class TestAttackBatch:
    def setup_method(self):
        self.data = tiny_dataset(n_per_class=4)
        self.model = random_classifier("cnn-b", seed=6)
        self.cfg = config(method="mifgsm", sampler=SamplerConfig.depth_first(n=2),
                          pipeline=TransformPipeline(dim=DimConfig()))

    def test_deterministic(self):
        a = attack_batch(self.model, self.data.images, self.data.labels, self.cfg)
        b = attack_batch(self.model, self.data.images, self.data.labels, self.cfg)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.adversarial, y.adversarial)

    def test_parallel_equals_serial(self):
        serial = attack_batch(self.model, self.data.images, self.data.labels, self.cfg)
        parallel = attack_batch(self.model, self.data.images, self.data.labels, self.cfg, threads=4)
        assert [o.index for o in parallel] == list(range(len(self.data)))
        for x, y in zip(serial, parallel):
            np.testing.assert_array_equal(x.adversarial, y.adversarial)

    def test_indices_key_the_streams(self):
        outcomes = attack_batch(self.model, self.data.images[:2], self.data.labels[:2], self.cfg,
                                indices=[5, 6])
        single = run_attack(self.model, self.data.images[1], int(self.data.labels[1]), self.cfg,
                            image_index=6)
        assert [o.index for o in outcomes] == [5, 6]
        np.testing.assert_array_equal(outcomes[1].adversarial, single)

    def test_seed_changes_result(self):
        a = attack_batch(self.model, self.data.images[:3], self.data.labels[:3], self.cfg)
        b = attack_batch(self.model, self.data.images[:3], self.data.labels[:3],
                         self.cfg.with_updates(seed=12))
        assert any(not np.array_equal(x.adversarial, y.adversarial) for x, y in zip(a, b))

    def test_failed_image_is_recorded(self):
        labels = self.data.labels.copy()
        labels[2] = 7
        outcomes = attack_batch(self.model, self.data.images, labels, self.cfg)
        assert not outcomes[2].ok
        assert outcomes[2].error
        assert all(o.ok for i, o in enumerate(outcomes) if i != 2)

    def test_progress_callback(self):
        calls = []
        attack_batch(self.model, self.data.images[:3], self.data.labels[:3], self.cfg,
                     progress_callback=lambda i, n, name: calls.append((i, n)))
        assert calls == [(1, 3), (2, 3), (3, 3)]

    def test_misaligned_inputs(self):
        with pytest.raises(ConfigurationError):
            attack_batch(self.model, self.data.images, self.data.labels[:-1], self.cfg)
        with pytest.raises(ConfigurationError):
            attack_batch(self.model, self.data.images, self.data.labels, self.cfg, indices=[0])


class ScaledSource:
    """Surrogate whose gradients are multiplied by a positive constant."""

    def __init__(self, model, k):
        self.source = GradientSource(model)
        self.k = k
        self.input_shape = model.input_shape
        self.name = f"scaled-{model.name}"

    def gradient(self, x, y):
        return self.k * self.source.gradient(x, y)


class TestTrace:
    def test_trace_fields(self):
        model = random_classifier("mlp-a", seed=7)
        x = np.random.default_rng(4).uniform(size=(1, 8, 8))
        outcome = attack_with_trace(model, x, 0, config(iterations=5))
        assert outcome.iterations == 5
        assert len(outcome.clipped_fractions) == 5
        assert all(0.0 <= f <= 1.0 for f in outcome.clipped_fractions)
        assert outcome.degenerate_steps == 0
        assert outcome.linf == pytest.approx(float(np.max(np.abs(outcome.adversarial - x))))

    def test_zero_model_returns_original(self):
        model = random_classifier("mlp-a", seed=8)
        zeroed = Classifier(model.spec, {k: np.zeros_like(v) for k, v in model.weights.items()})
        x = np.random.default_rng(5).uniform(size=(1, 8, 8))
        outcome = attack_with_trace(zeroed, x, 1, config(method="mifgsm", iterations=3))
        assert outcome.degenerate_steps == 3
        np.testing.assert_array_equal(outcome.adversarial, x)

    def test_executor_does_not_change_result(self):
        model = random_classifier("cnn-a", seed=9)
        x = np.random.default_rng(6).uniform(size=(1, 8, 8))
        cfg = config(method="nifgsm", sampler=SamplerConfig.gaussian(n=4),
                     pipeline=TransformPipeline(DimConfig(), SimConfig(2), None))
        serial = run_attack(model, x, 1, cfg)
        with concurrent.futures.ThreadPoolExecutor(max_workers=3) as pool:
            parallel = run_attack(model, x, 1, cfg, executor=pool)
        np.testing.assert_array_equal(serial, parallel)

    @pytest.mark.parametrize("k", [1e-3, 7.0, 1e4])
    def test_positive_gradient_scaling(self, k):
        model = random_classifier("cnn-b", seed=11)
        x = np.random.default_rng(7).uniform(size=(1, 8, 8))
        sign_cfg = config(iterations=4)
        np.testing.assert_array_equal(run_attack(ScaledSource(model, k), x, 0, sign_cfg),
                                      run_attack(model, x, 0, sign_cfg))
        rescale_cfg = config(iterations=4, rule=UpdateRule.rescale_rule())
        np.testing.assert_allclose(run_attack(ScaledSource(model, k), x, 0, rescale_cfg),
                                   run_attack(model, x, 0, rescale_cfg), atol=1e-9, rtol=0)

    def test_small_steps_raise_loss_monotonically(self):
        data = tiny_dataset(n_per_class=10)
        model = random_classifier("mlp-a", seed=12)
        monotone = 0
        for x, y in zip(data.images, data.labels):
            losses = [model.loss(Tensor(x), int(y)).item()]
            current = x
            for _ in range(5):
                current = run_attack(model, current, int(y), config(iterations=1, alpha=0.002))
                losses.append(model.loss(Tensor(current), int(y)).item())
            monotone += all(b >= a for a, b in zip(losses, losses[1:]))
        assert monotone >= 0.9 * len(data)

    def test_attack_raises_surrogate_loss(self):
        data = tiny_dataset(n_per_class=5)
        model = random_classifier("mlp-a", seed=10)
        cfg = config(iterations=5)
        outcomes = attack_batch(model, data.images, data.labels, cfg)
        clean = [model.loss(Tensor(x), y).item() for x, y in zip(data.images, data.labels)]
        adv = [model.loss(Tensor(o.adversarial), y).item() for o, y in zip(outcomes, data.labels)]
        assert np.mean(adv) > np.mean(clean)


class TestAttackConfig:
    @pytest.mark.parametrize("kwargs", [
        {"method": "pgd"}, {"epsilon": 0.0}, {"iterations": 0}, {"alpha": 0.0}, {"mu": -1.0},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ConfigurationError):
            AttackConfig(**kwargs)

    def test_dict_round_trip(self):
        cfg = AttackConfig(method="nifgsm", rule=UpdateRule.rescale_rule(3.0),
                           sampler=SamplerConfig.gaussian(n=5, sigma=0.02),
                           pipeline=TransformPipeline(DimConfig(0.3, 0.8), SimConfig(4), TimConfig(5)),
                           epsilon=0.3, iterations=6, alpha=0.05, mu=0.5, seed=9)
        assert AttackConfig.from_dict(cfg.to_dict()) == cfg
        assert AttackConfig.from_dict(cfg.to_dict()).fingerprint() == cfg.fingerprint()

    def test_fingerprint(self):
        cfg = AttackConfig()
        assert len(cfg.fingerprint()) == 64
        assert cfg.fingerprint() == AttackConfig().fingerprint()
        assert cfg.fingerprint() != cfg.with_updates(seed=1).fingerprint()
        assert cfg.fingerprint() != cfg.with_updates(rule=UpdateRule.rescale_rule()).fingerprint()

    def test_presets(self):
        cfg = AttackConfig.preset("SMI-FGRM", profile="mnist", seed=4)
        assert cfg.method == "mifgsm"
        assert cfg.rule.variant == "rescale" and cfg.c == 2.0
        assert (cfg.sampler.kind, cfg.sampler.n, cfg.sampler.beta) == ("dfs", 12, 1.5)
        assert (cfg.epsilon, cfg.alpha, cfg.seed) == (0.3, 0.03, 4)
        ctm = AttackConfig.preset("sgmi-ct-fgsm")
        assert ctm.sampler.kind == "gaussian" and ctm.sampler.n == 20
        assert ctm.pipeline.names == ["dim", "sim", "tim"]
        assert AttackConfig.preset("fgsm").iterations == 1
        assert set(PRESETS) >= {"i-fgrm", "smi-fgrm", "sni-fgrm", "mi-fgsm"}

    @pytest.mark.parametrize("name,method,variant,sampler,transforms", [
        ("si-fgsm", "ifgsm", "sign", "dfs", []),
        ("si-fgrm", "ifgsm", "rescale", "dfs", []),
        ("sni-ct-fgsm", "nifgsm", "sign", "dfs", ["dim", "sim", "tim"]),
        ("smi-ct-fgrm", "mifgsm", "rescale", "dfs", ["dim", "sim", "tim"]),
        ("sni-ct-fgrm", "nifgsm", "rescale", "dfs", ["dim", "sim", "tim"]),
        ("sgni-ct-fgsm", "nifgsm", "sign", "gaussian", ["dim", "sim", "tim"]),
    ])
    def test_sampled_and_composite_presets(self, name, method, variant, sampler, transforms):
        cfg = AttackConfig.preset(name)
        assert (cfg.method, cfg.rule.variant, cfg.sampler.kind) == (method, variant, sampler)
        assert cfg.pipeline.names == transforms
        assert cfg.sampler.n == (20 if sampler == "gaussian" else 12)

    def test_unknown_preset_and_profile(self):
        with pytest.raises(ConfigurationError):
            AttackConfig.preset("ssa")
        with pytest.raises(ConfigurationError):
            AttackConfig.preset("mi-fgsm", profile="cifar")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
