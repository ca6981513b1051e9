"""Tests for DIM / SIM / TIM and their composition."""

import numpy as np
import pytest

from transfer_attack.attacks.engine import GradientSource
from transfer_attack.attacks.transforms import (
    DimConfig,
    SimConfig,
    TimConfig,
    TransformPipeline,
    bilinear_matrix,
    composite_gradient,
    dim_transform,
    draw_dim,
    sim_gradients,
    tim_kernel,
    tim_smooth,
)
from transfer_attack.errors import ConfigurationError, DimensionError
from transfer_attack.tensor.gradients import input_gradient
from transfer_attack.tests.helpers import random_classifier


class TestDim:
    def test_zero_probability_is_identity(self):
        x = np.random.default_rng(0).uniform(size=(1, 8, 8))
        rng = np.random.default_rng(1)
        for _ in range(20):
            assert dim_transform(x, DimConfig(p=0.0), rng) is x

    def test_full_size_resize_is_identity(self):
        x = np.random.default_rng(2).uniform(size=(3, 8, 8))
        out = dim_transform(x, DimConfig(p=1.0, r_min_fraction=1.0), np.random.default_rng(3))
        np.testing.assert_array_equal(out, x)

    def test_constant_image_mass(self):
        x = np.full((1, 16, 16), 0.5)
        rng = np.random.default_rng(42)
        for _ in range(10):
            draw = draw_dim(x.shape, DimConfig(p=1.0), rng)
            out = draw.apply(x)
            assert out.shape == x.shape
            assert 15 <= draw.size <= 16
            assert out.sum() == pytest.approx(0.5 * draw.size ** 2, rel=1e-12)
            assert 0 <= draw.top <= 16 - draw.size and 0 <= draw.left <= 16 - draw.size

    def test_pullback_is_adjoint(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            draw = draw_dim((2, 10, 10), DimConfig(p=1.0, r_min_fraction=0.5), rng)
            x, g = rng.normal(size=(2, 10, 10)), rng.normal(size=(2, 10, 10))
            assert np.sum(draw.apply(x) * g) == pytest.approx(np.sum(x * draw.pullback(g)), rel=1e-12)

    def test_probability_respected(self):
        rng = np.random.default_rng(5)
        hits = sum(draw_dim((1, 8, 8), DimConfig(p=0.5), rng) is not None for _ in range(2000))
        assert 900 <= hits <= 1100

    def test_bilinear_rows_sum_to_one(self):
        for out_size in (5, 7, 8):
            np.testing.assert_allclose(bilinear_matrix(out_size, 8).sum(axis=1), 1.0, rtol=1e-15)

    def test_non_square_rejected(self):
        with pytest.raises(DimensionError):
            draw_dim((1, 8, 6), DimConfig(p=1.0), np.random.default_rng(0))

    @pytest.mark.parametrize("kwargs", [{"p": -0.1}, {"p": 1.5}, {"r_min_fraction": 0.0},
                                        {"r_min_fraction": 1.2}])
    def test_validation(self, kwargs):
        with pytest.raises(ConfigurationError):
            DimConfig(**kwargs)


class TestSim:
    def test_single_copy_is_identity(self):
        def grad_fn(x, y):
            return x * 3.0 + y

        x = np.random.default_rng(6).normal(size=(1, 4, 4))
        np.testing.assert_array_equal(sim_gradients(grad_fn, x, 2, 1), grad_fn(x, 2))

    def test_squared_loss_closed_form(self):
        rng = np.random.default_rng(7)
        w, x, target = rng.normal(size=5), rng.normal(size=5), 0.3

        def grad_fn(v, y):
            return 2 * (w @ v - y) * w

        m = 5
        expected = np.mean([2 * (w @ x / 2 ** i - target) * w for i in range(m)], axis=0)
        np.testing.assert_allclose(sim_gradients(grad_fn, x, target, m), expected, rtol=1e-12)

    def test_scaled_inputs(self):
        seen = []

        def grad_fn(v, y):
            seen.append(float(v[0]))
            return v

        sim_gradients(grad_fn, np.array([8.0]), 0, 4)
        assert seen == [8.0, 4.0, 2.0, 1.0]

    def test_rejects_zero_copies(self):
        with pytest.raises(ConfigurationError):
            sim_gradients(lambda v, y: v, np.zeros(2), 0, 0)
        with pytest.raises(ConfigurationError):
            SimConfig(0)


class TestTim:
    def test_unit_kernel(self):
        kernel = tim_kernel(1)
        np.testing.assert_array_equal(kernel, [[1.0]])
        g = np.random.default_rng(8).normal(size=(3, 6, 6))
        np.testing.assert_array_equal(tim_smooth(g, kernel), g)

    def test_kernel_properties(self):
        kernel = tim_kernel(7)
        assert abs(kernel.sum() - 1.0) < 1e-12
        assert np.all(kernel >= 0)
        assert kernel[3, 3] == kernel.max()
        np.testing.assert_array_equal(kernel, np.rot90(kernel))
        np.testing.assert_array_equal(kernel, kernel[::-1])
        np.testing.assert_array_equal(kernel, kernel[:, ::-1])

    @pytest.mark.parametrize("size,sigma", [(3, None), (5, 0.7), (9, 4.0)])
    def test_kernels_sum_to_one(self, size, sigma):
        assert abs(tim_kernel(size, sigma).sum() - 1.0) < 1e-12

    def test_smoothing_does_not_increase_l1(self):
        rng = np.random.default_rng(9)
        kernel = tim_kernel(7)
        for _ in range(20):
            g = rng.normal(size=(2, 8, 8))
            assert np.abs(tim_smooth(g, kernel)).sum() <= np.abs(g).sum() + 1e-12

    def test_even_size_rejected(self):
        with pytest.raises(ConfigurationError):
            tim_kernel(4)
        with pytest.raises(ConfigurationError):
            TimConfig(6)

    def test_default_sigma(self):
        assert TimConfig().sigma == pytest.approx(7 / np.sqrt(3))


class TestCompositeGradient:
    def setup_method(self):
        self.model = random_classifier("cnn-a", seed=1)
        self.source = GradientSource(self.model)
        self.x = np.random.default_rng(10).uniform(size=(1, 8, 8))
        self.plain = input_gradient(self.model, self.x, 1)

    def run(self, pipeline, seed=0):
        return composite_gradient(self.source, self.x, 1, pipeline, np.random.default_rng(seed))

    def test_empty_pipeline(self):
        np.testing.assert_array_equal(self.run(TransformPipeline()), self.plain)

    @pytest.mark.parametrize("pipeline", [
        TransformPipeline(dim=DimConfig(p=0.0)),
        TransformPipeline(sim=SimConfig(1)),
        TransformPipeline(tim=TimConfig(1)),
        TransformPipeline(DimConfig(p=0.0), SimConfig(1), TimConfig(1)),
    ])
    def test_neutral_parameters(self, pipeline):
        np.testing.assert_array_equal(self.run(pipeline), self.plain)

    def test_plain_callable(self):
        out = composite_gradient(lambda v, y: input_gradient(self.model, v, y), self.x, 1,
                                 TransformPipeline(), np.random.default_rng(0))
        np.testing.assert_array_equal(out, self.plain)

    def test_full_pipeline_shape_and_determinism(self):
        pipeline = TransformPipeline(DimConfig(p=1.0), SimConfig(), TimConfig(3))
        a, b = self.run(pipeline, seed=42), self.run(pipeline, seed=42)
        assert a.shape == self.x.shape
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, self.plain)

    def test_tim_only_is_smoothed_gradient(self):
        out = self.run(TransformPipeline(tim=TimConfig(3)))
        np.testing.assert_allclose(out, tim_smooth(self.plain, tim_kernel(3)), rtol=1e-14)


class TestPipelineConfig:
    def test_from_names(self):
        pipeline = TransformPipeline.from_names("tim, DIM")
        assert pipeline.names == ["dim", "tim"]
        assert pipeline.sim is None
        assert TransformPipeline.from_names("").is_empty

    def test_from_names_uses_given_configs(self):
        pipeline = TransformPipeline.from_names("sim", sim=SimConfig(3))
        assert pipeline.sim.m == 3

    def test_unknown_name(self):
        with pytest.raises(ConfigurationError):
            TransformPipeline.from_names("dim,admix")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
