"""
Update rules, samplers, input transformations and the attack engine.
"""

from .update_rules import (
    UPDATE_RULES, RescaleParams, UpdateRule,
    clip_to_budget, l1_normalize, rescale_update, sign_update,
)
from .sampling import (
    SAMPLER_KINDS, RngStream, SamplerConfig,
    chain_deviation_bound_check, dfs_gradient, gaussian_gradient,
)
from .transforms import (
    DimConfig, SimConfig, TimConfig, TransformPipeline,
    composite_gradient, dim_transform, sim_gradients, tim_kernel, tim_smooth,
)
from .engine import (
    METHODS, PRESETS, PROFILES, AttackConfig, AttackOutcome, GradientSource,
    attack_batch, attack_with_trace, run_attack, source_gradient,
)
