#!/usr/bin/env python3
"""
CLI entry points for the transfer attack toolkit.

Commands:
    train       Train a classifier (optionally adversarially) and save a .gatk file
    attack      Craft adversarial examples and save a .gadv batch
    eval        Score a .gadv batch against target models
    transfer    Full surrogate × target success-rate matrix in one run
    sweep       Transfer rates over a grid of N, beta or c
    export-png  Write clean / adversarial / perturbation PNGs for inspection
    stats       Show experiment ledger statistics
"""

import os
import sys
import logging
import argparse
from typing import Optional

import numpy as np

from .config import ToolkitConfig
from .errors import ConfigurationError, ToolkitError

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(message)s",
    datefmt="%H:%M:%S",
)
logger = logging.getLogger(__name__)


def progress_printer(current, total, name):
    print(f"  {current}/{total}: {name}", flush=True)


# ── Shared helpers ──────────────────────────────────────────────────

def load_dataset(args, config: ToolkitConfig, num_classes: Optional[int] = None,
                 sliced: bool = True, default_limit: int = 0):
    """``--data synthetic`` or an IDX prefix, then ``--offset``/``--limit``."""
    from .data.idx import load_idx, resolve_idx_pair
    from .data.synthetic import synthetic_blobs

    if args.data == "synthetic":
        dataset = synthetic_blobs(config.synthetic_per_class, config.synthetic_classes,
                                  config.synthetic_size, seed=args.data_seed)
    else:
        try:
            images_path, labels_path = resolve_idx_pair(args.data)
        except FileNotFoundError:
            if os.path.isabs(args.data):
                raise
            images_path, labels_path = resolve_idx_pair(os.path.join(config.data_dir, args.data))
        dataset = load_idx(images_path, labels_path, num_classes=num_classes)
    if num_classes is not None and dataset.num_classes != num_classes:
        raise ConfigurationError(f"Dataset has {dataset.num_classes} classes, "
                                 f"models expect {num_classes}")
    if sliced:
        dataset = dataset.take(args.limit or default_limit, args.offset)
    return dataset


def load_source(paths: list[str]):
    """One .gatk path → single-model source; several → logit ensemble."""
    from .attacks.engine import GradientSource
    from .models.weights_io import load_classifier

    return GradientSource([load_classifier(p) for p in paths])


def load_models(paths: list[str]) -> dict:
    from .models.weights_io import load_classifier

    models = {}
    for path in paths:
        model = load_classifier(path)
        if model.name in models:
            raise ConfigurationError(f"Two models named '{model.name}'; rename one file")
        models[model.name] = model
    return models


def build_attack_config(args, config: ToolkitConfig):
    """Preset (if any), then ToolkitConfig defaults, then explicit flags."""
    from .attacks.engine import PRESETS, PROFILES, AttackConfig
    from .attacks.sampling import SamplerConfig
    from .attacks.transforms import DimConfig, SimConfig, TimConfig, TransformPipeline
    from .attacks.update_rules import RescaleParams, UpdateRule

    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigurationError(f"Unknown preset '{args.preset}' "
                                     f"(expected one of {sorted(PRESETS)})")
        method, variant, sampler, pipeline = PRESETS[args.preset]
    else:
        method, variant = "mifgsm", "sign"
        sampler, pipeline = SamplerConfig(), TransformPipeline()

    epsilon, alpha = config.epsilon, config.alpha
    if args.profile:
        epsilon, alpha = PROFILES[args.profile]["epsilon"], PROFILES[args.profile]["alpha"]

    def pick(value, default):
        return default if value is None else value

    kind = pick(args.sampler, sampler.kind)
    n = pick(args.n, sampler.n if args.preset else config.sample_count)
    sigma = pick(args.sigma, config.gaussian_sigma or None)
    transforms = pick(args.transforms, ",".join(pipeline.names))

    return AttackConfig(
        method=pick(args.method, method),
        rule=UpdateRule(pick(args.rule, variant), RescaleParams(pick(args.c, config.rescale_c))),
        sampler=SamplerConfig(kind, n, pick(args.beta, config.beta), sigma),
        pipeline=TransformPipeline.from_names(
            transforms,
            dim=DimConfig(config.dim_probability, config.dim_min_fraction),
            sim=SimConfig(config.sim_copies),
            tim=TimConfig(config.tim_kernel_size),
        ),
        epsilon=pick(args.eps, epsilon),
        iterations=pick(args.iters, config.iterations),
        alpha=pick(args.alpha, alpha),
        mu=pick(args.mu, config.mu),
        seed=pick(args.seed, 0),
    )


def _ledger(config: ToolkitConfig):
    from .pipeline.ledger import ExperimentLedger
    return ExperimentLedger(config.ledger_path)


# ── Commands ────────────────────────────────────────────────────────

def cmd_train(args, config):
    """Train a classifier and save it."""
    from .models.architectures import Classifier, model_spec
    from .models.training import TrainConfig, train
    from .models.weights_io import save_weights

    dataset = load_dataset(args, config)
    spec = model_spec(args.arch, dataset.image_shape, dataset.num_classes)
    cfg = TrainConfig(
        epochs=args.epochs or config.epochs,
        batch_size=args.batch_size or config.batch_size,
        learning_rate=args.lr or config.learning_rate,
        momentum=config.momentum if args.momentum is None else args.momentum,
        seed=args.seed,
        adversarial_fraction=(config.adversarial_fraction if args.adv_fraction is None
                              else args.adv_fraction),
    )

    ledger = _ledger(config)
    run_id = ledger.start_run("train", config={"arch": spec.arch, **cfg.__dict__},
                              total_items=len(dataset))
    try:
        weights = train(spec, dataset, cfg)
    except ToolkitError as e:
        ledger.complete_run(run_id, status="failed", error=str(e))
        raise

    out = args.out or os.path.join(config.weights_dir, f"{spec.arch}.gatk")
    save_weights(weights, out)
    model = Classifier(spec, weights)
    accuracy = model.accuracy(dataset.images, dataset.labels)
    print(f"\nTrained {spec.arch} on {len(dataset)} images: "
          f"train accuracy {accuracy:.1%} → {out}")

    if args.test_data:
        test_args = argparse.Namespace(**{**vars(args), "data": args.test_data,
                                          "limit": 0, "offset": 0})
        test = load_dataset(test_args, config, num_classes=spec.num_classes)
        print(f"Test accuracy on {len(test)} images: "
              f"{model.accuracy(test.images, test.labels):.1%}")
    ledger.complete_run(run_id, succeeded=len(dataset), output_path=out)


def cmd_attack(args, config):
    """Craft adversarial examples for a dataset slice."""
    from .attacks.engine import attack_batch
    from .data.adv_batch import AdvBatch, save_adv_batch

    source = load_source([args.model] + (args.ensemble or []))
    dataset = load_dataset(args, config, num_classes=source.num_classes,
                           default_limit=config.eval_limit)
    cfg = build_attack_config(args, config)
    indices = np.arange(args.offset, args.offset + len(dataset))

    ledger = _ledger(config)
    run_id = ledger.start_run("attack", cfg.fingerprint(), cfg.to_dict(), len(dataset))
    outcomes = attack_batch(source, dataset.images, dataset.labels, cfg,
                            indices=indices, threads=config.threads,
                            progress_callback=progress_printer if args.progress else None)

    ok = [o for o in outcomes if o.ok]
    batch = AdvBatch([o.index for o in ok], [o.adversarial for o in ok],
                     cfg.fingerprint(), cfg.seed)
    out = args.out or os.path.join(config.adversarial_dir, f"{cfg.fingerprint()[:12]}.gadv")
    save_adv_batch(batch, out)
    ledger.complete_run(run_id, succeeded=len(ok), failed=len(outcomes) - len(ok),
                        output_path=out)

    if ok:
        linf = max(o.linf for o in ok)
        clipped = np.mean([np.mean(o.clipped_fractions) for o in ok])
        print(f"\nAttacked {len(ok)}/{len(outcomes)} images with {source.name} "
              f"({cfg.method}, {cfg.rule.variant}, sampler {cfg.sampler.kind}): "
              f"max L∞ {linf:.4f}, mean clipped fraction {clipped:.1%} → {out}")
    else:
        print(f"\nNo image could be attacked → {out}")


def cmd_eval(args, config):
    """Score an adversarial batch against targets."""
    from .data.adv_batch import load_adv_batch
    from .pipeline.evaluation import TransferReport, eligibility_mask, evaluate_row
    from .pipeline.report import emit_report, write_text

    batch = load_adv_batch(args.adv, expected=args.fingerprint)
    surrogate = load_source(args.surrogate)
    targets = load_models(args.targets)
    dataset = load_dataset(args, config, num_classes=surrogate.num_classes, sliced=False)

    indices = np.asarray(batch.indices, dtype=np.int64)
    if len(indices) and indices.max() >= len(dataset):
        raise ConfigurationError(f"{args.adv} references image {indices.max()} but "
                                 f"{args.data} holds {len(dataset)}")
    originals = dataset.images[indices]
    labels = dataset.labels[indices]
    mask = eligibility_mask(surrogate, originals, labels)
    rates, counts = evaluate_row(targets, originals, batch.stacked(), labels, mask)
    report = TransferReport([surrogate.name], list(targets), [rates], [counts],
                            fingerprint=batch.fingerprint,
                            metadata={"adv": args.adv, "seed": batch.seed})

    ledger = _ledger(config)
    run_id = ledger.start_run("eval", batch.fingerprint, {"adv": args.adv}, len(indices))
    ledger.record_report(run_id, report)
    ledger.complete_run(run_id, succeeded=int(mask.sum()))

    text = emit_report(report, args.format)
    if args.out:
        write_text(text, args.out)
    print(text, end="")


def cmd_transfer(args, config):
    """Surrogate × target matrix."""
    from .pipeline.evaluation import transfer_matrix
    from .pipeline.report import emit_report, write_text

    surrogates = load_models(args.surrogates)
    targets = load_models(args.targets)
    first = next(iter(surrogates.values()))
    dataset = load_dataset(args, config, num_classes=first.num_classes,
                           default_limit=config.eval_limit)
    cfg = build_attack_config(args, config)

    ledger = _ledger(config)
    run_id = ledger.start_run("transfer", cfg.fingerprint(), cfg.to_dict(), len(dataset))
    try:
        report = transfer_matrix(surrogates, targets, dataset, cfg, threads=config.threads,
                                 index_offset=args.offset)
    except ToolkitError as e:
        ledger.complete_run(run_id, status="failed", error=str(e))
        raise
    ledger.record_report(run_id, report)
    ledger.complete_run(run_id, succeeded=len(dataset), output_path=args.out or "")

    text = emit_report(report, args.format)
    if args.out:
        write_text(text, args.out)
    print(text, end="")


def cmd_sweep(args, config):
    """Transfer rates across a parameter grid."""
    from .pipeline.report import emit_sweep, write_text
    from .pipeline.sweep import best_value, parse_grid, run_sweep

    surrogate = load_source([args.model] + (args.ensemble or []))
    targets = load_models(args.targets)
    dataset = load_dataset(args, config, num_classes=surrogate.num_classes,
                           default_limit=config.eval_limit)
    cfg = build_attack_config(args, config)
    grid = parse_grid(args.grid)

    ledger = _ledger(config)
    run_id = ledger.start_run("sweep", cfg.fingerprint(),
                              {"parameter": args.param, "grid": grid, **cfg.to_dict()},
                              len(grid))
    result = run_sweep(args.param, grid, cfg, surrogate.name, surrogate, targets, dataset,
                       threads=config.threads, progress_callback=progress_printer,
                       index_offset=args.offset)
    ledger.record_sweep(run_id, result)
    ledger.complete_run(run_id, succeeded=len(grid), output_path=args.out or "")

    text = emit_sweep(result)
    if args.out:
        write_text(text, args.out)
    print(text, end="")
    for target in result.targets:
        print(f"  best {result.parameter} for {target}: {best_value(result, target):g}")


def cmd_export_png(args, config):
    """Write PNGs of the first examples in an adversarial batch."""
    from .data.adv_batch import load_adv_batch
    from .data.images import export_examples

    batch = load_adv_batch(args.adv)
    dataset = load_dataset(args, config, sliced=False)
    count = min(args.count, len(batch)) if args.count else len(batch)
    indices = np.asarray(batch.indices[:count], dtype=np.int64)
    adversarials = batch.stacked()[:count]
    originals = dataset.images[indices]
    epsilon = args.eps
    if epsilon is None:
        epsilon = float(np.max(np.abs(adversarials - originals))) if count else 0.0
    out_dir = args.out_dir or os.path.join(config.output_dir, "png")
    written = export_examples(originals, adversarials, indices, out_dir, epsilon, args.scale)
    print(f"\nWrote {len(written)} PNG files to {out_dir}")


def cmd_stats(args, config):
    """Show experiment ledger statistics."""
    stats = _ledger(config).get_stats()

    print("\n" + "=" * 60)
    print("EXPERIMENT LEDGER")
    print("=" * 60)
    print(f"  Total runs:        {stats['total_runs']}")
    print(f"  Distinct configs:  {stats['distinct_configs']}")
    print()
    print("  By Kind:")
    for kind, count in stats["by_kind"].items():
        print(f"    {kind}: {count}")
    print()
    print("  By Status:")
    for status, count in stats["by_status"].items():
        print(f"    {status}: {count}")
    print()
    print(f"  Report cells:      {stats['report_cells']}")
    print(f"  Avg white-box:     {stats['avg_white_box_rate']:.1f}%")
    print(f"  Avg black-box:     {stats['avg_black_box_rate']:.1f}%")
    print(f"  Sweep points:      {stats['sweep_points']}")
    print("=" * 60)


# ── Parser ──────────────────────────────────────────────────────────

def _add_data_args(p, sliced: bool = True):
    p.add_argument("--data", required=True, help="IDX prefix (e.g. mnist/t10k) or 'synthetic'")
    p.add_argument("--data-seed", type=int, default=0, help="Seed of the synthetic corpus")
    if sliced:
        p.add_argument("--limit", type=int, default=0, help="Max images (0 = all)")
        p.add_argument("--offset", type=int, default=0, help="First image index")


def _add_attack_args(p):
    from .attacks.engine import METHODS, PRESETS, PROFILES
    from .attacks.sampling import SAMPLER_KINDS
    from .attacks.update_rules import UPDATE_RULES

    p.add_argument("--preset", choices=sorted(PRESETS), help="Named attack, e.g. smi-fgrm")
    p.add_argument("--profile", choices=sorted(PROFILES), help="Budget profile (ε, α)")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--rule", choices=UPDATE_RULES)
    p.add_argument("--c", type=float, help="Rescale factor")
    p.add_argument("--sampler", choices=SAMPLER_KINDS)
    p.add_argument("--n", type=int, help="Sample count N")
    p.add_argument("--beta", type=float, help="Sampling range factor")
    p.add_argument("--sigma", type=float, help="Gaussian sampler scale")
    p.add_argument("--transforms", help="Comma list of dim,sim,tim ('' for none)")
    p.add_argument("--eps", type=float, help="L∞ budget on [0,1] pixels")
    p.add_argument("--iters", type=int, help="Iterations T")
    p.add_argument("--alpha", type=float, help="Step size")
    p.add_argument("--mu", type=float, help="Momentum decay")
    p.add_argument("--seed", type=int, help="Attack seed")


def build_parser() -> argparse.ArgumentParser:
    from .models.architectures import ARCHITECTURES
    from .pipeline.report import REPORT_FORMATS
    from .pipeline.sweep import SWEEP_PARAMETERS

    parser = argparse.ArgumentParser(
        prog="transfer_attack",
        description="Transfer Attack Toolkit: craft and evaluate transferable adversarial examples",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--config", help="Path to toolkit .ini config file")
    parser.add_argument("--output-dir", help="Override the output directory")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")

    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    # train
    p_train = subparsers.add_parser("train", help="Train a classifier")
    p_train.add_argument("--arch", required=True, choices=ARCHITECTURES)
    _add_data_args(p_train)
    p_train.add_argument("--test-data", help="IDX prefix for a held-out accuracy check")
    p_train.add_argument("--epochs", type=int, default=0)
    p_train.add_argument("--batch-size", type=int, default=0)
    p_train.add_argument("--lr", type=float, default=0.0)
    p_train.add_argument("--momentum", type=float)
    p_train.add_argument("--adv-fraction", type=float, help="Adversarial training fraction q")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out", help="Output .gatk path")

    # attack
    p_attack = subparsers.add_parser("attack", help="Craft adversarial examples")
    p_attack.add_argument("--model", required=True, help="Surrogate .gatk file")
    p_attack.add_argument("--ensemble", nargs="+", help="Further .gatk files for a logit ensemble")
    _add_data_args(p_attack)
    _add_attack_args(p_attack)
    p_attack.add_argument("--out", help="Output .gadv path")
    p_attack.add_argument("--progress", action="store_true", help="Print per-image progress")

    # eval
    p_eval = subparsers.add_parser("eval", help="Score a .gadv batch against targets")
    p_eval.add_argument("--adv", required=True)
    p_eval.add_argument("--surrogate", nargs="+", required=True,
                        help="Model(s) the batch was crafted on (eligibility mask)")
    p_eval.add_argument("--targets", nargs="+", required=True)
    _add_data_args(p_eval, sliced=False)
    p_eval.add_argument("--fingerprint", help="Expected config fingerprint (drift check)")
    p_eval.add_argument("--format", choices=REPORT_FORMATS, default="csv")
    p_eval.add_argument("--out", help="Write the report here as well")

    # transfer
    p_transfer = subparsers.add_parser("transfer", help="Surrogate × target matrix")
    p_transfer.add_argument("--surrogates", nargs="+", required=True)
    p_transfer.add_argument("--targets", nargs="+", required=True)
    _add_data_args(p_transfer)
    _add_attack_args(p_transfer)
    p_transfer.add_argument("--format", choices=REPORT_FORMATS, default="csv")
    p_transfer.add_argument("--out")

    # sweep
    p_sweep = subparsers.add_parser("sweep", help="Parameter study over N, beta or c")
    p_sweep.add_argument("--param", required=True, choices=SWEEP_PARAMETERS)
    p_sweep.add_argument("--grid", required=True, help="Comma list, strictly increasing")
    p_sweep.add_argument("--model", required=True, help="Surrogate .gatk file")
    p_sweep.add_argument("--ensemble", nargs="+", help="Further .gatk files for a logit ensemble")
    p_sweep.add_argument("--targets", nargs="+", required=True)
    _add_data_args(p_sweep)
    _add_attack_args(p_sweep)
    p_sweep.add_argument("--out", help="Output CSV path")

    # export-png
    p_png = subparsers.add_parser("export-png", help="Export examples as PNG")
    p_png.add_argument("--adv", required=True)
    _add_data_args(p_png, sliced=False)
    p_png.add_argument("--count", type=int, default=16, help="Examples to export (0 = all)")
    p_png.add_argument("--scale", type=int, default=4)
    p_png.add_argument("--eps", type=float, help="Perturbation scale (default: observed max)")
    p_png.add_argument("--out-dir")

    # stats
    subparsers.add_parser("stats", help="Show ledger statistics")

    return parser


COMMANDS = {
    "train": cmd_train,
    "attack": cmd_attack,
    "eval": cmd_eval,
    "transfer": cmd_transfer,
    "sweep": cmd_sweep,
    "export-png": cmd_export_png,
    "stats": cmd_stats,
}


def main(argv: Optional[list[str]] = None):
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.debug:
        logging.getLogger().setLevel(logging.DEBUG)

    if not args.command:
        parser.print_help()
        sys.exit(1)

    try:
        config = ToolkitConfig.from_ini(args.config) if args.config else ToolkitConfig()
        if args.output_dir:
            config = ToolkitConfig(**{**config.__dict__, "output_dir": args.output_dir,
                                      "weights_dir": "", "adversarial_dir": "",
                                      "ledger_path": ""})
        COMMANDS[args.command](args, config)
    except ToolkitError as e:
        logger.error(f"{type(e).__name__}: {e}")
        sys.exit(e.exit_code)
    except FileNotFoundError as e:
        logger.error(f"File not found: {e}")
        sys.exit(3)


if __name__ == "__main__":
    main()
