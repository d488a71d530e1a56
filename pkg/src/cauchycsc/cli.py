"""Command-line interface.

Subcommands: estimate-gamma, train, encode, reconstruct, benchmark,
prox-curve. Every subcommand accepts --show-config, which prints the fully
resolved settings (defaults plus overrides) and exits without running.

Exit codes: 0 success; 1 usage error (bad flags or configuration);
2 data error (unreadable images, shape mismatches, incompatible
checkpoints); 3 numeric failure (divergence or filter collapse).
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .errors import (
    CheckpointVersionError,
    ConvergenceConditionError,
    FilterDegenerateError,
    ImageFormatError,
    NumericDivergenceError,
    ShapeError,
)
from .estimation import estimate_gamma
from .experiments import ExperimentSpec, _write_csv, run_experiment
from .images import load_dataset, load_image, preprocess_zero_mean, write_pgm
from .metrics import psnr, sparsity_fractions
from .penalties import CauchyPenalty, HardPenalty, SoftPenalty, prox_curve
from .training import TrainConfig, encode, reconstruct

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_dataset_flags(sub):
    sub.add_argument("dataset", help="image file, image directory, or IDX container")
    sub.add_argument(
        "--kind",
        choices=["single-image", "image-directory"],
        default="single-image",
        help="how to interpret the dataset path",
    )


def _add_train_flags(sub):
    sub.add_argument(
        "--penalty", choices=["cauchy", "soft", "hard"], default="cauchy"
    )
    sub.add_argument(
        "--gamma",
        type=float,
        help="Cauchy scale; estimated from the data when omitted",
    )
    sub.add_argument(
        "--lam",
        type=float,
        help="penalty weight (default 1.0 for cauchy; required for soft/hard)",
    )
    sub.add_argument("--k", type=int, default=25, help="number of filters")
    sub.add_argument(
        "--filter-size", type=int, nargs=2, default=[5, 5], metavar=("ROWS", "COLS")
    )
    sub.add_argument("--outer-iterations", type=int, default=100)
    sub.add_argument("--z-inner", type=int, default=10)
    sub.add_argument("--f-inner", type=int, default=10)
    sub.add_argument("--eta-z", type=float, help="default: 8*gamma**2 for cauchy")
    sub.add_argument("--eta-f", type=float, help="default: 0.01")
    sub.add_argument("--sample-count", default="all", help="images per run or 'all'")


def _build_penalty(args):
    lam = args.lam
    if args.penalty == "cauchy":
        if args.gamma is None:
            return None, 1.0 if lam is None else lam
        return CauchyPenalty(args.gamma, 1.0 if lam is None else lam), 1.0
    if lam is None:
        raise _UsageError(f"--lam is required for the {args.penalty} penalty")
    if args.penalty == "soft":
        return SoftPenalty(lam), 1.0
    return HardPenalty(lam), 1.0


def _build_config(args, seed):
    penalty, lam = _build_penalty(args)
    return TrainConfig(
        penalty=penalty,
        k=args.k,
        filter_shape=tuple(args.filter_size),
        max_outer_iterations=args.outer_iterations,
        z_inner_iterations=args.z_inner,
        f_inner_iterations=args.f_inner,
        eta_z=args.eta_z,
        eta_f=args.eta_f,
        lam=lam,
        seed=seed,
    )


def _parse_sample_count(raw):
    if raw == "all":
        return "all"
    try:
        return int(raw)
    except ValueError:
        raise _UsageError(f"--sample-count must be an integer or 'all', got {raw!r}")


def _show_config(settings):
    for key in sorted(settings):
        print(f"{key}={settings[key]}")
    return 0


def _spec_settings(spec):
    config = spec.train
    return {
        "dataset": spec.dataset_path,
        "kind": spec.dataset_kind,
        "sample_count": spec.sample_count,
        "runs": spec.runs,
        "output": spec.output_dir,
        "base_seed": spec.base_seed,
        "penalty": config.penalty.name if config.penalty else "cauchy(estimated)",
        "k": config.k,
        "filter_shape": config.filter_shape,
        "max_outer_iterations": config.max_outer_iterations,
        "z_inner_iterations": config.z_inner_iterations,
        "f_inner_iterations": config.f_inner_iterations,
        "eta_z": config.eta_z,
        "eta_f": config.eta_f,
        "lam": config.lam,
    }


def _run_spec(spec, show):
    if show:
        return _show_config(_spec_settings(spec))
    summary = run_experiment(spec)
    for entry in summary["runs"]:
        print(
            f"run {entry['run']}: psnr={entry['psnr']!r} "
            f"nonzero_frac={entry['nonzero_frac']!r} -> {entry['dir']}"
        )
    for entry in summary["failed"]:
        print(f"run {entry['run']}: FAILED ({entry['error']})", file=sys.stderr)
    print(f"aggregate -> {summary['aggregate_path']}")
    return 0 if summary["runs"] else 3


def _cmd_train(args):
    spec = ExperimentSpec(
        dataset_path=args.dataset,
        dataset_kind=args.kind,
        sample_count=_parse_sample_count(args.sample_count),
        runs=1,
        train=_build_config(args, args.seed),
        output_dir=args.output,
        base_seed=args.seed,
    )
    return _run_spec(spec, args.show_config)


def _cmd_benchmark(args):
    spec = ExperimentSpec(
        dataset_path=args.dataset,
        dataset_kind=args.kind,
        sample_count=_parse_sample_count(args.sample_count),
        runs=args.runs,
        train=_build_config(args, args.base_seed),
        output_dir=args.output,
        base_seed=args.base_seed,
    )
    return _run_spec(spec, args.show_config)


def _cmd_estimate_gamma(args):
    if args.show_config:
        return _show_config(
            {"dataset": args.dataset, "kind": args.kind, "raw": args.raw}
        )
    images, _, _ = load_dataset(args.dataset, args.kind)
    if not args.raw:
        images = [preprocess_zero_mean(img)[0] for img in images]
    pooled = np.concatenate([img.ravel() for img in images])
    estimate = estimate_gamma(pooled)
    print(
        json.dumps(
            {
                "gamma": estimate.gamma,
                "neg_log_likelihood": estimate.neg_log_likelihood,
                "samples": estimate.sample_count,
                "degenerate": estimate.degenerate,
            }
        )
    )
    return 0


def _cmd_encode(args):
    if args.show_config:
        return _show_config(
            {
                "image": args.image,
                "checkpoint": args.checkpoint,
                "output": args.output,
            }
        )
    ckpt = load_checkpoint(args.checkpoint)
    image, peak = load_image(args.image)
    centered, mean = preprocess_zero_mean(image)
    config = ckpt.config
    if config.penalty is None and ckpt.gamma_used is not None:
        config = replace(config, penalty=CauchyPenalty(ckpt.gamma_used, config.lam))
    maps = encode(centered, ckpt.filters, config)
    name = Path(args.image).stem
    out = Path(args.output)
    save_checkpoint(
        Checkpoint(
            config=config,
            filters=ckpt.filters,
            maps={name: maps},
            means={name: mean},
            gamma_used=ckpt.gamma_used,
            peak=peak,
            seed=ckpt.seed,
        ),
        out / "checkpoint",
    )
    estimate = reconstruct(ckpt.filters, maps)
    write_pgm(out / f"recon-{name}.pgm", estimate + mean, peak)
    nonzero, near_zero = sparsity_fractions(maps.data)
    print(f"psnr={psnr(centered, estimate, peak)!r}")
    print(f"nonzero_frac={nonzero!r}")
    print(f"near_zero_frac={near_zero!r}")
    return 0


def _cmd_reconstruct(args):
    if args.show_config:
        return _show_config({"checkpoint": args.checkpoint, "output": args.output})
    ckpt = load_checkpoint(args.checkpoint)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for name, maps in ckpt.maps.items():
        estimate = reconstruct(ckpt.filters, maps) + ckpt.means.get(name, 0.0)
        target = out / f"recon-{name}.pgm"
        write_pgm(target, estimate, ckpt.peak)
        print(f"{name} -> {target}")
    return 0


def _cmd_prox_curve(args):
    if args.show_config:
        return _show_config(
            {
                "penalty": args.penalty,
                "gamma": args.gamma,
                "lam": args.lam,
                "x_min": args.x_min,
                "x_max": args.x_max,
                "steps": args.steps,
                "output": args.output,
            }
        )
    if args.penalty == "cauchy":
        if args.gamma is None:
            raise _UsageError("--gamma is required for the cauchy prox curve")
        penalty = CauchyPenalty(args.gamma, 1.0 if args.lam is None else args.lam)
    elif args.lam is None:
        raise _UsageError(f"--lam is required for the {args.penalty} penalty")
    elif args.penalty == "soft":
        penalty = SoftPenalty(args.lam)
    else:
        penalty = HardPenalty(args.lam)
    if args.x_min >= args.x_max:
        raise _UsageError("--x-min must be below --x-max")
    if args.steps < 2:
        raise _UsageError("--steps must be at least 2")
    curve_path = Path(args.output)
    if curve_path.parent != Path("."):
        curve_path.parent.mkdir(parents=True, exist_ok=True)
    rows = [(repr(x), repr(z)) for x, z in
            prox_curve(penalty, args.x_min, args.x_max, args.steps)]
    _write_csv(curve_path, "x,prox", rows)
    print(f"prox curve -> {curve_path}")
    return 0


def build_parser():
    parser = _Parser(prog="cauchycsc", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("estimate-gamma", help="fit the Cauchy scale to pixels")
    _add_dataset_flags(sub)
    sub.add_argument("--raw", action="store_true", help="skip zero-mean shift")
    sub.set_defaults(func=_cmd_estimate_gamma)

    sub = subs.add_parser("train", help="one training run with artifacts")
    _add_dataset_flags(sub)
    _add_train_flags(sub)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--output", default="runs")
    sub.set_defaults(func=_cmd_train)

    sub = subs.add_parser("benchmark", help="seeded multi-run experiment")
    _add_dataset_flags(sub)
    _add_train_flags(sub)
    sub.add_argument("--runs", type=int, default=5)
    sub.add_argument("--base-seed", type=int, default=0)
    sub.add_argument("--output", default="runs")
    sub.set_defaults(func=_cmd_benchmark)

    sub = subs.add_parser("encode", help="sparse-code an image with fixed filters")
    sub.add_argument("image")
    sub.add_argument("--checkpoint", required=True)
    sub.add_argument("--output", default="encode-out")
    sub.set_defaults(func=_cmd_encode)

    sub = subs.add_parser("reconstruct", help="rebuild images from a checkpoint")
    sub.add_argument("--checkpoint", required=True)
    sub.add_argument("--output", default="recon-out")
    sub.set_defaults(func=_cmd_reconstruct)

    sub = subs.add_parser("prox-curve", help="tabulate a shrinkage curve")
    sub.add_argument(
        "--penalty", choices=["cauchy", "soft", "hard"], default="cauchy"
    )
    sub.add_argument("--gamma", type=float)
    sub.add_argument("--lam", type=float)
    sub.add_argument("--x-min", type=float, default=-10.0)
    sub.add_argument("--x-max", type=float, default=10.0)
    sub.add_argument("--steps", type=int, default=401)
    sub.add_argument("--output", default="prox_curve.csv")
    sub.set_defaults(func=_cmd_prox_curve)

    for sub_action in subs.choices.values():
        sub_action.add_argument(
            "--show-config",
            action="store_true",
            help="print resolved settings and exit",
        )
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except ConvergenceConditionError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except NumericDivergenceError as err:
        print(f"numeric divergence: {err}", file=sys.stderr)
        return 3
    except FilterDegenerateError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 3
    except (ImageFormatError, CheckpointVersionError, ShapeError, OSError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return 2
    except ValueError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
