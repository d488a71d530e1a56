"""Experiment orchestration: seeded multi-run training plus artifact emission.

Each run writes, under its own directory: the per-iteration report CSV, a
checkpoint, re-shifted reconstruction images, a tiled filter image, the
coefficient histogram CSV, and the prox-curve CSV for the penalty in use.
The batch then writes an aggregate CSV of per-run final PSNR/sparsity with
mean/median/quartile summary rows. All numeric CSV fields are written with
``repr`` so identical runs produce identical bytes.
"""

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, save_checkpoint
from .images import _atomic_write_bytes, load_dataset, preprocess_zero_mean, write_pgm
from .metrics import coefficient_histogram
from .penalties import prox_curve
from .training import TrainConfig, reconstruct, train

__all__ = ["ExperimentSpec", "run_experiment"]

HISTOGRAM_BINS = 101
PROX_CURVE_SPAN = 10.0
PROX_CURVE_STEPS = 401


@dataclass(frozen=True)
class ExperimentSpec:
    """One benchmark: a dataset, a training config, and a run count."""

    dataset_path: str
    dataset_kind: str = "single-image"
    sample_count: object = "all"  # positive int or "all"
    runs: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)
    output_dir: str = "runs"
    base_seed: int = 0
    dataset_name: str = None

    def __post_init__(self):
        if self.dataset_kind not in ("single-image", "image-directory"):
            raise ValueError(f"unknown dataset kind {self.dataset_kind!r}")
        if self.runs < 1:
            raise ValueError(f"runs must be positive, got {self.runs}")
        if self.sample_count != "all" and (
            not isinstance(self.sample_count, int) or self.sample_count < 1
        ):
            raise ValueError(
                f"sample_count must be a positive integer or 'all', "
                f"got {self.sample_count!r}"
            )
        if self.base_seed < 0:
            raise ValueError(f"base_seed must be non-negative, got {self.base_seed}")

    @property
    def label(self):
        return self.dataset_name or Path(self.dataset_path).stem


def _fmt(value):
    return repr(float(value))


def _write_csv(path, header, rows):
    lines = [header]
    lines.extend(",".join(str(cell) for cell in row) for row in rows)
    _atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))


def _write_report_csv(path, report):
    rows = [
        (
            s.iteration,
            _fmt(s.cost),
            _fmt(s.fidelity),
            _fmt(s.penalty),
            _fmt(s.psnr),
            _fmt(s.nonzero_fraction),
            _fmt(s.eta_z),
            _fmt(s.eta_f),
        )
        for s in report.iterations
    ]
    _write_csv(path, "iter,cost,fidelity,penalty,psnr,nonzero_frac,eta_z,eta_f", rows)


def _write_histogram_csv(path, coefficients):
    span = float(np.max(np.abs(coefficients))) if coefficients.size else 0.0
    if span == 0.0:
        span = 1.0
    histogram = coefficient_histogram(coefficients, HISTOGRAM_BINS, (-span, span))
    _write_csv(
        path, "bin_center,count", [(_fmt(c), n) for c, n in histogram]
    )


def _write_prox_curve_csv(path, penalty):
    curve = prox_curve(penalty, -PROX_CURVE_SPAN, PROX_CURVE_SPAN, PROX_CURVE_STEPS)
    _write_csv(path, "x,prox", [(_fmt(x), _fmt(z)) for x, z in curve])


def _tile_filters(filters, pad=1):
    """Arrange K filters in a near-square grid, each min-max scaled to [0, 255]."""
    k, rows, cols = filters.shape
    grid_cols = math.ceil(math.sqrt(k))
    grid_rows = math.ceil(k / grid_cols)
    tile = np.zeros(
        (grid_rows * (rows + pad) + pad, grid_cols * (cols + pad) + pad)
    )
    for i in range(k):
        block = filters[i]
        low, high = block.min(), block.max()
        scaled = (
            (block - low) / (high - low) * 255.0
            if high > low
            else np.full_like(block, 127.5)
        )
        r = pad + (i // grid_cols) * (rows + pad)
        c = pad + (i % grid_cols) * (cols + pad)
        tile[r : r + rows, c : c + cols] = scaled
    return tile


def _resolved_penalty(report, config):
    if config.penalty is not None:
        return config.penalty
    from .penalties import CauchyPenalty

    return CauchyPenalty(report.gamma_used, config.lam)


def _sample_indices(total, count, rng):
    if count == "all" or count >= total:
        return list(range(total))
    return sorted(int(i) for i in rng.choice(total, size=count, replace=False))


def run_experiment(spec):
    """Run ``spec.runs`` seeded trainings and write all artifacts.

    Returns a summary dict with per-run final metrics and the aggregate CSV
    path. A run that raises is recorded under ``failed`` (with an error.txt
    in its directory) and the batch continues.
    """
    images, peak, names = load_dataset(spec.dataset_path, spec.dataset_kind)
    if spec.sample_count != "all" and spec.sample_count > len(images):
        raise ValueError(
            f"sample_count {spec.sample_count} exceeds dataset size {len(images)}"
        )
    centered = [preprocess_zero_mean(img) for img in images]
    penalty_name = spec.train.penalty.name if spec.train.penalty else "cauchy"
    output_dir = Path(spec.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    per_run, failed = [], []
    for r in range(spec.runs):
        seed = spec.base_seed + r
        run_dir = output_dir / f"run-{r:03d}"
        run_dir.mkdir(parents=True, exist_ok=True)
        try:
            rng = np.random.default_rng(seed)
            chosen = _sample_indices(len(images), spec.sample_count, rng)
            dataset = [centered[i][0] for i in chosen]
            config = replace(spec.train, seed=seed)
            report = train(dataset, config, peak=peak)

            _write_report_csv(run_dir / "report.csv", report)
            run_names = [names[i] for i in chosen]
            ckpt = Checkpoint(
                config=config,
                filters=report.filters,
                maps=dict(zip(run_names, report.maps)),
                means={names[i]: centered[i][1] for i in chosen},
                gamma_used=report.gamma_used,
                peak=peak,
                seed=seed,
            )
            save_checkpoint(ckpt, run_dir / "checkpoint")
            for name, idx, maps in zip(run_names, chosen, report.maps):
                recon = reconstruct(report.filters, maps) + centered[idx][1]
                write_pgm(run_dir / f"recon-{name}.pgm", recon, peak)
            write_pgm(run_dir / "filters.pgm", _tile_filters(report.filters.data))
            pooled = np.concatenate([m.data.ravel() for m in report.maps])
            _write_histogram_csv(run_dir / "histogram.csv", pooled)
            _write_prox_curve_csv(
                run_dir / "prox_curve.csv", _resolved_penalty(report, config)
            )

            final = report.final
            per_run.append(
                {
                    "run": r,
                    "seed": seed,
                    "psnr": final.psnr,
                    "nonzero_frac": final.nonzero_fraction,
                    "dir": str(run_dir),
                }
            )
        except Exception as exc:  # a failed run must not sink the batch
            message = f"{type(exc).__name__}: {exc}"
            _atomic_write_bytes(run_dir / "error.txt", (message + "\n").encode())
            failed.append({"run": r, "seed": seed, "error": message})

    rows = [
        (spec.label, penalty_name, entry["run"], _fmt(entry["psnr"]),
         _fmt(entry["nonzero_frac"]))
        for entry in per_run
    ]
    if per_run:
        psnrs = np.array([entry["psnr"] for entry in per_run])
        fracs = np.array([entry["nonzero_frac"] for entry in per_run])
        for stat, value in (
            ("mean", np.mean), ("median", np.median),
            ("q1", lambda a: np.percentile(a, 25)),
            ("q3", lambda a: np.percentile(a, 75)),
        ):
            rows.append(
                (spec.label, penalty_name, stat, _fmt(value(psnrs)), _fmt(value(fracs)))
            )
    aggregate_path = output_dir / "aggregate.csv"
    _write_csv(aggregate_path, "dataset,penalty,run,psnr,nonzero_frac", rows)

    return {
        "dataset": spec.label,
        "penalty": penalty_name,
        "aggregate_path": str(aggregate_path),
        "runs": per_run,
        "failed": failed,
    }
