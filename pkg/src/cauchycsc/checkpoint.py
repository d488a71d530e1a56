"""Checkpoint persistence: a JSON manifest plus one flat binary array file.

Layout under the checkpoint directory:

    manifest.json   -- format version, config echo, per-image metadata,
                       byte offsets and shapes into arrays.bin
    arrays.bin      -- little-endian float64, filters first then each
                       image's maps in manifest order

The round-trip is bit-exact: save -> load -> save reproduces identical
bytes for both files.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CheckpointVersionError
from .images import _atomic_write_bytes
from .penalties import CauchyPenalty, HardPenalty, SoftPenalty
from .training import FeatureMaps, FilterBank, TrainConfig

__all__ = ["CHECKPOINT_FORMAT_VERSION", "Checkpoint", "save_checkpoint", "load_checkpoint"]

CHECKPOINT_FORMAT_VERSION = 1

_ARRAY_DTYPE = "<f8"


@dataclass
class Checkpoint:
    """Everything needed to reconstruct or continue from a training run."""

    config: TrainConfig
    filters: FilterBank
    maps: dict  # image name -> FeatureMaps, insertion order = storage order
    means: dict = field(default_factory=dict)  # image name -> subtracted mean
    gamma_used: float = None
    peak: float = 255.0
    seed: int = 0
    format_version: int = CHECKPOINT_FORMAT_VERSION


def _penalty_to_json(penalty):
    if penalty is None:
        return None
    if isinstance(penalty, CauchyPenalty):
        return {"kind": "cauchy", "gamma": penalty.gamma, "lam": penalty.lam}
    if isinstance(penalty, SoftPenalty):
        return {"kind": "soft", "lam": penalty.lam}
    if isinstance(penalty, HardPenalty):
        return {"kind": "hard", "lam": penalty.lam}
    raise TypeError(f"cannot serialize penalty {penalty!r}")


def _penalty_from_json(obj):
    if obj is None:
        return None
    kind = obj["kind"]
    if kind == "cauchy":
        return CauchyPenalty(obj["gamma"], obj["lam"])
    if kind == "soft":
        return SoftPenalty(obj["lam"])
    if kind == "hard":
        return HardPenalty(obj["lam"])
    raise CheckpointVersionError(f"unknown penalty kind {kind!r} in manifest")


def _config_to_json(config):
    return {
        "penalty": _penalty_to_json(config.penalty),
        "k": config.k,
        "filter_shape": list(config.filter_shape),
        "max_outer_iterations": config.max_outer_iterations,
        "z_inner_iterations": config.z_inner_iterations,
        "f_inner_iterations": config.f_inner_iterations,
        "eta_z": config.eta_z,
        "eta_f": config.eta_f,
        "lam": config.lam,
        "seed": config.seed,
    }


def _config_from_json(obj):
    return TrainConfig(
        penalty=_penalty_from_json(obj["penalty"]),
        k=obj["k"],
        filter_shape=tuple(obj["filter_shape"]),
        max_outer_iterations=obj["max_outer_iterations"],
        z_inner_iterations=obj["z_inner_iterations"],
        f_inner_iterations=obj["f_inner_iterations"],
        eta_z=obj["eta_z"],
        eta_f=obj["eta_f"],
        lam=obj["lam"],
        seed=obj["seed"],
    )


def save_checkpoint(ckpt, dir_path):
    """Write ``ckpt`` under ``dir_path`` (created if missing)."""
    dir_path = Path(dir_path)
    dir_path.mkdir(parents=True, exist_ok=True)

    chunks = [np.ascontiguousarray(ckpt.filters.data, dtype=_ARRAY_DTYPE).tobytes()]
    offset = len(chunks[0])
    images = []
    for name, maps in ckpt.maps.items():
        payload = np.ascontiguousarray(maps.data, dtype=_ARRAY_DTYPE).tobytes()
        images.append(
            {
                "name": name,
                "mean": float(ckpt.means.get(name, 0.0)),
                "offset": offset,
                "shape": list(maps.data.shape),
            }
        )
        chunks.append(payload)
        offset += len(payload)

    manifest = {
        "format_version": ckpt.format_version,
        "byte_order": "little",
        "dtype": "float64",
        "config": _config_to_json(ckpt.config),
        "gamma_used": ckpt.gamma_used,
        "peak": ckpt.peak,
        "seed": ckpt.seed,
        "filters": {"offset": 0, "shape": list(ckpt.filters.data.shape)},
        "images": images,
    }
    text = json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    _atomic_write_bytes(dir_path / "arrays.bin", b"".join(chunks))
    _atomic_write_bytes(dir_path / "manifest.json", text.encode("ascii"))


def _read_array(buffer, offset, shape):
    count = int(np.prod(shape))
    arr = np.frombuffer(buffer, dtype=_ARRAY_DTYPE, count=count, offset=offset)
    return arr.reshape(shape).astype(np.float64)


def load_checkpoint(dir_path):
    """Load a checkpoint directory, gating on the format version."""
    dir_path = Path(dir_path)
    manifest = json.loads((dir_path / "manifest.json").read_text("ascii"))
    version = manifest.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint format version {version} is not supported "
            f"(this build reads version {CHECKPOINT_FORMAT_VERSION})"
        )
    buffer = (dir_path / "arrays.bin").read_bytes()
    filters = FilterBank(
        _read_array(buffer, manifest["filters"]["offset"], manifest["filters"]["shape"])
    )
    maps, means = {}, {}
    for entry in manifest["images"]:
        maps[entry["name"]] = FeatureMaps(
            _read_array(buffer, entry["offset"], entry["shape"])
        )
        means[entry["name"]] = entry["mean"]
    return Checkpoint(
        config=_config_from_json(manifest["config"]),
        filters=filters,
        maps=maps,
        means=means,
        gamma_used=manifest["gamma_used"],
        peak=manifest["peak"],
        seed=manifest["seed"],
        format_version=version,
    )
