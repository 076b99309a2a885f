"""Synthetic two-domain embedding generator for desk-scale testing.

Class-conditional Gaussian clusters form the "source"; the "target" reuses
the class means shifted by a per-class vector of the requested magnitude
(optionally rotated in a seeded random plane) with freshly drawn per-sample
noise. Everything derives from one seed, so files are reproducible.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .emb1 import write_emb1


def _plane_rotation(dim: int, degrees: float, rng: np.random.Generator) -> np.ndarray:
    """Rotation by `degrees` in a random 2-D coordinate plane."""
    R = np.eye(dim)
    if degrees == 0.0 or dim < 2:
        return R
    i, j = rng.choice(dim, size=2, replace=False)
    a = math.radians(degrees)
    R[i, i] = R[j, j] = math.cos(a)
    R[i, j] = -math.sin(a)
    R[j, i] = math.sin(a)
    return R


def synth(
    num_classes: int,
    per_class: int,
    dim: int,
    shift: float,
    seed: int,
    out_source: str | Path,
    out_target: str | Path,
    *,
    rotate_degrees: float = 0.0,
    noise: float = 0.25,
    class_sep: float = 4.0,
) -> None:
    if min(num_classes, per_class, dim) < 1:
        raise ValueError("num_classes, per_class and dim must be positive")
    if shift < 0 or noise < 0:
        raise ValueError("shift and noise must be non-negative")
    rng = np.random.default_rng(seed)
    means = rng.normal(size=(num_classes, dim)) * class_sep / np.sqrt(dim)
    shifts = rng.normal(size=(num_classes, dim))
    shifts /= np.linalg.norm(shifts, axis=1, keepdims=True)
    shifts *= shift
    rotation = _plane_rotation(dim, rotate_degrees, rng)

    labels = np.repeat(np.arange(num_classes, dtype=np.int32), per_class)
    class_names = [f"class_{c}" for c in range(num_classes)]

    src = means[labels] + rng.normal(size=(len(labels), dim)) * noise
    tgt_means = (means + shifts) @ rotation.T
    tgt = tgt_means[labels] + rng.normal(size=(len(labels), dim)) * noise

    write_emb1(
        out_source,
        "synth_source",
        src.astype(np.float32),
        [f"src/{i:06d}" for i in range(len(labels))],
        labels=labels,
        class_names=class_names,
    )
    write_emb1(
        out_target,
        "synth_target",
        tgt.astype(np.float32),
        [f"tgt/{i:06d}" for i in range(len(labels))],
        labels=labels,
        class_names=class_names,
    )
