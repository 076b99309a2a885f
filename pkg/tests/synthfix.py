"""Synthetic two-domain fixtures for end-to-end tests.

Class-conditional Gaussian clusters; the target domain is the source with a
constant per-class shift added. Shift magnitude 0 therefore yields a target
bitwise equal to the source. The generator verifies exhaustively that every
shifted class centroid stays nearest to its own class, so nearest-prototype
transfer should recover the labels.
"""

from __future__ import annotations

import numpy as np

from protoadapt import EmbeddingSet


def make_shifted_gaussian_domains(
    num_classes: int = 10,
    per_class: int = 200,
    dim: int = 64,
    shift: float = 1.0,
    noise: float = 0.25,
    seed: int = 0,
    class_sep: float = 4.0,
) -> tuple[EmbeddingSet, EmbeddingSet]:
    """Source and target EmbeddingSets with a nearest-centroid-preserving shift."""
    rng = np.random.default_rng(seed)
    means = rng.normal(size=(num_classes, dim)) * class_sep / np.sqrt(dim)
    # enforce separation: re-draw pathological layouts deterministically
    for _ in range(100):
        d2 = np.sum((means[:, None, :] - means[None, :, :]) ** 2, axis=2)
        np.fill_diagonal(d2, np.inf)
        if np.sqrt(d2.min()) > 8.0 * noise + 2.0 * shift:
            break
        means = rng.normal(size=(num_classes, dim)) * class_sep / np.sqrt(dim)
    else:
        raise RuntimeError("could not find a separated class layout")

    shifts = rng.normal(size=(num_classes, dim))
    norms = np.linalg.norm(shifts, axis=1, keepdims=True)
    shifts = shifts / norms * shift

    # shifted class centroids must stay nearest to their own class
    shifted = means + shifts
    d2 = np.sum((means[:, None, :] - shifted[None, :, :]) ** 2, axis=2)
    assert (np.argmin(d2, axis=0) == np.arange(num_classes)).all()

    labels = np.repeat(np.arange(num_classes, dtype=np.int32), per_class)
    noise_draw = rng.normal(size=(num_classes * per_class, dim)) * noise
    src = (means[labels] + noise_draw).astype(np.float32)
    tgt = (means[labels] + shifts[labels] + noise_draw).astype(np.float32)
    class_names = tuple(f"class_{c}" for c in range(num_classes))
    source = EmbeddingSet(
        domain_name="synth_source",
        vectors=src,
        sample_ids=tuple(f"src/{i:05d}" for i in range(len(src))),
        labels=labels,
        class_names=class_names,
    )
    target = EmbeddingSet(
        domain_name="synth_target",
        vectors=tgt,
        sample_ids=tuple(f"tgt/{i:05d}" for i in range(len(tgt))),
        labels=labels,
        class_names=class_names,
    )
    return source, target
