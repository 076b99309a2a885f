"""Embed an image folder into an EMB1 file.

Labeled layout: one subfolder per class, class index = position in the
sorted folder-name list. A folder without subfolders is treated as an
unlabeled flat set. Sample order is the sorted relative path list, never
filesystem order, so reruns produce identical files whenever the backbone
is deterministic on the chosen device. Unreadable images are skipped with
a warning and excluded from the output.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .emb1 import write_emb1

logger = logging.getLogger(__name__)

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp"}


def list_images(root: Path) -> tuple[list[tuple[str, int]], list[str] | None]:
    """(relative_path, class_index) pairs in sorted order, plus class names."""
    root = Path(root)
    class_dirs = sorted(p.name for p in root.iterdir() if p.is_dir())
    if class_dirs:
        pairs = []
        for idx, cls in enumerate(class_dirs):
            for p in sorted((root / cls).rglob("*")):
                if p.suffix.lower() in _IMAGE_SUFFIXES and p.is_file():
                    pairs.append((str(p.relative_to(root)), idx))
        return pairs, class_dirs
    pairs = [
        (str(p.relative_to(root)), -1)
        for p in sorted(root.rglob("*"))
        if p.suffix.lower() in _IMAGE_SUFFIXES and p.is_file()
    ]
    return pairs, None


def extract(
    image_root: str | Path,
    out_path: str | Path,
    backbone,
    *,
    domain_name: str | None = None,
    batch_size: int = 16,
) -> int:
    """Embed every readable image under image_root; returns the row count."""
    image_root = Path(image_root)
    pairs, class_names = list_images(image_root)
    if not pairs:
        raise ValueError(f"no images found under {image_root}")

    kept_ids: list[str] = []
    kept_labels: list[int] = []
    rows: list[np.ndarray] = []
    batch_imgs: list[Image.Image] = []
    batch_meta: list[tuple[str, int]] = []

    def flush():
        if batch_imgs:
            rows.append(backbone.embed_batch(batch_imgs))
            for sid, lab in batch_meta:
                kept_ids.append(sid)
                kept_labels.append(lab)
            batch_imgs.clear()
            batch_meta.clear()

    for rel, label in pairs:
        try:
            with Image.open(image_root / rel) as img:
                img.load()
                batch_imgs.append(img.copy())
        except (OSError, UnidentifiedImageError) as e:
            logger.warning("skipping unreadable image %s (%s)", rel, e)
            continue
        batch_meta.append((rel, label))
        if len(batch_imgs) >= batch_size:
            flush()
    flush()
    if not rows:
        raise ValueError(f"no readable images under {image_root}")

    vectors = np.vstack(rows)
    labels = np.asarray(kept_labels, dtype=np.int32) if class_names is not None else None
    provenance = {"backbone": getattr(backbone, "name", type(backbone).__name__)}
    if getattr(backbone, "preprocessing", None):
        provenance["preprocessing"] = backbone.preprocessing
    write_emb1(
        out_path,
        domain_name or image_root.name,
        vectors,
        kept_ids,
        labels=labels,
        class_names=class_names,
        extra_meta=provenance,
    )
    return len(kept_ids)
