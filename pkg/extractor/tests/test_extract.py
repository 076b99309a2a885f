import logging

import numpy as np
import pytest

from embextract import extract, get_backbone, list_images
from protoadapt import read_embeddings


def test_sorted_class_mapping(tmp_path):
    from conftest import make_image_folder

    root = make_image_folder(tmp_path / "two", {"b_class": (0, 0, 200), "a_class": (200, 0, 0)}, n=1)
    pairs, class_names = list_images(root)
    assert class_names == ["a_class", "b_class"]  # sorted, not creation order
    assert [label for _, label in pairs] == [0, 1]

    out = tmp_path / "two.emb"
    extract(root, out, get_backbone("pixel_projection"))
    emb = read_embeddings(out)
    assert emb.n == 2
    assert emb.labels.tolist() == [0, 1]
    assert emb.class_names == ("a_class", "b_class")


def test_twenty_image_folder_validates(image_folder, tmp_path):
    out = tmp_path / "d.emb"
    n = extract(image_folder, out, get_backbone("pixel_projection"), batch_size=7)
    assert n == 20
    emb = read_embeddings(out)
    assert emb.n == 20 and emb.dim == 64
    assert emb.class_names == ("circle", "square")
    assert np.bincount(emb.labels).tolist() == [10, 10]
    # ids are sorted relative paths
    assert list(emb.sample_ids) == sorted(emb.sample_ids)


def test_rerun_is_byte_identical(image_folder, tmp_path):
    p1, p2 = tmp_path / "a.emb", tmp_path / "b.emb"
    extract(image_folder, p1, get_backbone("pixel_projection"))
    extract(image_folder, p2, get_backbone("pixel_projection"))
    assert p1.read_bytes() == p2.read_bytes()


def test_consumer_roundtrip_bitwise(image_folder, tmp_path):
    import json

    from protoadapt import write_embeddings

    p = tmp_path / "a.emb"
    extract(image_folder, p, get_backbone("pixel_projection"))
    back = read_embeddings(p)
    write_embeddings(back, tmp_path / "rt.emb")
    assert (tmp_path / "rt.emb").read_bytes() == p.read_bytes()
    # schema keys survive the round trip; the extractor's extra provenance
    # keys (backbone, preprocessing) are for humans and get dropped
    ours = json.loads((tmp_path / "a.emb.meta.json").read_text())
    theirs = json.loads((tmp_path / "rt.emb.meta.json").read_text())
    for key in ("domain_name", "sample_ids", "class_names"):
        assert ours[key] == theirs[key]
    assert ours["backbone"] == "pixel_projection"
    assert "preprocessing" in ours


def test_unreadable_image_skipped_with_warning(image_folder, tmp_path, caplog):
    (image_folder / "circle" / "broken.png").write_text("not an image")
    out = tmp_path / "skip.emb"
    with caplog.at_level(logging.WARNING):
        n = extract(image_folder, out, get_backbone("pixel_projection"))
    assert n == 20
    assert any("broken.png" in r.message for r in caplog.records)
    emb = read_embeddings(out)
    assert all("broken" not in sid for sid in emb.sample_ids)


def test_unlabeled_flat_folder(image_folder, tmp_path):
    flat = tmp_path / "flat"
    flat.mkdir()
    for i, p in enumerate(sorted((image_folder / "circle").iterdir())):
        (flat / f"img_{i}.png").write_bytes(p.read_bytes())
    out = tmp_path / "flat.emb"
    extract(flat, out, get_backbone("pixel_projection"))
    emb = read_embeddings(out)
    assert emb.labels is None
    assert emb.class_names is None


def test_classes_are_separable_under_standin(image_folder, tmp_path):
    out = tmp_path / "sep.emb"
    extract(image_folder, out, get_backbone("pixel_projection"))
    emb = read_embeddings(out)
    X = emb.vectors.astype(np.float64)
    mu0 = X[emb.labels == 0].mean(axis=0)
    mu1 = X[emb.labels == 1].mean(axis=0)
    within = max(X[emb.labels == c].std() for c in (0, 1))
    assert np.linalg.norm(mu0 - mu1) > within  # crude but catches degenerate features


def test_unknown_backbone_rejected():
    with pytest.raises(ValueError):
        get_backbone("not_a_model")


def test_model_family_ids_registered():
    from embextract.backbones import BACKBONES

    for name in ("swag_vit_h14", "swag_vit_h14_in1k", "dinov2_vit_g14", "resnet152"):
        assert name in BACKBONES
