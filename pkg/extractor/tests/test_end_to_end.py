"""The extractor's outputs must feed the adaptation pipeline without error,
consuming it strictly through its external interfaces: EMB1 files in, the
`protoadapt` CLI on top."""

import json
import subprocess
import sys

from conftest import make_image_folder

from embextract.cli import main as embextract_main


def run_protoadapt(cfg_path, command):
    return subprocess.run(
        [sys.executable, "-m", "protoadapt.cli", "--config", str(cfg_path), command],
        capture_output=True,
        text=True,
    )


def test_extracted_folder_runs_full_pipeline(image_folder, tmp_path):
    # source: the 20-image/2-class folder through the stand-in backbone
    assert embextract_main(
        ["extract", "--backbone", "pixel_projection",
         "--images", str(image_folder), "--out", str(tmp_path / "source.emb")]
    ) == 0
    # target: same classes rendered with inverted colors (a crude domain shift)
    tgt_root = make_image_folder(
        tmp_path / "tgt", {"circle": (220, 120, 10), "square": (10, 160, 220)}, n=10
    )
    assert embextract_main(
        ["extract", "--backbone", "pixel_projection",
         "--images", str(tgt_root), "--out", str(tmp_path / "target.emb")]
    ) == 0

    cfg = {
        "source_path": "source.emb",
        "target_path": "target.emb",
        "num_classes": 2,
        "clusters_per_class": 2,
        "metric": "l2_centroid",
        "seeds": [0, 1],
        "output_dir": "out",
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    for command in ("cluster", "prototypes", "match", "predict", "evaluate", "report"):
        proc = run_protoadapt(cfg_path, command)
        assert proc.returncode == 0, f"{command} failed: {proc.stderr}"
    eval_doc = json.loads((tmp_path / "out" / "eval.json").read_text())
    assert 0.0 <= eval_doc["pairs"][0]["mean"] <= 1.0
    assert (tmp_path / "out" / "report.html").exists()


def test_synth_cli_feeds_pipeline(tmp_path):
    assert embextract_main(
        ["synth", "--classes", "3", "--per-class", "30", "--dim", "8",
         "--shift", "0.6", "--seed", "4",
         "--out-src", str(tmp_path / "s.emb"), "--out-tgt", str(tmp_path / "t.emb")]
    ) == 0
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(
        json.dumps(
            {
                "source_path": "s.emb",
                "target_path": "t.emb",
                "num_classes": 3,
                "clusters_per_class": 2,
                "seeds": [0],
                "output_dir": "out",
            }
        )
    )
    proc = run_protoadapt(cfg_path, "evaluate")
    assert proc.returncode == 0, proc.stderr
    eval_doc = json.loads((tmp_path / "out" / "eval.json").read_text())
    assert eval_doc["pairs"][0]["mean"] >= 0.9  # constructed shift keeps classes matched
