import json
import subprocess
import sys

import numpy as np
import pytest
import yaml
from PIL import Image

from drmanifold.cli import main
from drmanifold.config import load_config
from drmanifold.store import load_store

from conftest import SMALL_H, SMALL_W

FAST = {"max_iters": 40, "target_dim": 10, "pre_dim": 10}


def _config(tmp_path, manifest, grid, **extra):
    cfg = {
        "manifest": str(manifest),
        "out": str(tmp_path / "out"),
        "preprocess": {"height": SMALL_H, "width": SMALL_W},
        "defaults": FAST,
        "grid": grid,
        **extra,
    }
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


def _reports(out):
    return sorted((out / "reports").glob("*.json"))


# -- preprocess --------------------------------------------------------------

def test_preprocess_full_canvas_length(tmp_path):
    rng = np.random.default_rng(0)
    lines = ["path,label"]
    for i in range(2):
        Image.fromarray(rng.integers(0, 256, (300, 450, 3), dtype=np.uint8)).save(tmp_path / f"{i}.png")
        lines.append(f"{i}.png,{i}")
    (tmp_path / "m.csv").write_text("\n".join(lines) + "\n")
    assert main(["preprocess", "--manifest", str(tmp_path / "m.csv"), "--out", str(tmp_path / "o"),
                 "--prep", "GRH", "--prep", "GRAY"]) == 0
    grh = load_store(tmp_path / "o" / "features_grh.npz")
    gray = load_store(tmp_path / "o" / "features_gray.npz")
    assert grh.feature_length == 99328 == 256 * 388
    assert grh.images.reshape(grh.n, -1).shape == (2, 99328)
    assert not np.array_equal(grh.images, gray.images)
    np.testing.assert_array_equal(grh.labels, [0, 1])
    np.testing.assert_array_equal(grh.groups, [0, 1])


def test_preprocess_rerun_byte_identical(tmp_path, tiny_corpus):
    cfg = _config(tmp_path, tiny_corpus, [{"prep": "GRH", "reducer": "PCA"}])
    assert main(["preprocess", "--config", str(cfg)]) == 0
    first = (tmp_path / "out" / "features_grh.npz").read_bytes()
    assert main(["preprocess", "--config", str(cfg)]) == 0
    assert (tmp_path / "out" / "features_grh.npz").read_bytes() == first


def test_unreadable_image_exit_code(tmp_path, caplog):
    (tmp_path / "bad.png").write_bytes(b"junk")
    (tmp_path / "m.csv").write_text("path,label\nbad.png,0\n")
    assert main(["preprocess", "--manifest", str(tmp_path / "m.csv"), "--out", str(tmp_path / "o")]) == 2
    assert "bad.png" in caplog.text


def test_missing_manifest_exit_code(tmp_path):
    assert main(["preprocess", "--manifest", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2


def test_unknown_config_key(tmp_path, tiny_corpus):
    path = _config(tmp_path, tiny_corpus, [], colour="blue")
    assert main(["run", "--config", str(path)]) == 2


# -- run ---------------------------------------------------------------------

def test_empty_grid(tmp_path, tiny_corpus):
    cfg = _config(tmp_path, tiny_corpus, [])
    assert main(["run", "--config", str(cfg)]) == 0
    assert json.loads((tmp_path / "out" / "summary.json").read_text()) == []
    assert _reports(tmp_path / "out") == []


def test_duplicate_rows_identical(tmp_path, tiny_corpus):
    row = {"prep": "GRH", "augment": False, "reducer": "SR", "hidden": 20}
    cfg = _config(tmp_path, tiny_corpus, [row, row])
    assert main(["run", "--config", str(cfg)]) == 0
    a, b = _reports(tmp_path / "out")
    assert a.read_bytes() == b.read_bytes()
    summary = (tmp_path / "out" / "summary.txt").read_text().splitlines()
    assert len(summary) == 4


def test_failed_row_sets_exit_code_and_others_continue(tmp_path, tiny_corpus):
    grid = [
        {"augment": False, "reducer": "SLPP", "graph_knn": 1000},
        {"augment": False, "reducer": "PCA", "model": "KNN"},
    ]
    cfg = _config(tmp_path, tiny_corpus, grid)
    assert main(["run", "--config", str(cfg)]) == 1
    bad, good = (json.loads(p.read_text()) for p in _reports(tmp_path / "out"))
    assert "fold 0" in bad["error"]
    assert good.get("error") is None and len(good["fold_accuracies"]) == 5
    timings = json.loads((tmp_path / "out" / "timings.json").read_text())
    assert len(timings) == 2


def test_seed_override_and_row_selection(tmp_path, tiny_corpus, capsys):
    cfg = _config(tmp_path, tiny_corpus, "reference", defaults={**FAST, "max_iters": 20})
    out = tmp_path / "out"

    def run(seed):
        assert main(["run", "--config", str(cfg), "--grid-row", "4", "--seed", str(seed)]) == 0
        (path,) = _reports(out)
        return path.name, path.read_bytes()

    name, first = run(3)
    assert name == "row00_GRH-Y-SR-MLP160.json"
    assert run(3)[1] == first
    report = json.loads(first)
    assert report["config"]["init_seed"] == report["config"]["fold_seed"] == 3
    assert run(4)[1] != first
    assert "SR" in capsys.readouterr().out


def test_bad_row_index(tmp_path, tiny_corpus):
    cfg = _config(tmp_path, tiny_corpus, "reference")
    assert main(["run", "--config", str(cfg), "--grid-row", "10"]) == 2


def test_save_models_and_report(tmp_path, tiny_corpus, capsys):
    cfg = _config(tmp_path, tiny_corpus, [{"augment": False, "reducer": "PCA", "model": "KNN"}])
    assert main(["run", "--config", str(cfg), "--save-models", "--jobs", "2"]) == 0
    out = tmp_path / "out"
    folds = sorted((out / "models").glob("*/fold*"))
    assert len(folds) == 5 and (folds[0] / "reducer.npz").exists()
    capsys.readouterr()
    (out / "summary.txt").unlink()
    assert main(["report", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert printed == (out / "summary.txt").read_text()
    assert "k-NN (k=5)" in printed


# -- inspect-image -----------------------------------------------------------

def test_inspect_image(tmp_path, tiny_corpus):
    img = tiny_corpus.parent / "images" / "c3_000.png"
    assert main(["inspect-image", str(img), "--out", str(tmp_path / "v"), "--angle", "45", "--angle", "90"]) == 0
    names = sorted(p.name for p in (tmp_path / "v").iterdir())
    assert names == sorted(f"c3_000_{s}.png" for s in
                           ["resized", "gray", "green", "green_eq", "green_eq_rot45", "green_eq_rot90"])
    with Image.open(tmp_path / "v" / "c3_000_green_eq.png") as im:
        assert im.size == (388, 256) and im.mode == "L"


def test_inspect_image_rejects_bad_angle(tmp_path):
    with pytest.raises(SystemExit):
        main(["inspect-image", "x.png", "--angle", "30"])


# -- config ------------------------------------------------------------------

def test_config_paths_resolve_against_file(tmp_path, tiny_corpus):
    (tmp_path / "sub").mkdir()
    path = tmp_path / "sub" / "c.yaml"
    path.write_text(yaml.safe_dump({"manifest": str(tiny_corpus), "out": "results",
                                    "seeds": {"augment": 1, "folds": 2, "init": 3},
                                    "augmentation": {"additions": {1: 5}}}))
    cfg = load_config(path)
    assert cfg.out_dir == tmp_path / "sub" / "results"
    assert len(cfg.grid) == 10
    assert {(r.augment_seed, r.fold_seed, r.init_seed) for r in cfg.grid} == {(1, 2, 3)}
    assert cfg.plan.additions == {1: 5} and cfg.plan.seed == 1


def test_config_requires_manifest(tmp_path):
    with pytest.raises(ValueError):
        load_config(None)


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "drmanifold", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("preprocess", "run", "report", "inspect-image"):
        assert cmd in out.stdout
