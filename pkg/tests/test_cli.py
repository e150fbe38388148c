import json

import numpy as np
import pytest

from maskdet.cli import main
from maskdet.images import save_ppm
from maskdet.weights_io import load_weights


@pytest.fixture()
def ppm(tmp_path):
    rng = np.random.default_rng(0)
    pixels = rng.integers(0, 256, (48, 64, 3), dtype=np.uint8)
    path = tmp_path / "scene.ppm"
    save_ppm(path, pixels)
    return path


def test_anchors_subcommand_reports_16800(capsys):
    assert main(["anchors", "--size", "640"]) == 0
    out = capsys.readouterr().out
    assert "16800" in out
    assert "stride 8" in out and "80x80" in out


def test_anchors_custom_strides(capsys):
    assert main(["anchors", "--size", "320", "--strides", "8,16,32"]) == 0
    assert "total anchors: 4200" in capsys.readouterr().out


def test_argument_errors_exit_2():
    assert main(["anchors"]) == 2                      # missing --size
    assert main(["frobnicate"]) == 2                   # unknown command
    assert main(["anchors", "--size", "640", "--strides", "a,b"]) == 2


def test_eval_fixture_prints_metrics(tmp_path, capsys):
    gt = {"images": [{"id": "im", "width": 100, "height": 100, "objects": [
        {"class": "face", "box": [0, 0, 10, 10]},
        {"class": "face", "box": [50, 50, 70, 70]},
    ]}]}
    pred = {"images": [{"id": "im", "width": 100, "height": 100, "objects": [
        {"class": "face", "box": [0, 0, 10, 10], "confidence": 0.9},
        {"class": "face", "box": [50, 50, 70, 70], "confidence": 0.8},
        {"class": "face", "box": [90, 90, 99, 99], "confidence": 0.7},
    ]}]}
    gt_path = tmp_path / "gt.json"
    gt_path.write_text(json.dumps(gt))
    pred_path = tmp_path / "pred.json"
    pred_path.write_text(json.dumps(pred))
    assert main(["eval", "--pred", str(pred_path), "--gt", str(gt_path)]) == 0
    out = capsys.readouterr().out
    assert "face precision=0.666667 recall=1.000000" in out
    assert "mask precision=0.000000 recall=0.000000" in out
    report = json.loads(out.strip().splitlines()[-1])
    assert report["classes"]["face"] == {"tp": 2, "fp": 1, "fn": 0,
                                         "precision": 0.666667, "recall": 1.0}


def test_eval_unknown_pred_id_fails(tmp_path, capsys):
    gt = {"images": [{"id": "a", "width": 10, "height": 10, "objects": []}]}
    pred = {"images": [{"id": "b", "width": 10, "height": 10, "objects": []}]}
    gt_path = tmp_path / "gt.json"
    gt_path.write_text(json.dumps(gt))
    pred_path = tmp_path / "pred.json"
    pred_path.write_text(json.dumps(pred))
    assert main(["eval", "--pred", str(pred_path), "--gt", str(gt_path)]) == 1
    assert "missing from ground truth" in capsys.readouterr().err


def test_detect_missing_input_exits_1(tmp_path, capsys):
    weights = tmp_path / "w.rfmw"
    assert main(["init-weights", "--out", str(weights), "--seed", "1"]) == 0
    missing = tmp_path / "nope.ppm"
    code = main(["detect", "--weights", str(weights), "--input", str(missing),
                 "--out", str(tmp_path / "out.json")])
    assert code == 1
    assert "nope.ppm" in capsys.readouterr().err


def test_detect_missing_weights_exits_1(tmp_path, ppm, capsys):
    code = main(["detect", "--weights", str(tmp_path / "absent.rfmw"),
                 "--input", str(ppm), "--out", str(tmp_path / "o.json")])
    assert code == 1
    assert "absent.rfmw" in capsys.readouterr().err


def test_init_weights_writes_loadable_store(tmp_path, capsys):
    path = tmp_path / "w.rfmw"
    assert main(["init-weights", "--out", str(path), "--seed", "7"]) == 0
    store = load_weights(path)
    assert "backbone.stage1.dw.weight" in store
    assert "head2.cls.bias" in store
    out = capsys.readouterr().out
    assert "tensors" in out
    # deterministic: same seed twice gives the same file
    path2 = tmp_path / "w2.rfmw"
    assert main(["init-weights", "--out", str(path2), "--seed", "7"]) == 0
    assert path.read_bytes() == path2.read_bytes()


def test_detect_end_to_end_writes_detections(tmp_path, ppm, capsys):
    weights = tmp_path / "w.rfmw"
    main(["init-weights", "--out", str(weights), "--seed", "3"])
    out_path = tmp_path / "dets.json"
    code = main(["detect", "--weights", str(weights), "--input", str(ppm),
                 "--out", str(out_path), "--size", "320", "--tc", "0.6"])
    assert code == 0
    doc = json.loads(out_path.read_text())
    assert len(doc["images"]) == 1
    entry = doc["images"][0]
    assert entry["id"] == "scene"
    assert entry["width"] == 64 and entry["height"] == 48
    for obj in entry["objects"]:
        assert obj["class"] in ("face", "mask")
        assert obj["confidence"] >= 0.6
        x0, y0, x1, y1 = obj["box"]
        assert 0 <= x0 <= x1 <= 64 and 0 <= y0 <= y1 <= 48


def test_detect_directory_mode(tmp_path, capsys):
    rng = np.random.default_rng(1)
    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    for name in ("b.ppm", "a.ppm"):
        save_ppm(img_dir / name,
                 rng.integers(0, 256, (32, 32, 3), dtype=np.uint8))
    weights = tmp_path / "w.rfmw"
    main(["init-weights", "--out", str(weights), "--seed", "4"])
    out_path = tmp_path / "dets.json"
    code = main(["detect", "--weights", str(weights), "--input", str(img_dir),
                 "--out", str(out_path), "--size", "320"])
    assert code == 0
    doc = json.loads(out_path.read_text())
    assert [e["id"] for e in doc["images"]] == ["a", "b"]   # sorted order


def test_detect_empty_directory_exits_1(tmp_path, capsys):
    img_dir = tmp_path / "empty"
    img_dir.mkdir()
    weights = tmp_path / "w.rfmw"
    main(["init-weights", "--out", str(weights), "--seed", "5"])
    code = main(["detect", "--weights", str(weights), "--input", str(img_dir),
                 "--out", str(tmp_path / "o.json")])
    assert code == 1
    assert "no .ppm files" in capsys.readouterr().err


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") >= 7 and "[FAIL]" not in out
