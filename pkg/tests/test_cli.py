import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from lggd.cli import run
from lggd.data import gen_sbm, make_splits, save_features_csv, save_labels
from lggd.graph import save_graph
from lggd.pipelines import load_features


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A small SBM dataset written in the on-disk format the CLI reads."""
    root = tmp_path_factory.mktemp("cli")
    ds = gen_sbm(20, 2, 0.3, 0.03, feature_dim=4, feature_noise=0.5, seed=0)
    split = make_splits(ds.labels, (0.2, 0.1, 0.1, 0.6), seed=0)
    save_graph(ds.graph, root / "graph.tsv")
    save_features_csv(ds.features, root / "features.csv")
    save_labels(ds.labels, root / "labels.txt")
    blob = {
        "train": split.train.tolist(),
        "val": split.val.tolist(),
        "test": split.test.tolist(),
        "nl1": split.new_tranches[0].tolist(),
    }
    (root / "split.json").write_text(json.dumps(blob))
    return root


def paths(root, *names):
    out = []
    for name in names:
        out.append(f"--{name.split('=')[0]}")
        out.append(str(root / name.split("=")[1]))
    return out


def base_args(root):
    return ["--graph", str(root / "graph.tsv"),
            "--labels", str(root / "labels.txt"),
            "--split", str(root / "split.json")]


def test_ggd_writes_features_and_config(workspace, tmp_path):
    rc = run(["ggd", *base_args(workspace), "--out-dir", str(tmp_path),
              "--times", "1,2", "--step-size", "0.25", "--alpha", "-0.5"])
    assert rc == 0
    fm = load_features(tmp_path / "features.csv")
    assert fm.values.shape == (40, 4)
    resolved = json.loads((tmp_path / "resolved_config.json").read_text())
    assert resolved["command"] == "ggd"
    assert resolved["alpha"] == -0.5


def test_config_file_and_flag_precedence(workspace, tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"alpha": -1.0, "times": "1"}))
    rc = run(["ggd", *base_args(workspace), "--out-dir", str(tmp_path),
              "--config", str(cfg_file), "--step-size", "0.25",
              "--alpha", "-0.25"])
    assert rc == 0
    resolved = json.loads((tmp_path / "resolved_config.json").read_text())
    assert resolved["alpha"] == -0.25      # flag beats config file
    assert resolved["times"] == "1"        # config file beats default


def test_unknown_config_key_is_exit_2(workspace, tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"bogus": 1}))
    rc = run(["ggd", *base_args(workspace), "--out-dir", str(tmp_path),
              "--config", str(cfg_file)])
    assert rc == 2


def test_unknown_flag_is_exit_2(workspace, tmp_path, capsys):
    rc = run(["ggd", *base_args(workspace), "--out-dir", str(tmp_path),
              "--not-a-flag", "1"])
    capsys.readouterr()
    assert rc == 2


def test_missing_input_file_is_exit_1(workspace, tmp_path, capsys):
    rc = run(["ggd", "--graph", str(tmp_path / "absent.tsv"),
              "--labels", str(workspace / "labels.txt"),
              "--split", str(workspace / "split.json"),
              "--out-dir", str(tmp_path)])
    capsys.readouterr()
    assert rc == 1


def test_train_then_lggd_then_classify_then_dynamic(workspace, tmp_path):
    train_out = tmp_path / "train"
    rc = run(["train", *base_args(workspace),
              "--features", str(workspace / "features.csv"),
              "--out-dir", str(train_out), "--epochs", "3",
              "--times", "1", "--step-size", "0.25", "--hidden", "6",
              "--seed", "1"])
    assert rc == 0
    ckpt = train_out / "checkpoint.json"
    assert ckpt.exists()
    history = json.loads((train_out / "loss_history.json").read_text())
    assert len(history) == 3

    lggd_out = tmp_path / "lggd"
    rc = run(["lggd", *base_args(workspace),
              "--features", str(workspace / "features.csv"),
              "--checkpoint", str(ckpt), "--out-dir", str(lggd_out)])
    assert rc == 0
    fm = load_features(lggd_out / "features.csv")
    assert fm.values.shape == (40, 2)

    cls_out = tmp_path / "classify"
    rc = run(["classify", *base_args(workspace),
              "--features", str(lggd_out / "features.csv"),
              "--out-dir", str(cls_out), "--max-epochs", "30",
              "--patience", "30", "--hidden", "8"])
    assert rc == 0
    metrics = json.loads((cls_out / "metrics.json").read_text())
    assert 0.0 <= metrics["accuracy_test"] <= 1.0
    assert metrics["epochs_run"] <= 30

    dyn_out = tmp_path / "dynamic"
    rc = run(["dynamic", *base_args(workspace),
              "--features", str(workspace / "features.csv"),
              "--checkpoint", str(ckpt), "--out-dir", str(dyn_out),
              "--max-epochs", "30", "--patience", "30", "--hidden", "8"])
    assert rc == 0
    rows = json.loads((dyn_out / "dynamic_metrics.json").read_text())
    assert [r["tranche"] for r in rows] == [0, 1]
    assert rows[1]["n_new_labels"] == 4


def test_classify_logistic_backbone(workspace, tmp_path):
    rc = run(["classify", *base_args(workspace),
              "--features", str(workspace / "features.csv"),
              "--raw-features", "--backbone", "logistic",
              "--out-dir", str(tmp_path), "--max-epochs", "30",
              "--patience", "30"])
    assert rc == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert 0.0 <= metrics["accuracy_test"] <= 1.0


def test_robustness_outputs_medians(tmp_path):
    rc = run(["robustness", "--out-dir", str(tmp_path), "--n", "150",
              "--eps", "0.25", "--corrupt", "5,20", "--seeds", "2"])
    assert rc == 0
    blob = json.loads((tmp_path / "robustness.json").read_text())
    assert len(blob["rows"]) == 4
    assert [m["n_corrupt"] for m in blob["medians"]] == [5, 20]
    for m in blob["medians"]:
        assert m["median_distortion_p1"] >= 0.0


def test_render_produces_wellformed_svg(tmp_path):
    rng = np.random.default_rng(0)
    pos = rng.uniform(-1, 1, (30, 2))
    vals = rng.uniform(0, 5, 30)
    np.savetxt(tmp_path / "pos.csv", pos, delimiter=",")
    np.savetxt(tmp_path / "vals.csv", vals, delimiter=",")
    out = tmp_path / "map.svg"
    rc = run(["render", "--positions", str(tmp_path / "pos.csv"),
              "--field", str(tmp_path / "vals.csv"), "--out", str(out),
              "--out-dir", str(tmp_path)])
    assert rc == 0
    root = ET.parse(out).getroot()
    assert root.tag.endswith("svg")
    circles = [el for el in root.iter() if el.tag.endswith("circle")]
    assert len(circles) == 30
