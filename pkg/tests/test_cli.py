"""Command-line surface: outputs, exit codes, determinism."""

import json
from pathlib import Path

import numpy as np
import pytest

from imvclust.cli import main

TINY = {
    "epochs": [3, 2, 2],
    "batch_size": 32,
    "latent_dim": 8,
    "prediction_dim": 8,
    "ae_hidden": [24],
    "head_hidden": 12,
    "disc_hidden": [16, 8],
}


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "synth"
    code = main(["synth", "--out", str(out), "--instances", "96",
                 "--clusters", "3", "--view-dims", "10,12",
                 "--latent-dim", "4", "--seed", "5"])
    assert code == 0
    return out


@pytest.fixture()
def config_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(TINY))
    return path


def read_csv(path):
    lines = Path(path).read_text().strip().splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


# -------------------------------------------------------------------- synth

def test_synth_writes_dataset(dataset_dir):
    manifest = json.loads((dataset_dir / "manifest.json").read_text())
    assert manifest["num_instances"] == 96
    assert (dataset_dir / "view0.bin").is_file()
    assert (dataset_dir / "view1.bin").is_file()
    assert (dataset_dir / "labels.txt").is_file()


def test_synth_deterministic_bytes(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["synth", "--out", str(out), "--instances", "40",
                     "--clusters", "2", "--seed", "7"]) == 0
        outs.append(out)
    for fname in ("view0.bin", "view1.bin", "labels.txt", "manifest.json"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_synth_invalid_config_exits_2(tmp_path):
    assert main(["synth", "--out", str(tmp_path / "x"), "--instances", "3",
                 "--clusters", "10"]) == 2


# -------------------------------------------------------------------- train

def test_train_outputs(dataset_dir, config_file, tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["train", "--data", str(dataset_dir), "--out", str(out),
                 "--config", str(config_file), "--mr", "0.5", "--seed", "1"])
    assert code == 0
    header, rows = read_csv(out / "metrics.csv")
    assert header == ["run_id", "dataset", "mr", "seed", "k", "acc", "nmi",
                      "ari", "method"]
    assert len(rows) == 1
    assert rows[0][8] == "imvclust"
    assert float(rows[0][2]) == 0.5
    header, rows = read_csv(out / "history.csv")
    assert header[:2] == ["step", "epoch"]
    steps = {row[0] for row in rows}
    assert steps == {"1", "2", "3"}
    assert (out / "checkpoint" / "params.bin").is_file()
    assert (out / "checkpoint" / "checkpoint.json").is_file()


def test_train_mr_zero_single_phase(dataset_dir, config_file, tmp_path):
    out = tmp_path / "run0"
    assert main(["train", "--data", str(dataset_dir), "--out", str(out),
                 "--config", str(config_file), "--mr", "0", "--seed", "1"]) == 0
    _, rows = read_csv(out / "history.csv")
    assert {row[0] for row in rows} == {"1"}
    assert len(rows) == TINY["epochs"][0] + TINY["epochs"][2]


def test_train_missing_dataset_exits_3(tmp_path):
    assert main(["train", "--data", str(tmp_path / "nope"),
                 "--out", str(tmp_path / "o")]) == 3


def test_train_unknown_config_key_exits_2(dataset_dir, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"learning_rat": 0.1}))
    assert main(["train", "--data", str(dataset_dir),
                 "--out", str(tmp_path / "o"), "--config", str(bad)]) == 2


def test_train_numeric_blowup_exits_4(dataset_dir, config_file, tmp_path):
    out = tmp_path / "blow"
    with np.errstate(all="ignore"):
        code = main(["train", "--data", str(dataset_dir), "--out", str(out),
                     "--config", str(config_file), "--mr", "0",
                     "--learning-rate", "1e18", "--seed", "0"])
    assert code == 4


def test_train_byte_identical_reruns(dataset_dir, config_file, tmp_path):
    digests = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert main(["train", "--data", str(dataset_dir), "--out", str(out),
                     "--config", str(config_file), "--mr", "0.5",
                     "--seed", "3", "--deterministic"]) == 0
        digests.append({
            "history": (out / "history.csv").read_bytes(),
            "metrics": (out / "metrics.csv").read_bytes(),
            "params": (out / "checkpoint" / "params.bin").read_bytes(),
            "meta": (out / "checkpoint" / "checkpoint.json").read_bytes(),
        })
    assert digests[0] == digests[1]


# --------------------------------------------------------------------- eval

def test_eval_matches_train_metrics(dataset_dir, config_file, tmp_path):
    run = tmp_path / "run"
    assert main(["train", "--data", str(dataset_dir), "--out", str(run),
                 "--config", str(config_file), "--seed", "2"]) == 0
    out = tmp_path / "eval"
    assert main(["eval", "--checkpoint", str(run / "checkpoint"),
                 "--data", str(dataset_dir), "--out", str(out),
                 "--seed", "2"]) == 0
    _, rows = read_csv(out / "metrics.csv")
    assert len(rows) == 1


def test_eval_missing_checkpoint_exits_3(dataset_dir, tmp_path):
    assert main(["eval", "--checkpoint", str(tmp_path / "none"),
                 "--data", str(dataset_dir), "--out", str(tmp_path / "o")]) == 3


# -------------------------------------------------------------------- sweep

def test_sweep_rows_and_aggregates(dataset_dir, config_file, tmp_path):
    out = tmp_path / "sweep"
    code = main(["sweep", "--data", str(dataset_dir), "--out", str(out),
                 "--config", str(config_file), "--param", "mr",
                 "--values", "0.2,0.4", "--seeds", "0,1"])
    assert code == 0
    header, rows = read_csv(out / "sweep.csv")
    assert header == ["run_id", "dataset", "mr", "seed", "k", "acc", "nmi",
                      "ari", "method"]
    assert len(rows) == 6  # 2 values x 2 seeds + 2 aggregate rows
    means = [r for r in rows if r[0].endswith("-mean")]
    assert len(means) == 2
    cell = [r for r in rows if r[0].endswith("mr=0.2-s0")]
    assert len(cell) == 1


def test_sweep_momentum_includes_default(dataset_dir, config_file, tmp_path):
    out = tmp_path / "sweepm"
    code = main(["sweep", "--data", str(dataset_dir), "--out", str(out),
                 "--config", str(config_file), "--param", "momentum",
                 "--values", "0.6", "--seeds", "0", "--mr", "0.5"])
    assert code == 0
    _, rows = read_csv(out / "sweep.csv")
    assert len(rows) == 2


def test_sweep_alpha_grid(dataset_dir, tmp_path):
    # the standard trade-off grid spans 0.001 .. 10 in decades
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({**TINY, "epochs": [1, 1, 1]}))
    out = tmp_path / "sweepa"
    code = main(["sweep", "--data", str(dataset_dir), "--out", str(out),
                 "--config", str(cfg), "--param", "alpha",
                 "--values", "0.001,0.01,0.1,1,10", "--seeds", "0",
                 "--mr", "0.5"])
    assert code == 0
    _, rows = read_csv(out / "sweep.csv")
    assert len(rows) == 10  # 5 values + 5 aggregates


def test_sweep_illegal_value_exits_2_before_running(dataset_dir, tmp_path):
    out = tmp_path / "sweepbad"
    assert main(["sweep", "--data", str(dataset_dir), "--out", str(out),
                 "--param", "mr", "--values", "0.5,1.2", "--seeds", "0"]) == 2
    assert not (out / "sweep.csv").exists()


# ------------------------------------------------------------------- ablate

def test_ablate_eight_rows(dataset_dir, config_file, tmp_path):
    out = tmp_path / "ablate"
    code = main(["ablate", "--data", str(dataset_dir), "--out", str(out),
                 "--config", str(config_file), "--mr", "0.5", "--seed", "0"])
    assert code == 0
    header, rows = read_csv(out / "ablation.csv")
    assert header[:2] == ["config", "losses"]
    assert [r[0] for r in rows] == [f"({i})" for i in range(1, 9)]
    assert rows[7][1] == "rec+cc+pre+adv"
    assert rows[0][1] == "rec"


# ------------------------------------------------------------------- export

def test_export_embeddings(dataset_dir, config_file, tmp_path):
    run = tmp_path / "run"
    assert main(["train", "--data", str(dataset_dir), "--out", str(run),
                 "--config", str(config_file), "--mr", "0.5", "--seed", "4"]) == 0
    out = tmp_path / "emb"
    assert main(["export-embeddings", "--checkpoint", str(run / "checkpoint"),
                 "--data", str(dataset_dir), "--out", str(out)]) == 0
    meta = json.loads((out / "embeddings.json").read_text())
    assert meta["num_instances"] == 96
    assert meta["dim"] == 2 * TINY["latent_dim"]
    payload = np.fromfile(out / "embeddings.bin", dtype="<f4")
    assert payload.size == 96 * meta["dim"]
    labels = (out / "labels.txt").read_text().split()
    assert len(labels) == 96
    # repeated export is byte-identical
    out2 = tmp_path / "emb2"
    assert main(["export-embeddings", "--checkpoint", str(run / "checkpoint"),
                 "--data", str(dataset_dir), "--out", str(out2)]) == 0
    assert (out / "embeddings.bin").read_bytes() == (out2 / "embeddings.bin").read_bytes()


def test_export_dataset_mismatch_exits_3(dataset_dir, config_file, tmp_path):
    run = tmp_path / "run"
    assert main(["train", "--data", str(dataset_dir), "--out", str(run),
                 "--config", str(config_file), "--seed", "4"]) == 0
    other = tmp_path / "other"
    assert main(["synth", "--out", str(other), "--instances", "20",
                 "--clusters", "2", "--view-dims", "7,9", "--seed", "0"]) == 0
    assert main(["export-embeddings", "--checkpoint", str(run / "checkpoint"),
                 "--data", str(other), "--out", str(tmp_path / "e")]) == 3


# ----------------------------------------------------------------- baseline

def test_baseline_row_tagged_meanfill(dataset_dir, tmp_path):
    out = tmp_path / "base"
    code = main(["baseline", "--data", str(dataset_dir), "--out", str(out),
                 "--mr", "0.5", "--seed", "0"])
    assert code == 0
    _, rows = read_csv(out / "metrics.csv")
    assert len(rows) == 1
    assert rows[0][8] == "meanfill"


def test_baseline_mr_zero_equals_raw_concat_clustering(dataset_dir, tmp_path):
    from imvclust import evaluate, load_dataset, normalize
    out = tmp_path / "base0"
    assert main(["baseline", "--data", str(dataset_dir), "--out", str(out),
                 "--seed", "0"]) == 0
    _, rows = read_csv(out / "metrics.csv")
    ds, _ = normalize(load_dataset(dataset_dir))
    direct = evaluate(np.concatenate(ds.views, axis=1), ds.labels,
                      k=3, seed=0)
    assert float(rows[0][5]) == pytest.approx(direct.acc, abs=1e-6)


def test_missing_subcommand_exits_2():
    assert main([]) == 2
