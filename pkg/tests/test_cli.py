import json

import numpy as np
import pytest

from slrl.cli import main
from slrl.data import load_dataset


def run_cli(*args):
    return main(list(args))


def test_train_synth_smoke(tmp_path):
    out = tmp_path / "run"
    code = run_cli(
        "train", "--synth", "3x10", "--views", "2", "--seed", "7",
        "--latent-dim", "8", "--epochs", "10", "--pretrain-epochs", "5",
        "--k", "3", "--heads", "2", "--out", str(out),
    )
    assert code == 0
    for name in ("run_manifest.json", "loss_log.csv", "metrics.txt", "predictions.txt",
                 "h_pca.csv", "ht_pca.csv"):
        assert (out / name).exists(), name
    assert (out / "checkpoint" / "index.txt").exists()
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["command"] == "train"
    assert manifest["config"]["latent_dim"] == 8
    assert "completed_at" in manifest


def test_train_rerun_reproduces_metrics(tmp_path):
    args = (
        "train", "--synth", "3x10", "--views", "2", "--seed", "3",
        "--latent-dim", "8", "--epochs", "8", "--pretrain-epochs", "4",
        "--k", "3", "--heads", "2",
    )
    assert run_cli(*args, "--out", str(tmp_path / "a")) == 0
    assert run_cli(*args, "--out", str(tmp_path / "b")) == 0
    assert (tmp_path / "a" / "metrics.txt").read_text() == (tmp_path / "b" / "metrics.txt").read_text()
    assert (tmp_path / "a" / "loss_log.csv").read_text() == (tmp_path / "b" / "loss_log.csv").read_text()


def test_train_requires_exactly_one_source(tmp_path):
    assert run_cli("train", "--out", str(tmp_path / "x")) == 2
    assert (
        run_cli("train", "--data", "d", "--synth", "3x5", "--out", str(tmp_path / "y")) == 2
    )


def test_synth_then_train_from_directory(tmp_path):
    data_dir = tmp_path / "data"
    assert run_cli("synth", "--synth", "3x8", "--views", "2", "--seed", "1",
                   "--out", str(data_dir)) == 0
    ds = load_dataset(data_dir)
    assert ds.n_samples == 24 and ds.labels is not None
    out = tmp_path / "run"
    code = run_cli(
        "train", "--data", str(data_dir), "--latent-dim", "8", "--epochs", "5",
        "--pretrain-epochs", "3", "--k", "3", "--heads", "2", "--out", str(out),
    )
    assert code == 0


def test_eval_ground_truth_is_perfect(tmp_path):
    labels = tmp_path / "labels.txt"
    labels.write_text("0\n0\n1\n1\n2\n2\n")
    code = run_cli("eval", "--pred", str(labels), "--truth", str(labels))
    assert code == 0


def test_eval_reports_written(tmp_path, capsys):
    pred = tmp_path / "pred.txt"
    truth = tmp_path / "truth.txt"
    pred.write_text("0\n0\n1\n1\n")
    truth.write_text("0\n1\n1\n1\n")
    assert run_cli("eval", "--pred", str(pred), "--truth", str(truth),
                   "--out", str(tmp_path / "m")) == 0
    text = (tmp_path / "m" / "metrics.txt").read_text()
    assert "acc 0.750000" in text
    printed = capsys.readouterr().out
    assert "acc 0.750000" in printed


def test_eval_mismatched_lengths_usage_error(tmp_path):
    pred = tmp_path / "pred.txt"
    truth = tmp_path / "truth.txt"
    pred.write_text("0\n1\n")
    truth.write_text("0\n1\n1\n")
    assert run_cli("eval", "--pred", str(pred), "--truth", str(truth)) == 2


def test_ablate_missing_dataset_usage_error(tmp_path):
    assert run_cli("ablate", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "o")) == 2


def test_ablate_emits_three_rows(tmp_path):
    out = tmp_path / "ab"
    code = run_cli(
        "ablate", "--synth", "3x8", "--views", "2", "--seed", "2",
        "--latent-dim", "8", "--epochs", "8", "--pretrain-epochs", "4",
        "--k", "3", "--heads", "2", "--out", str(out),
    )
    assert code == 0
    lines = (out / "ablation.csv").read_text().strip().splitlines()
    assert lines[0] == "mode,acc_mean,acc_std"
    assert len(lines) == 4
    assert lines[1].startswith("(a) X-H,")
    assert lines[2].startswith("(b) X-H-Ht,")
    assert lines[3].startswith("(c) X-H-Ht-P,")


def test_sweep_single_cell_matches_train(tmp_path):
    common = (
        "--synth", "3x10", "--views", "2", "--seed", "5", "--latent-dim", "8",
        "--epochs", "8", "--pretrain-epochs", "4", "--k", "3", "--heads", "2",
    )
    assert run_cli("sweep", *common, "--gamma-grid", "10", "--k-grid", "3",
                   "--out", str(tmp_path / "sw")) == 0
    assert run_cli("train", *common, "--gamma", "10", "--out", str(tmp_path / "tr")) == 0
    sweep_lines = (tmp_path / "sw" / "sweep.csv").read_text().strip().splitlines()
    assert sweep_lines[0].startswith("gamma,k,acc_mean")
    acc_sweep = float(sweep_lines[1].split(",")[2])
    metrics = dict(
        line.split() for line in (tmp_path / "tr" / "metrics.txt").read_text().strip().splitlines()
    )
    assert acc_sweep == pytest.approx(float(metrics["acc"]), abs=1e-6)


def test_sweep_empty_grid_usage_error(tmp_path):
    assert run_cli("sweep", "--synth", "3x8", "--gamma-grid", "", "--k-grid", "3",
                   "--out", str(tmp_path / "s")) == 2


def test_gradcheck_exit_code_zero():
    assert run_cli("gradcheck", "--seed", "0") == 0


def test_gradcheck_threshold_controls_exit():
    # an absurdly tight tolerance must flip the exit code
    assert run_cli("gradcheck", "--seed", "0", "--tol", "1e-16") == 1


def test_bad_synth_spec_usage_error(tmp_path):
    assert run_cli("train", "--synth", "banana", "--out", str(tmp_path / "x")) == 2


def test_train_dumps_graph_and_distributions(tmp_path):
    out = tmp_path / "run"
    run_cli(
        "train", "--synth", "3x6", "--views", "2", "--seed", "1",
        "--latent-dim", "8", "--epochs", "4", "--pretrain-epochs", "2",
        "--k", "3", "--heads", "2", "--out", str(out),
    )
    q = np.loadtxt(out / "q.csv", delimiter=",")
    p = np.loadtxt(out / "p.csv", delimiter=",")
    assert q.shape == (18, 3) and p.shape == (18, 3)
    assert np.max(np.abs(q.sum(axis=1) - 1.0)) < 1e-6
    for line in (out / "graph.txt").read_text().strip().splitlines():
        i, j, _ = line.split()
        assert int(i) < int(j)


def test_train_split_fraction(tmp_path):
    out = tmp_path / "run"
    code = run_cli(
        "train", "--synth", "3x10", "--views", "2", "--seed", "2", "--split", "0.8",
        "--latent-dim", "8", "--epochs", "4", "--pretrain-epochs", "2",
        "--k", "3", "--heads", "2", "--out", str(out),
    )
    assert code == 0
    preds = np.loadtxt(out / "predictions.txt")
    assert preds.shape[0] == 24  # 80% of 30
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["dataset"]["split"] == 0.8


def test_projection_csv_shape(tmp_path):
    out = tmp_path / "run"
    run_cli(
        "train", "--synth", "3x6", "--views", "2", "--seed", "9",
        "--latent-dim", "8", "--epochs", "4", "--pretrain-epochs", "2",
        "--k", "3", "--heads", "2", "--out", str(out),
    )
    lines = (out / "h_pca.csv").read_text().strip().splitlines()
    assert lines[0] == "x,y,label"
    assert len(lines) == 1 + 18
