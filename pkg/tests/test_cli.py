import json
import subprocess
import sys

import numpy as np
import pytest
from scipy import sparse

from mcr import (
    Dataset,
    SimDesign,
    default_design,
    generate,
    loglik_limited,
    read_counts,
    read_dataset,
    read_metrics_csv,
    read_model,
    write_counts,
    write_dataset,
)
from mcr.cli import main

FAST = ["--n-starts", "2", "--max-iters", "200"]


def simulate_files(tmp_path, n=150, p=10, seed=3, reps=1):
    out = tmp_path / "sim"
    rc = main(
        ["simulate", "--n", str(n), "--p", str(p), "--reps", str(reps),
         "--seed", str(seed), "--out", str(out)]
    )
    assert rc == 0
    return out


def test_simulate_writes_dataset_and_truth(tmp_path, capsys):
    out = simulate_files(tmp_path, reps=2)
    capsys.readouterr()
    for rep in (1, 2):
        data = read_dataset(out / f"rep{rep:04d}.dataset.json")
        assert data.n == 150 and data.p == 10 and data.q == 8
        assert data.true_labels is not None
    assert (out / "rep0001.truth.json").exists()


def test_simulate_regeneration_is_byte_identical(tmp_path):
    a = simulate_files(tmp_path / "a", seed=11)
    b = simulate_files(tmp_path / "b", seed=11)
    assert (a / "rep0001.dataset.json").read_bytes() == (
        b / "rep0001.dataset.json"
    ).read_bytes()
    assert (a / "rep0001.truth.json").read_bytes() == (
        b / "rep0001.truth.json"
    ).read_bytes()


def test_seed_falls_back_to_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MCR_SEED", "11")
    env_dir = tmp_path / "env"
    rc = main(["simulate", "--n", "40", "--p", "5", "--out", str(env_dir)])
    assert rc == 0
    flag_dir = simulate_files(tmp_path / "flag", n=40, p=5, seed=11)
    assert (env_dir / "rep0001.dataset.json").read_bytes() == (
        flag_dir / "rep0001.dataset.json"
    ).read_bytes()


def test_fit_writes_model_and_report(tmp_path, capsys):
    out = simulate_files(tmp_path)
    model_path = tmp_path / "model.json"
    report_path = tmp_path / "report.txt"
    rc = main(
        ["fit", "--data", str(out / "rep0001.dataset.json"), "--k", "2",
         "--out", str(model_path), "--report", str(report_path), "--seed", "0"]
        + FAST
    )
    assert rc == 0
    text = capsys.readouterr().out
    assert "n=150 p=10 q=8 K=2" in text
    assert "class1" in text and "x8" in text and "noise_var" in text
    assert report_path.read_text().strip() in text
    model = read_model(model_path)
    assert model.final.k == 2 and model.final.q == 8


def test_fit_report_includes_truth_errors(tmp_path, capsys):
    out = simulate_files(tmp_path, n=400, p=30, seed=5)
    rc = main(
        ["fit", "--data", str(out / "rep0001.dataset.json"), "--k", "5",
         "--truth", str(out / "rep0001.truth.json"), "--seed", "0"] + FAST
    )
    assert rc == 0
    text = capsys.readouterr().out
    assert "errors vs truth:" in text
    assert "err_gamma=" in text and "maxerr_response=" in text


def test_fit_truth_with_other_k_is_skipped(tmp_path, capsys):
    out = simulate_files(tmp_path)
    rc = main(
        ["fit", "--data", str(out / "rep0001.dataset.json"), "--k", "2",
         "--truth", str(out / "rep0001.truth.json"), "--seed", "0"] + FAST
    )
    assert rc == 0
    assert "skipped (K=2 differs from truth 5)" in capsys.readouterr().out


def test_fit_requires_k_or_selection(tmp_path, capsys):
    out = simulate_files(tmp_path)
    rc = main(["fit", "--data", str(out / "rep0001.dataset.json")])
    assert rc == 2
    assert "provide --k or --select-k" in capsys.readouterr().err


def test_reloaded_model_reproduces_the_likelihood(tmp_path, capsys):
    out = simulate_files(tmp_path)
    model_path = tmp_path / "model.json"
    rc = main(
        ["fit", "--data", str(out / "rep0001.dataset.json"), "--k", "3",
         "--out", str(model_path), "--seed", "0"] + FAST
    )
    assert rc == 0
    capsys.readouterr()
    model = read_model(model_path)
    data = read_dataset(out / "rep0001.dataset.json")
    recomputed = loglik_limited(data, model.params.mixture)
    assert recomputed == pytest.approx(model.trace.loglik_per_iter[-1], rel=1e-12)


def test_select_k_subcommand_reports_bic(tmp_path, capsys):
    rng_dir = tmp_path / "sim"
    rng_dir.mkdir()
    # two well-separated classes so selection is quick and unambiguous
    rng = np.random.default_rng(0)
    n = 250
    labels = (rng.random(n) < 0.5).astype(int)
    x = rng.standard_normal((n, 1))
    y = np.where(labels == 0, -3.0, 3.0) + x[:, 0] + 0.6 * rng.standard_normal(n)
    probs = np.where(labels[:, None] == 0, 0.15, 0.75)
    z = sparse.csc_array((rng.random((n, 15)) < probs).astype(np.int8))
    path = rng_dir / "data.json"
    write_dataset(path, Dataset(y=y, x=x, z=z))
    model_path = tmp_path / "model.json"
    rc = main(
        ["select-k", "--data", str(path), "--k-max", "3", "--out", str(model_path),
         "--seed", "0"] + FAST
    )
    assert rc == 0
    text = capsys.readouterr().out
    assert "K=2 (selected, k_max=3)" in text
    assert "bic: K=1:" in text
    model = read_model(model_path)
    assert model.k_hat == 2 and model.bic_values.shape == (3,)


def test_predict_writes_csv_and_r2(tmp_path, capsys):
    design = SimDesign(n=300, p=60, seed=4, noise_var=0.01)
    data, _ = generate(design)
    data_path = tmp_path / "data.json"
    write_dataset(data_path, data)
    model_path = tmp_path / "model.json"
    rc = main(
        ["fit", "--data", str(data_path), "--k", "5", "--out", str(model_path),
         "--seed", "1", "--n-starts", "3"]
    )
    assert rc == 0
    pred_path = tmp_path / "pred.csv"
    rc = main(
        ["predict", "--model", str(model_path), "--data", str(data_path),
         "--out", str(pred_path)]
    )
    assert rc == 0
    text = capsys.readouterr().out
    assert "out-of-sample R^2" in text
    lines = pred_path.read_text().splitlines()
    assert lines[0] == "index,prediction"
    assert len(lines) == 301
    preds = np.array([float(l.split(",")[1]) for l in lines[1:]])
    # near-noiseless generation: feature-based prediction almost interpolates
    resid = data.y - preds
    r2 = 100.0 * (1.0 - resid.var() / data.y.var())
    assert r2 > 99.0


def test_predict_rejects_mismatched_data(tmp_path, capsys):
    out = simulate_files(tmp_path)
    model_path = tmp_path / "model.json"
    rc = main(
        ["fit", "--data", str(out / "rep0001.dataset.json"), "--k", "2",
         "--out", str(model_path), "--seed", "0"] + FAST
    )
    assert rc == 0
    other, _ = generate(default_design(n=20, p=3, seed=9))
    other_path = tmp_path / "other.json"
    write_dataset(other_path, other)
    rc = main(["predict", "--model", str(model_path), "--data", str(other_path)])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_harness_cli_writes_stable_csv(tmp_path, capsys):
    args = ["harness", "--n", "120,150", "--p", "8", "--reps", "1",
            "--metrics", "initial", "--seed", "2"] + FAST
    out1 = tmp_path / "m1.csv"
    out2 = tmp_path / "m2.csv"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2), "--jobs", "2"]) == 0
    capsys.readouterr()
    assert out1.read_bytes() == out2.read_bytes()
    rows = read_metrics_csv(out1)
    assert len(rows) == 2 * 8
    assert {r[0] for r in rows} == {120, 150}


def test_harness_cli_rejects_mismatched_grids(capsys):
    rc = main(["harness", "--n", "100,200", "--p", "5,6,7", "--out", "x.csv"])
    assert rc == 2
    assert "must align" in capsys.readouterr().err


def test_split_features_cli(tmp_path, capsys):
    rng = np.random.default_rng(1)
    n = 250
    x = rng.standard_normal((n, 2))
    zmat = (rng.random((n, 10)) < 0.4).astype(np.int8)
    y = x @ [1.0, -0.5] + 3.0 * zmat[:, 4] + 0.8 * rng.standard_normal(n)
    path = tmp_path / "data.json"
    write_dataset(path, Dataset(y=y, x=x, z=sparse.csc_array(zmat)))
    out_path = tmp_path / "split.json"
    report_path = tmp_path / "split.txt"
    rc = main(
        ["split-features", "--data", str(path), "--out", str(out_path),
         "--report", str(report_path)]
    )
    assert rc == 0
    text = capsys.readouterr().out
    assert "selected 1 column(s): [4]" in text
    moved = read_dataset(out_path)
    assert moved.q == 3 and moved.p == 9
    np.testing.assert_array_equal(moved.x[:, 2], zmat[:, 4])
    assert "bic trace:" in report_path.read_text()


def test_binarize_cli(tmp_path, capsys):
    rng = np.random.default_rng(2)
    counts = sparse.csc_array(rng.poisson(1.0, size=(30, 12)))
    counts_path = tmp_path / "counts.json"
    write_counts(counts_path, counts)
    stop_path = tmp_path / "stop.txt"
    stop_path.write_text("3\n7\n")
    out_path = tmp_path / "z.json"
    kept_path = tmp_path / "kept.txt"
    rc = main(
        ["binarize", "--counts", str(counts_path), "--min-freq", "5",
         "--stoplist", str(stop_path), "--out", str(out_path),
         "--kept-out", str(kept_path)]
    )
    assert rc == 0
    assert "of 12 terms" in capsys.readouterr().out
    z = read_counts(out_path)
    dense = np.asarray(z.todense())
    assert set(np.unique(dense)) <= {0, 1}
    kept = [int(v) for v in kept_path.read_text().split()]
    totals = np.asarray(counts.sum(axis=0)).reshape(-1)
    assert kept == [j for j in range(12) if totals[j] > 5 and j not in (3, 7)]


def test_config_file_matches_explicit_flags(tmp_path, capsys):
    out = simulate_files(tmp_path)
    cfg = tmp_path / "mcr.cfg"
    cfg.write_text("n_starts = 2   # fewer chains\nmax_iters = 200\nseed = 4\n")
    m1 = tmp_path / "m1.json"
    m2 = tmp_path / "m2.json"
    data = str(out / "rep0001.dataset.json")
    assert main(["fit", "--data", data, "--k", "2", "--out", str(m1),
                 "--config", str(cfg)]) == 0
    assert main(["fit", "--data", data, "--k", "2", "--out", str(m2),
                 "--seed", "4"] + FAST) == 0
    capsys.readouterr()
    assert m1.read_bytes() == m2.read_bytes()


def test_config_file_syntax_error(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("this line has no equals sign\n")
    rc = main(["simulate", "--n", "10", "--p", "2", "--out", str(tmp_path / "o"),
               "--config", str(cfg)])
    assert rc == 4
    assert "error:" in capsys.readouterr().err


def test_missing_and_corrupt_files_exit_4(tmp_path, capsys):
    rc = main(["fit", "--data", str(tmp_path / "nope.json"), "--k", "2"])
    assert rc == 4
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    rc = main(["fit", "--data", str(bad), "--k", "2"])
    assert rc == 4
    capsys.readouterr()


def test_dataset_passed_as_model_exits_2(tmp_path, capsys):
    out = simulate_files(tmp_path, n=30, p=3)
    data = str(out / "rep0001.dataset.json")
    rc = main(["predict", "--model", data, "--data", data])
    assert rc == 2
    capsys.readouterr()


def test_unknown_arguments_exit_nonzero(capsys):
    assert main(["no-such-command"]) == 2
    capsys.readouterr()


def test_installed_entry_point_shows_help():
    proc = subprocess.run(
        [sys.executable, "-m", "mcr.cli", "--help"],
        capture_output=True, text=True, timeout=60,
    )
    assert proc.returncode == 0
    assert "simulate" in proc.stdout and "harness" in proc.stdout
