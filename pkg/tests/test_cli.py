"""End-to-end tests of the command-line pipeline via real subprocesses."""

import json
import subprocess
import sys

import numpy as np
import pytest

from simnet.baselines import LinearModel
from simnet.dataio import load_checkpoint, read_feature_store


def run_cli(*argv, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "simnet", *map(str, argv)],
        capture_output=True, text=True, cwd=cwd,
    )


GEN_ARGS = ("gen", "--classes", 3, "--per-class", 8, "--dim", 8,
            "--sigma", 0.3, "--queries", 0.25)


@pytest.fixture(scope="module")
def store(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "bench.simf"
    proc = run_cli(*GEN_ARGS, "--out", path)
    assert proc.returncode == 0, proc.stderr
    return path


@pytest.fixture(scope="module")
def warmed(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "warm.ckpt"
    proc = run_cli("warmup", "--arch", "A", "--scale", 0.05, "--dim", 8,
                   "--pairs", 30000, "--val-pairs", 1000, "--out", path)
    assert proc.returncode == 0, proc.stderr
    return path


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


# ------------------------------------------------------------------------ gen


def test_gen_writes_default_sized_store(tmp_path):
    out = tmp_path / "default.simf"
    proc = run_cli("gen", "--out", out)
    assert proc.returncode == 0, proc.stderr
    ds = read_feature_store(out)
    assert ds.n_items == 600
    assert ds.feature_dim == 64


def test_gen_is_byte_deterministic(tmp_path):
    outs = [tmp_path / f"{i}.simf" for i in range(2)]
    for out in outs:
        assert run_cli(*GEN_ARGS, "--seed", 1, "--out", out).returncode == 0
    assert outs[0].read_bytes() == outs[1].read_bytes()
    assert (
        (tmp_path / "0.simf.queries").read_bytes()
        == (tmp_path / "1.simf.queries").read_bytes()
    )


def test_gen_emits_summary_and_manifest(store):
    summary = json.loads((store.parent / (store.name + ".summary.json")).read_text())
    assert summary["n_items"] == 24
    assert summary["n_queries"] == 6
    assert sum(summary["class_histogram"].values()) == 24
    assert summary["non_metric_structure"]["n_violations"] > 0

    manifest = json.loads((store.parent / (store.name + ".manifest.json")).read_text())
    assert manifest["command"] == "gen"
    assert str(store) in manifest["outputs"]
    assert manifest["config"]["per_class"] == 8


def test_gen_rejects_queries_with_singleton_classes(tmp_path):
    proc = run_cli("gen", "--per-class", 1, "--queries", 0.2,
                   "--out", tmp_path / "x.simf")
    assert proc.returncode == 2
    assert "per-class" in proc.stderr


def test_gen_rejects_bad_spec(tmp_path):
    proc = run_cli("gen", "--sigma", -1, "--out", tmp_path / "x.simf")
    assert proc.returncode == 2


# --------------------------------------------------------------------- warmup


def test_warmup_writes_loadable_checkpoint(warmed):
    model = load_checkpoint(warmed, expected_kind="simnet")
    assert model.feature_dim == 8
    assert model.arch.layer_dims() == [16, 48, 48, 1]


def test_warmup_reports_quality(warmed):
    # module-scope fixture already ran it; rerun cheaply for the stdout shape
    proc = run_cli("warmup", "--arch", "A", "--scale", 0.05, "--dim", 8,
                   "--pairs", 0, "--val-pairs", 500, "--out", warmed.parent / "w0.ckpt")
    assert proc.returncode == 0
    assert "0 pairs" in proc.stdout
    assert "MSE" in proc.stdout


def test_warmup_divergence_exits_nonzero(tmp_path):
    proc = run_cli("warmup", "--arch", "A", "--scale", 0.05, "--dim", 8,
                   "--pairs", 30000, "--lr", 90.0, "--out", tmp_path / "w.ckpt")
    assert proc.returncode == 1
    assert "diverged" in proc.stderr
    assert not (tmp_path / "w.ckpt").exists()


# ---------------------------------------------------------------------- train


def test_train_plain_and_refined(store, warmed, tmp_path):
    plain = tmp_path / "plain.ckpt"
    proc = run_cli("train", "--store", store, "--model-in", warmed,
                   "--delta", 0.4, "--pairs", 300, "--out", plain)
    assert proc.returncode == 0, proc.stderr
    log = read_jsonl(tmp_path / "plain.ckpt.log.jsonl")
    assert {r["phase"] for r in log} == {"train"}

    refined = tmp_path / "refined.ckpt"
    proc = run_cli("train", "--store", store, "--model-in", warmed,
                   "--delta", 0.4, "--pairs", 300, "--refine", "--pool-size", 12,
                   "--out", refined)
    assert proc.returncode == 0, proc.stderr
    phases = [r["phase"] for r in read_jsonl(tmp_path / "refined.ckpt.log.jsonl")]
    assert phases.count("base") >= 1
    assert phases.count("refine") >= 1
    assert load_checkpoint(refined, expected_kind="simnet").feature_dim == 8


def test_train_checkpoints_deterministic(store, warmed, tmp_path):
    outs = [tmp_path / f"d{i}.ckpt" for i in range(2)]
    for out in outs:
        proc = run_cli("train", "--store", store, "--model-in", warmed,
                       "--pairs", 200, "--seed", 3, "--out", out)
        assert proc.returncode == 0, proc.stderr
    assert outs[0].read_bytes() == outs[1].read_bytes()


def test_train_linear_family(store, tmp_path):
    out = tmp_path / "lin.ckpt"
    proc = run_cli("train", "--store", store, "--family", "linear",
                   "--pairs", 200, "--out", out)
    assert proc.returncode == 0, proc.stderr
    assert isinstance(load_checkpoint(out, expected_kind="linear"), LinearModel)


def test_train_usage_errors(store, warmed, tmp_path):
    proc = run_cli("train", "--store", store, "--family", "linear", "--refine",
                   "--out", tmp_path / "x.ckpt")
    assert proc.returncode == 2
    proc = run_cli("train", "--store", store, "--out", tmp_path / "x.ckpt")
    assert proc.returncode == 2
    assert "--model-in" in proc.stderr


def test_train_dim_mismatch_fails(warmed, tmp_path):
    other = tmp_path / "other.simf"
    assert run_cli("gen", "--classes", 3, "--per-class", 4, "--dim", 16,
                   "--out", other).returncode == 0
    proc = run_cli("train", "--store", other, "--model-in", warmed,
                   "--out", tmp_path / "x.ckpt")
    assert proc.returncode == 1
    assert "8-d" in proc.stderr or "16-d" in proc.stderr


# ----------------------------------------------------------------- eval


def test_eval_cosine_report(store, tmp_path):
    report = tmp_path / "eval.jsonl"
    proc = run_cli("eval", "--store", store, "--scorer", "cosine",
                   "--report", report)
    assert proc.returncode == 0, proc.stderr
    records = read_jsonl(report)
    assert records[-1]["scorer"] == "cosine"
    assert 0.0 <= records[-1]["map"] <= 1.0
    assert records[-1]["queries"] == 6
    per_query = [r["ap"] for r in records[:-1]]
    assert np.isclose(np.mean(per_query), records[-1]["map"])
    assert "cosine" in proc.stdout and "mAP" in proc.stdout


def test_eval_perfect_duplicate_store_scores_one(tmp_path):
    from simnet.dataio import write_feature_store
    from simnet.retrieval import Dataset

    rng = np.random.default_rng(0)
    protos = rng.standard_normal((4, 8))
    feats = np.repeat(protos, 2, axis=0)
    ds = Dataset(feats, np.repeat(np.arange(4), 2), [str(i) for i in range(8)],
                 query_indices=np.array([0, 2, 4, 6]), name="dups")
    path = tmp_path / "dups.simf"
    write_feature_store(path, ds)
    report = tmp_path / "r.jsonl"
    proc = run_cli("eval", "--store", path, "--scorer", "cosine", "--report", report)
    assert proc.returncode == 0, proc.stderr
    assert read_jsonl(report)[-1]["map"] == 1.0


def test_eval_unknown_scorer_is_usage_error(store, tmp_path):
    proc = run_cli("eval", "--store", store, "--scorer", "sorcery",
                   "--report", tmp_path / "r.jsonl")
    assert proc.returncode == 2
    assert "unknown scorer" in proc.stderr


def test_eval_missing_store_fails(tmp_path):
    proc = run_cli("eval", "--store", tmp_path / "absent.simf", "--scorer", "cosine",
                   "--report", tmp_path / "r.jsonl")
    assert proc.returncode == 1


def test_eval_store_without_queries_fails(tmp_path):
    out = tmp_path / "noq.simf"
    assert run_cli("gen", "--classes", 3, "--per-class", 4, "--dim", 8,
                   "--out", out).returncode == 0
    proc = run_cli("eval", "--store", out, "--scorer", "cosine",
                   "--report", tmp_path / "r.jsonl")
    assert proc.returncode == 1
    assert "queries" in proc.stderr


# -------------------------------------------------------------------- compare


def test_compare_rows_and_determinism(store, warmed, tmp_path):
    reports = [tmp_path / f"cmp{i}.jsonl" for i in range(2)]
    for report in reports:
        proc = run_cli("compare", "--store", store,
                       "--scorers", "cosine", "euclid", "random:3",
                       "--report", report)
        assert proc.returncode == 0, proc.stderr
    rows = [read_jsonl(p) for p in reports]
    # identical up to the explicitly timing-marked field
    for a, b in zip(*rows):
        a.pop("elapsed_seconds", None)
        b.pop("elapsed_seconds", None)
        assert a == b
    summary = [r for r in rows[0] if "map" in r]
    assert [r["scorer"] for r in summary] == ["cosine", "euclid", "random:3"]


def test_compare_single_scorer_degenerates(store, tmp_path):
    report = tmp_path / "one.jsonl"
    proc = run_cli("compare", "--store", store, "--scorers", "cosine",
                   "--report", report)
    assert proc.returncode == 0, proc.stderr
    assert sum("map" in r for r in read_jsonl(report)) == 1


# ------------------------------------------------------------------- manifest


def test_manifest_hashes_are_real(store):
    manifest = json.loads((store.parent / (store.name + ".manifest.json")).read_text())
    import hashlib

    digest = hashlib.sha256(store.read_bytes()).hexdigest()
    assert manifest["outputs"][str(store)] == digest


def test_threads_flag_accepted(store, tmp_path):
    proc = run_cli("--threads", 1, "eval", "--store", store, "--scorer", "cosine",
                   "--report", tmp_path / "r.jsonl")
    assert proc.returncode == 0, proc.stderr
    proc = run_cli("--threads", 0, "eval", "--store", store, "--scorer", "cosine",
                   "--report", tmp_path / "r.jsonl")
    assert proc.returncode == 2
