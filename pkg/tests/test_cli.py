import json
import subprocess
import sys

import numpy as np
import pytest

from probebench import EmbeddingDataset, ModelParams, load_binary, load_csv, save_binary
from probebench.cli import main

from conftest import gaussian_pair


@pytest.fixture(scope="module")
def emb_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    train, test = gaussian_pair(30, 20, n_classes=3, dim=6, spread=1.0, seed=41)
    save_binary(train, root / "train.emb1")
    save_binary(test, root / "test.emb1")
    return root, train, test


def run_cli(*argv):
    return main([str(a) for a in argv])


class TestValidate:
    def test_valid_pair(self, emb_files, capsys):
        root, train, test = emb_files
        rc = run_cli("validate", "--train", root / "train.emb1", "--test", root / "test.emb1")
        out = capsys.readouterr().out
        assert rc == 0
        assert "RESULT: ok" in out
        assert f"n={train.n}" in out and "K=3" in out

    def test_catalog_mismatch_fails_named_check(self, emb_files, tmp_path, capsys):
        root, train, test = emb_files
        other = EmbeddingDataset(test.data, test.labels, ["a", "b", "c"], "test")
        save_binary(other, tmp_path / "other.emb1")
        rc = run_cli("validate", "--train", root / "train.emb1", "--test", tmp_path / "other.emb1")
        out = capsys.readouterr().out
        assert rc == 1
        assert "check catalog-match: FAIL" in out

    def test_unnormalized_rows_fail_with_worst_offender(self, emb_files, tmp_path, capsys):
        root, train, _ = emb_files
        scaled = EmbeddingDataset(train.data * 2.0, train.labels, train.classes, "train")
        save_binary(scaled, tmp_path / "scaled.emb1")
        rc = run_cli("validate", "--train", tmp_path / "scaled.emb1", "--test", root / "test.emb1")
        out = capsys.readouterr().out
        assert rc == 1
        assert "check row-norm-train: FAIL" in out
        assert "worst row" in out

    def test_missing_file(self, emb_files, capsys):
        root, *_ = emb_files
        rc = run_cli("validate", "--train", root / "nope.emb1", "--test", root / "test.emb1")
        assert rc == 1
        assert "file-format-train: FAIL" in capsys.readouterr().out

    def test_manifest_check(self, emb_files, tmp_path, capsys):
        root, *_ = emb_files
        from probebench import build_manifest

        manifest = build_manifest(
            "blobs",
            {"train": root / "train.emb1", "test": root / "test.emb1"},
            base_dir=root,
        )
        man_path = root / "manifest.json"
        man_path.write_text(manifest.to_json())
        rc = run_cli("validate", "--train", root / "train.emb1",
                     "--test", root / "test.emb1", "--manifest", man_path)
        assert rc == 0
        assert "check manifest: ok" in capsys.readouterr().out


class TestIngestExport:
    def test_csv_round_trip_through_cli(self, tmp_path, capsys):
        csv_path = tmp_path / "toy.csv"
        csv_path.write_text(
            "label,f0,f1\nshark,0.6,0.8\nturtle,1.0,0.0\nshark,0.0,1.0\n"
        )
        out_path = tmp_path / "toy.emb1"
        assert run_cli("ingest-csv", "--csv", csv_path, "--out", out_path,
                       "--split-tag", "train") == 0
        ds = load_binary(out_path)
        assert ds.classes == ["shark", "turtle"]

        export_path = tmp_path / "export.csv"
        assert run_cli("export-embeddings", "--data", out_path, "--out", export_path) == 0
        again = load_csv(export_path)
        assert again == EmbeddingDataset(ds.data, ds.labels, ds.classes, "unsplit")

    def test_ingest_normalize(self, tmp_path):
        csv_path = tmp_path / "raw.csv"
        csv_path.write_text("label,f0,f1\na,3,4\nb,5,12\n")
        out_path = tmp_path / "raw.emb1"
        assert run_cli("ingest-csv", "--csv", csv_path, "--out", out_path, "--normalize") == 0
        ds = load_binary(out_path)
        assert np.allclose(np.linalg.norm(ds.data, axis=1), 1.0, atol=1e-6)

    def test_ingest_writes_manifest(self, tmp_path):
        csv_path = tmp_path / "m.csv"
        csv_path.write_text("label,f0\na,1\nb,2\n")
        assert run_cli("ingest-csv", "--csv", csv_path, "--out", tmp_path / "m.emb1",
                       "--manifest", tmp_path / "m.manifest.json") == 0
        doc = json.loads((tmp_path / "m.manifest.json").read_text())
        assert doc["dataset_name"] == "m"
        assert doc["dim"] == 1

    def test_export_empty_dataset_header_only(self, tmp_path):
        ds = EmbeddingDataset(np.empty((0, 3)), np.array([], dtype=int), ["a"], "unsplit")
        save_binary(ds, tmp_path / "empty.emb1")
        out = tmp_path / "empty.csv"
        assert run_cli("export-embeddings", "--data", tmp_path / "empty.emb1", "--out", out) == 0
        assert out.read_text().splitlines() == ["label,f0,f1,f2"]

    def test_parse_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("label,f0\na,oops\n")
        rc = run_cli("ingest-csv", "--csv", bad, "--out", tmp_path / "x.emb1")
        assert rc == 3


class TestTrain:
    def test_train_and_save_model(self, emb_files, tmp_path, capsys):
        root, train, _ = emb_files
        model_path = tmp_path / "model.json"
        rc = run_cli("train", "--train", root / "train.emb1", "--C", 10.0,
                     "--save-model", model_path)
        out = capsys.readouterr().out
        assert rc == 0
        assert "status=converged" in out
        params = ModelParams.from_json(model_path.read_text())
        assert params.classes == tuple(train.classes)
        assert params.W.shape == (3, 6)

    def test_train_with_budget(self, emb_files, capsys):
        root, *_ = emb_files
        rc = run_cli("train", "--train", root / "train.emb1", "--budget", 2, "--seed", 5)
        out = capsys.readouterr().out
        assert rc == 0
        assert "6 training rows" in out


class TestSweepAndReport:
    def test_minimal_sweep(self, emb_files, tmp_path, capsys):
        root, train, _ = emb_files
        out_dir = tmp_path / "out"
        rc = run_cli("sweep", "--train", root / "train.emb1", "--test", root / "test.emb1",
                     "--budgets", "1", "--seeds", "0..0", "--out-dir", out_dir)
        assert rc == 0
        doc = json.loads((out_dir / "sweep.json").read_text())
        assert len(doc["runs"]) == 1
        assert doc["runs"][0]["condition"] == "budget_1"

    def test_sweep_with_full_appends_single_run(self, emb_files, tmp_path):
        root, *_ = emb_files
        out_dir = tmp_path / "out"
        rc = run_cli("sweep", "--train", root / "train.emb1", "--test", root / "test.emb1",
                     "--budgets", "1,2", "--seeds", "0..2", "--full", "--out-dir", out_dir)
        assert rc == 0
        doc = json.loads((out_dir / "sweep.json").read_text())
        assert len(doc["runs"]) == 2 * 3 + 1
        assert doc["runs"][-1]["condition"] == "full"
        agg = {a["condition"]: a for a in doc["aggregates"]}
        assert agg["full"]["single_run"] is True

    def test_sweep_config_file_with_flag_override(self, emb_files, tmp_path):
        root, *_ = emb_files
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"budgets": [1, 2], "seeds": "0..1", "C": 1.0}))
        out_dir = tmp_path / "out"
        rc = run_cli("sweep", "--train", root / "train.emb1", "--test", root / "test.emb1",
                     "--config", cfg_path, "--budgets", "2", "--out-dir", out_dir)
        assert rc == 0
        doc = json.loads((out_dir / "sweep.json").read_text())
        assert doc["config"]["conditions"] == ["budget_2"]  # flag overrode the file
        assert doc["config"]["probe"]["C"] == 1.0  # file value kept

    def test_sweep_without_conditions_is_usage_error(self, emb_files, tmp_path, capsys):
        root, *_ = emb_files
        rc = run_cli("sweep", "--train", root / "train.emb1", "--test", root / "test.emb1",
                     "--out-dir", tmp_path / "out")
        assert rc == 2

    def test_bad_seed_range_is_usage_error(self, emb_files, tmp_path):
        root, *_ = emb_files
        rc = run_cli("sweep", "--train", root / "train.emb1", "--test", root / "test.emb1",
                     "--budgets", "1", "--seeds", "zero..ten", "--out-dir", tmp_path / "out")
        assert rc == 2

    def test_jobs_env_var_honored(self, emb_files, tmp_path, monkeypatch):
        root, *_ = emb_files
        monkeypatch.setenv("PROBEBENCH_JOBS", "2")
        rc = run_cli("sweep", "--train", root / "train.emb1", "--test", root / "test.emb1",
                     "--budgets", "1", "--seeds", "0..1", "--out-dir", tmp_path / "out")
        assert rc == 0
        assert (tmp_path / "out" / "sweep.json").exists()

    def test_unknown_config_key_is_usage_error(self, emb_files, tmp_path):
        root, *_ = emb_files
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"budgets": [1], "typo": True}))
        rc = run_cli("sweep", "--train", root / "train.emb1", "--test", root / "test.emb1",
                     "--config", cfg_path, "--out-dir", tmp_path / "out")
        assert rc == 2

    def test_report_against_matching_baseline(self, emb_files, tmp_path):
        root, train, _ = emb_files
        out_dir = tmp_path / "out"
        assert run_cli("sweep", "--train", root / "train.emb1", "--test", root / "test.emb1",
                       "--budgets", "2", "--seeds", "0..1", "--full",
                       "--out-dir", out_dir) == 0
        doc = json.loads((out_dir / "sweep.json").read_text())
        full_agg = [a for a in doc["aggregates"] if a["condition"] == "full"][0]
        baseline = {
            "name": "ours-as-baseline",
            "per_class_f1": {c: full_agg["per_class_f1"][c]["mean"] for c in train.classes},
            "macro_f1": full_agg["macro_f1"]["mean"],
        }
        base_path = tmp_path / "baseline.json"
        base_path.write_text(json.dumps(baseline))
        rep_dir = tmp_path / "report"
        rc = run_cli("report", "--runs", out_dir / "sweep.json", "--baseline", base_path,
                     "--out-dir", rep_dir, "--condition", "full")
        assert rc == 0
        rows = (rep_dir / "delta_f1.csv").read_text().splitlines()[1:]
        assert all(float(line.split(",")[1]) == 0.0 for line in rows)
        table = (rep_dir / "per_class_report.csv").read_text().splitlines()
        assert table[-1].startswith("MACRO,")

    def test_report_catalog_mismatch(self, emb_files, tmp_path):
        root, *_ = emb_files
        out_dir = tmp_path / "out"
        assert run_cli("sweep", "--train", root / "train.emb1", "--test", root / "test.emb1",
                       "--budgets", "1", "--seeds", "0..0", "--out-dir", out_dir) == 0
        base_path = tmp_path / "baseline.json"
        base_path.write_text(json.dumps(
            {"name": "other", "per_class_f1": {"zzz": 1.0}, "macro_f1": 1.0}
        ))
        rc = run_cli("report", "--runs", out_dir / "sweep.json", "--baseline", base_path,
                     "--out-dir", tmp_path / "rep")
        assert rc == 3


class TestEntryPoint:
    def test_module_invocation(self, emb_files):
        root, *_ = emb_files
        proc = subprocess.run(
            [sys.executable, "-m", "probebench.cli", "validate",
             "--train", str(root / "train.emb1"), "--test", str(root / "test.emb1")],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "RESULT: ok" in proc.stdout

    def test_usage_error_exit_code(self):
        proc = subprocess.run(
            [sys.executable, "-m", "probebench.cli", "no-such-command"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2
