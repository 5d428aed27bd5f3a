"""Command-line surface and the evaluation harness behind it."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from gazeword.cli import main
from gazeword.datasets import read_samples
from gazeword.suite import (SuiteConfig, build_all_samples, make_split_spec,
                            render_table, run_suite, vocabulary_for_export)
from gazeword.synth import export_dataset, load_export
from gazeword.model import ModelConfig
from gazeword.training import TrainConfig


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    export_dataset(root / "data", seed=3, n_users=3, n_docs=3,
                   words_per_doc=60, noise_kinds=("tracker",))
    return root


@pytest.fixture(scope="module")
def built(data_dir):
    runner = CliRunner()
    r = runner.invoke(main, [
        "build-dataset", "--data", str(data_dir / "data"),
        "--kind", "tracker", "--out", str(data_dir / "samples.jsonl"),
        "--vocab", str(data_dir / "vocab.json"), "--json"])
    assert r.exit_code == 0, r.output
    return data_dir, json.loads(r.output)


class TestSynthCommand:
    def test_export_and_manifest_hash(self, tmp_path):
        runner = CliRunner()
        r = runner.invoke(main, [
            "synth", "--out", str(tmp_path / "d"), "--seed", "5",
            "--users", "2", "--docs", "2", "--words-per-doc", "60",
            "--kinds", "tracker", "--json"])
        assert r.exit_code == 0, r.output
        payload = json.loads(r.output)
        assert payload["counts"]["streams"] == 4
        assert len(payload["manifest_hash"]) == 16


class TestBuildDataset:
    def test_sidecar_and_samples(self, built):
        data_dir, sidecar = built
        assert sidecar["kind"] == "tracker"
        assert sidecar["count"] > 200
        assert sidecar["imbalance"] > 1.0
        samples = read_samples(data_dir / "samples.jsonl")
        assert len(samples) == sidecar["count"]
        assert sorted({s.user_id for s in samples}) == sidecar["users"]


class TestTrainEvalCommands:
    @pytest.fixture(scope="class")
    def checkpoint(self, built):
        data_dir, _ = built
        runner = CliRunner()
        r = runner.invoke(main, [
            "train", "--dataset", str(data_dir / "samples.jsonl"),
            "--vocab", str(data_dir / "vocab.json"),
            "--out", str(data_dir / "model.ckpt"),
            "--d-model", "16", "--layers", "1", "--heads", "2",
            "--epochs", "1", "--patience", "0", "--json"])
        assert r.exit_code == 0, r.output
        return data_dir, json.loads(r.output)

    def test_train_reports_history(self, checkpoint):
        _, payload = checkpoint
        assert payload["best_epoch"] == 0
        assert len(payload["history"]) == 1
        assert 0.0 <= payload["threshold"] <= 1.0

    def test_threshold_command(self, checkpoint):
        data_dir, _ = checkpoint
        runner = CliRunner()
        r = runner.invoke(main, [
            "threshold", "--dataset", str(data_dir / "samples.jsonl"),
            "--vocab", str(data_dir / "vocab.json"),
            "--checkpoint", str(data_dir / "model.ckpt"), "--json"])
        assert r.exit_code == 0, r.output
        assert 0.0 <= json.loads(r.output)["threshold"] <= 1.0

    def test_latency_command(self, checkpoint):
        data_dir, _ = checkpoint
        runner = CliRunner()
        r = runner.invoke(main, [
            "latency", "--checkpoint", str(data_dir / "model.ckpt"),
            "--vocab", str(data_dir / "vocab.json"),
            "--freq", str(data_dir / "data" / "freq_table.json"),
            "--dataset", str(data_dir / "samples.jsonl"),
            "--trials", "5", "--json"])
        assert r.exit_code == 0, r.output
        assert json.loads(r.output)["mean_ms"] > 0

    def test_replay_command(self, checkpoint):
        data_dir, _ = checkpoint
        stream = next((data_dir / "data" / "streams").glob("*_tracker.jsonl"))
        doc_id = stream.stem.rsplit("_", 2)[1]
        runner = CliRunner()
        r = runner.invoke(main, [
            "replay", "--checkpoint", str(data_dir / "model.ckpt"),
            "--vocab", str(data_dir / "vocab.json"),
            "--freq", str(data_dir / "data" / "freq_table.json"),
            "--layout", str(data_dir / "data" / "layouts" / f"{doc_id}.json"),
            "--stream", str(stream), "--json"])
        assert r.exit_code == 0, r.output
        payload = json.loads(r.output)
        assert payload["latency"], "windows must be processed"

    def test_eval_command_writes_report(self, checkpoint):
        data_dir, _ = checkpoint
        runner = CliRunner()
        out = data_dir / "report.json"
        r = runner.invoke(main, [
            "eval", "--dataset", str(data_dir / "samples.jsonl"),
            "--vocab", str(data_dir / "vocab.json"),
            "--mode", "mixed", "--method", "ngram1", "--method", "distance",
            "--d-model", "16", "--layers", "1", "--heads", "2",
            "--epochs", "1", "--patience", "0", "--out", str(out), "--json"])
        assert r.exit_code == 0, r.output
        report = json.loads(out.read_text())
        methods = {row["method"] for row in report["rows"]}
        assert methods == {"ngram1", "distance"}
        assert all(row["status"] == "ok" for row in report["rows"])


class TestSuite:
    @pytest.fixture(scope="class")
    def samples(self, built):
        data_dir, _ = built
        return read_samples(data_dir / "samples.jsonl")

    def test_make_split_spec_cross_modes(self, samples):
        spec = make_split_spec(samples, "cross_user", 0)
        assert spec.dev_ids == ["user01"] and spec.test_ids == ["user02"]
        spec = make_split_spec(samples, "cross_document", 0)
        assert spec.test_ids == ["doc002"]

    def test_make_split_spec_needs_three_ids(self, samples):
        one_user = [s for s in samples if s.user_id == "user00"]
        with pytest.raises(ValueError, match=">= 3"):
            make_split_spec(one_user, "cross_user", 0)

    def test_run_suite_rows_and_failures(self, samples):
        mc = ModelConfig(d_model=16, n_enc_layers=1, n_dec_layers=1,
                         n_text_layers=1, n_heads=2, n_r=16,
                         vocab_size=4096, seed=0)
        tc = TrainConfig(epochs=1, patience=0, seed=0)
        config = SuiteConfig(modes=("mixed",),
                             methods=("ngram2", "fixation", "svm"),
                             model_config=mc, train_config=tc)
        report = run_suite(samples, config)
        by_method = {r["method"]: r for r in report["rows"]}
        assert by_method["ngram2"]["status"] == "ok"
        assert by_method["svm"]["status"] == "external"
        assert report["imbalance"] > 1.0
        table = render_table(report)
        assert "ngram2" in table and "imbalance" in table

    def test_suite_requires_model_config(self, samples):
        with pytest.raises(ValueError, match="model_config"):
            run_suite(samples, SuiteConfig(model_config=None))

    def test_build_all_samples_matches_cli_output(self, built, samples):
        data_dir, _ = built
        export = load_export(data_dir / "data")
        vocab = vocabulary_for_export(export)
        rebuilt = build_all_samples(export, "tracker", vocab)
        assert len(rebuilt) == len(samples)
        assert [s.key for s in rebuilt] == [s.key for s in samples]
        assert [s.label for s in rebuilt] == [s.label for s in samples]
