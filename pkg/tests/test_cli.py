from __future__ import annotations

import json

import pytest

from locmt.cli import dispatch

from testutil import labeled_doc, write_jsonl


def run_cli(capsys, *argv):
    code = dispatch(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestDispatch:
    def test_no_args_prints_usage(self, capsys):
        code, out, _ = run_cli(capsys)
        assert code == 1
        assert "usage" in out.lower()

    def test_unknown_subcommand_fails_with_usage(self, capsys):
        code, _, err = run_cli(capsys, "frobnicate")
        assert code == 1
        assert "usage" in err.lower() or "invalid choice" in err.lower()

    def test_help_exits_zero(self, capsys):
        code, out, _ = run_cli(capsys, "--help")
        assert code == 0
        assert "usage" in out.lower()


class TestScore:
    def test_identity_mt_score_is_100(self, capsys, tmp_path):
        lines = "bonjour mon ami\nle jour est beau\n"
        hyp = tmp_path / "h.txt"
        hyp.write_text(lines, encoding="utf-8")
        code, out, _ = run_cli(
            capsys, "score", "--task", "mt", "--hyp", str(hyp), "--ref", str(hyp)
        )
        assert code == 0
        assert "f-harmonic(bleu,rouge)" in out
        assert "100.00" in out

    def test_mt_json_format(self, capsys, tmp_path):
        hyp = tmp_path / "h.txt"
        hyp.write_text("un deux trois\n", encoding="utf-8")
        code, out, _ = run_cli(
            capsys, "score", "--task", "mt", "--hyp", str(hyp), "--ref", str(hyp),
            "--format", "json",
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["metrics"]["f-harmonic(bleu,rouge)"] == 100.0

    def test_classify_report(self, capsys, tmp_path):
        truth = tmp_path / "truth.txt"
        pred = tmp_path / "pred.txt"
        truth.write_text("hate\nno_hate\nhate\n", encoding="utf-8")
        pred.write_text("hate\nno_hate\nno_hate\n", encoding="utf-8")
        code, out, _ = run_cli(
            capsys, "score", "--task", "classify", "--hyp", str(pred),
            "--ref", str(truth), "--classes", "hate,no_hate",
        )
        assert code == 0
        assert "accuracy: 0.6667" in out

    def test_missing_file_is_validation_error(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, "score", "--task", "mt", "--hyp", str(tmp_path / "no.txt"),
            "--ref", str(tmp_path / "no.txt"),
        )
        assert code == 1
        assert "error" in err.lower()


class TestPreprocess:
    def test_text_mode(self, capsys, tmp_path):
        src = tmp_path / "in.txt"
        src.write_text("Voici UN test  مُهِمّ https://t.co/abc\n", encoding="utf-8")
        out_path = tmp_path / "out.txt"
        code, _, _ = run_cli(
            capsys, "preprocess", "--pipeline", "nmt-clean",
            "--in", str(src), "--out", str(out_path),
        )
        assert code == 0
        assert out_path.read_text(encoding="utf-8") == "voici un test مهم\n"
        assert (tmp_path / "out.txt.run.json").exists()

    def test_labeled_corpus_mode_with_per_record_lang(self, capsys, tmp_path):
        docs = [
            labeled_doc(1, "positive", lang="fr", text="@ami c'est génial 123"),
            labeled_doc(2, "negative", lang="fr", text="la vie est difficile"),
        ]
        src = write_jsonl(tmp_path / "in.jsonl", docs)
        out_path = tmp_path / "out.jsonl"
        code, _, _ = run_cli(
            capsys, "preprocess", "--pipeline", "osb-clean", "--format", "labeled",
            "--in", str(src), "--out", str(out_path),
        )
        assert code == 0
        lines = [json.loads(l) for l in out_path.read_text(encoding="utf-8").splitlines()]
        assert lines[0]["text"] == "génial"
        assert lines[1]["text"] == "vie difficile"

    def test_osb_on_raw_text_requires_lang(self, capsys, tmp_path):
        src = tmp_path / "in.txt"
        src.write_text("hello\n", encoding="utf-8")
        code, _, err = run_cli(
            capsys, "preprocess", "--pipeline", "osb-clean",
            "--in", str(src), "--out", str(tmp_path / "o.txt"),
        )
        assert code == 1
        assert "--lang" in err


class TestSplit:
    def test_split_writes_parts_and_manifest(self, capsys, tmp_path):
        docs = [labeled_doc(i, "positive" if i % 2 else "negative") for i in range(100)]
        src = write_jsonl(tmp_path / "c.jsonl", docs)
        out_dir = tmp_path / "splits"
        code, out, _ = run_cli(
            capsys, "split", "--in", str(src), "--kind", "labeled",
            "--ratios", "train=0.8,validation=0.2", "--seed", "42",
            "--out-dir", str(out_dir),
        )
        assert code == 0
        assert "train: 80" in out and "validation: 20" in out
        assert (out_dir / "train.jsonl").exists()
        assert (out_dir / "split.run.json").exists()

    def test_bad_ratios_exit_one(self, capsys, tmp_path):
        docs = [labeled_doc(i, "positive") for i in range(10)]
        src = write_jsonl(tmp_path / "c.jsonl", docs)
        code, _, err = run_cli(
            capsys, "split", "--in", str(src), "--kind", "labeled",
            "--ratios", "train=0.8,validation=0.1", "--seed", "1",
            "--out-dir", str(tmp_path / "s"),
        )
        assert code == 1
        assert "sum" in err


class TestLocalize:
    def test_localize_fixture_corpus(self, capsys, tmp_path, fixtures_dir, mock_endpoint):
        out_path = tmp_path / "localized.jsonl"
        code, out, _ = run_cli(
            capsys, "localize", "--src", "fr", "--tgt", "ar-lev",
            "--backend", mock_endpoint,
            "--in", str(fixtures_dir / "sentiment_fr_100.jsonl"),
            "--out", str(out_path),
        )
        assert code == 0
        assert "localized 100 records" in out
        docs = [json.loads(l) for l in out_path.read_text(encoding="utf-8").splitlines()]
        assert all(doc["lang"] == "ar-lev" for doc in docs)

    def test_no_backend_given(self, capsys, tmp_path, fixtures_dir, monkeypatch):
        monkeypatch.delenv("LOCMT_BACKEND", raising=False)
        code, _, err = run_cli(
            capsys, "localize", "--src", "fr", "--tgt", "ar-lev",
            "--in", str(fixtures_dir / "sentiment_fr_100.jsonl"),
            "--out", str(tmp_path / "x.jsonl"),
        )
        assert code == 1
        assert "backend" in err

    def test_backend_env_var(self, capsys, tmp_path, fixtures_dir, mock_endpoint, monkeypatch):
        monkeypatch.setenv("LOCMT_BACKEND", mock_endpoint)
        code, _, _ = run_cli(
            capsys, "localize", "--src", "fr", "--tgt", "ar-lev",
            "--in", str(fixtures_dir / "sentiment_fr_100.jsonl"),
            "--out", str(tmp_path / "x.jsonl"),
        )
        assert code == 0


class TestTrainAndScenario:
    def test_train_from_config(self, capsys, tmp_path, fixtures_dir, mock_endpoint):
        config = {
            "task": "sentiment",
            "corpora": {"train": str(fixtures_dir / "sentiment_fr_100.jsonl")},
            "split": {"ratios": [["train", 0.8], ["validation", 0.2]], "seed": 42},
            "backend": {"endpoint": mock_endpoint},
            "seed": 42,
            "tgt": "ar-lev",
            "output_dir": str(tmp_path / "run"),
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config), encoding="utf-8")
        code, out, _ = run_cli(capsys, "train", "--config", str(path))
        assert code == 0
        assert "status: finished" in out
        assert (tmp_path / "run" / "run_manifest.json").exists()

    def test_scenario_run_from_config(self, capsys, tmp_path, fixtures_dir, mock_endpoint):
        config = {
            "kind": "nmt_eval",
            "inputs": {"test": str(fixtures_dir / "parallel_fr_ar-lev_10.jsonl")},
            "backend": {"endpoint": mock_endpoint},
            "output_dir": str(tmp_path / "scenario"),
        }
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(config), encoding="utf-8")
        code, out, _ = run_cli(
            capsys, "scenario", "run", "--kind", "nmt", "--config", str(path)
        )
        assert code == 0
        assert "100.00" in out
        assert (tmp_path / "scenario" / "report.json").exists()

    def test_scenario_kind_mismatch(self, capsys, tmp_path, fixtures_dir, mock_endpoint):
        config = {
            "kind": "nmt_eval",
            "inputs": {"test": str(fixtures_dir / "parallel_fr_ar-lev_10.jsonl")},
            "backend": {"endpoint": mock_endpoint},
            "output_dir": str(tmp_path / "scenario"),
        }
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(config), encoding="utf-8")
        code, _, err = run_cli(
            capsys, "scenario", "run", "--kind", "hate", "--config", str(path)
        )
        assert code == 1

    def test_unreachable_backend_exits_two(self, capsys, tmp_path, fixtures_dir):
        config = {
            "kind": "nmt_eval",
            "inputs": {"test": str(fixtures_dir / "parallel_fr_ar-lev_10.jsonl")},
            "backend": {
                "endpoint": "http://127.0.0.1:1",
                "timeout": 0.2,
                "retry_count": 1,
                "backoff_base": 0.0,
            },
            "output_dir": str(tmp_path / "scenario"),
        }
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(config), encoding="utf-8")
        code, _, err = run_cli(
            capsys, "scenario", "run", "--kind", "nmt", "--config", str(path)
        )
        assert code == 2
        assert "backend error" in err
