from __future__ import annotations

import json
import math
import random

import pytest

from locmt.backend import BackendConfig, MockBackend
from locmt.corpus import LangTag, SplitSpec
from locmt.errors import ValidationError
from locmt.trainctl import (
    EarlyStopPolicy,
    EarlyStopState,
    ExperimentConfig,
    config_hash,
    early_stop_update,
    run_experiment,
    write_manifest,
)

from testutil import labeled_doc, write_jsonl
from oracles import simulate_early_stopping


def walk(values, patience, min_delta):
    """Run the production update over a whole sequence."""
    state = EarlyStopState()
    policy = EarlyStopPolicy(patience=patience, min_delta=min_delta)
    for i, value in enumerate(values, start=1):
        state, decision = early_stop_update(state, policy, value)
        if decision == "stop":
            return i, state
    return None, state


class TestEarlyStop:
    def test_reference_sequence_stops_at_fourth_eval(self):
        stop_at, state = walk([0.60, 0.62, 0.61, 0.615], patience=2, min_delta=0.0)
        assert stop_at == 4
        assert state.best_eval_index == 2
        assert state.best_value == 0.62

    def test_strictly_increasing_never_stops(self):
        values = [0.1 * i for i in range(1, 30)]
        stop_at, state = walk(values, patience=3, min_delta=0.0)
        assert stop_at is None
        assert state.best_eval_index == len(values)

    def test_min_delta_blocks_tiny_improvements(self):
        stop_at, state = walk([0.5, 0.5004], patience=1, min_delta=0.001)
        assert stop_at == 2
        assert state.best_eval_index == 1

    def test_tie_keeps_first_best(self):
        _, state = walk([0.5, 0.5, 0.5], patience=5, min_delta=0.0)
        assert state.best_eval_index == 1

    def test_non_finite_value_rejected(self):
        state = EarlyStopState()
        policy = EarlyStopPolicy(patience=2, min_delta=0.0)
        for bad in (math.nan, math.inf, -math.inf):
            with pytest.raises(ValidationError):
                early_stop_update(state, policy, bad)

    def test_staleness_never_exceeds_patience(self):
        state = EarlyStopState()
        policy = EarlyStopPolicy(patience=3, min_delta=0.0)
        state, _ = early_stop_update(state, policy, 1.0)
        for _ in range(10):
            state, _ = early_stop_update(state, policy, 0.0)
            assert state.staleness <= policy.patience

    def test_policy_invariants(self):
        with pytest.raises(ValidationError):
            EarlyStopPolicy(patience=0)
        with pytest.raises(ValidationError):
            EarlyStopPolicy(min_delta=-0.1)

    def test_matches_reference_simulation_on_random_sequences(self):
        rng = random.Random(99)
        for _ in range(300):
            length = rng.randint(1, 30)
            values = [round(rng.uniform(0, 1), 3) for _ in range(length)]
            patience = rng.randint(1, 6)
            min_delta = rng.choice([0.0, 1e-4, 0.01, 0.05])
            expected_stop, expected_best, _ = simulate_early_stopping(
                values, patience, min_delta
            )
            got_stop, state = walk(values, patience, min_delta)
            assert got_stop == expected_stop
            assert state.best_eval_index == expected_best


def experiment_config(tmp_path, endpoint, n=100, seed=42, **overrides):
    docs = [labeled_doc(i, "positive" if i % 2 else "negative", lang="fr")
            for i in range(n)]
    train_path = write_jsonl(tmp_path / "train.jsonl", docs)
    base = dict(
        task="sentiment",
        corpora={"train": str(train_path)},
        split=SplitSpec(ratios=(("train", 0.8), ("validation", 0.2)), seed=seed),
        backend=BackendConfig(endpoint=endpoint),
        seed=seed,
        tgt=LangTag("ar", "lev"),
        output_dir=str(tmp_path / "run"),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestRunExperiment:
    def test_best_index_matches_scripted_argmax(self, tmp_path, mock_endpoint):
        config = experiment_config(tmp_path, mock_endpoint)
        manifest = run_experiment(config)
        assert manifest.status == "finished"
        # scripted sentiment sequence peaks at the 4th evaluation (0.64)
        assert manifest.best_eval_index == 4
        assert manifest.selected_model_id.endswith("-ckpt-4")
        metrics = [e["metric"] for e in manifest.metric_history]
        assert manifest.metric_history[manifest.best_eval_index - 1]["metric"] == max(metrics)

    def test_split_sizes_recorded(self, tmp_path, mock_endpoint):
        config = experiment_config(tmp_path, mock_endpoint, n=20000)
        manifest = run_experiment(config)
        assert manifest.split_sizes == {"train": 16000, "validation": 4000}

    def test_invalid_corpus_path_yields_failed_manifest(self, tmp_path, mock_endpoint):
        config = ExperimentConfig(
            task="sentiment",
            corpora={"train": str(tmp_path / "missing.jsonl")},
            split=SplitSpec(ratios=(("train", 0.8), ("validation", 0.2)), seed=1),
            backend=BackendConfig(endpoint=mock_endpoint),
            output_dir=str(tmp_path / "run"),
        )
        manifest = run_experiment(config)
        assert manifest.status == "failed"
        assert manifest.error_kind == "validation"
        assert "missing.jsonl" in manifest.error
        on_disk = json.loads(
            (tmp_path / "run" / "run_manifest.json").read_text(encoding="utf-8")
        )
        assert on_disk["status"] == "failed"

    def test_manifest_reproducible_modulo_timestamps(self, tmp_path, mock_endpoint):
        config = experiment_config(tmp_path, mock_endpoint)
        first = run_experiment(config).to_json()
        second = run_experiment(config).to_json()
        for doc in (first, second):
            doc.pop("started_at")
            doc.pop("finished_at")
        assert first == second

    def test_manifest_written_and_replayable(self, tmp_path, mock_endpoint):
        config = experiment_config(tmp_path, mock_endpoint)
        manifest = run_experiment(config)
        path = tmp_path / "run" / "run_manifest.json"
        doc = json.loads(path.read_text(encoding="utf-8"))
        assert doc["config_hash"] == config_hash(config)
        assert doc["seed"] == 42
        assert doc["monitored_metric"] == "macro-f1"
        assert doc["effective_config"]["corpora"] == config.corpora
        assert doc["metric_history"] == [dict(e) for e in manifest.metric_history]

    def test_early_stop_signalled_before_sequence_end(self, tmp_path):
        backend = MockBackend(
            metric_sequences={"sentiment": [0.9] + [0.1] * 50},
        )
        from locmt.backend import register_backend, unregister_backend

        endpoint = "mock:scripted-early-stop"
        register_backend(endpoint, backend)
        try:
            config = experiment_config(
                tmp_path, endpoint,
                early_stop=EarlyStopPolicy(patience=3, min_delta=0.0),
            )
            manifest = run_experiment(config)
        finally:
            unregister_backend(endpoint)
        assert manifest.status == "finished"
        # 1 improvement + 3 stale evaluations, nothing beyond
        assert len(manifest.metric_history) == 4
        assert manifest.best_eval_index == 1

    def test_config_file_round_trip(self, tmp_path, mock_endpoint):
        config = experiment_config(tmp_path, mock_endpoint)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config.to_json(), ensure_ascii=False), encoding="utf-8")
        loaded = ExperimentConfig.load(path)
        assert loaded == config
        assert config_hash(loaded) == config_hash(config)

    def test_nmt_task_requires_lang_tags(self, tmp_path, mock_endpoint):
        with pytest.raises(ValidationError, match="src and tgt"):
            ExperimentConfig(
                task="nmt",
                corpora={"train": "x"},
                split=SplitSpec(ratios=(("train", 0.9), ("test", 0.1)), seed=1),
                backend=BackendConfig(endpoint=mock_endpoint),
            )
