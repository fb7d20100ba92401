"""End-to-end over a real socket: the toolkit's controller and client
drive a live uvicorn instance of the service."""

from __future__ import annotations

import json
import socket
import threading
import time

import pytest
import uvicorn

from modelserv.service import create_app

from serviceutil import write_copy_corpus


@pytest.fixture(scope="module")
def live_server():
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    config = uvicorn.Config(
        create_app(), host="127.0.0.1", port=port, log_level="warning"
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("uvicorn did not start")
        time.sleep(0.05)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def test_client_errors_over_the_wire(live_server):
    from locmt.backend import BackendConfig, HttpBackend, TranslateRequest
    from locmt.corpus import LangTag
    from locmt.errors import JobNotFoundError, UnsupportedPairError

    backend = HttpBackend(BackendConfig(endpoint=live_server, retry_count=1))
    with pytest.raises(JobNotFoundError):
        backend.poll_job("job-7777")
    with pytest.raises(UnsupportedPairError):
        backend.translate(
            TranslateRequest(items=[("1", "x")], src=LangTag("de"), tgt=LangTag("ar", "glf"))
        )


def test_controller_runs_experiment_against_live_service(live_server, tmp_path):
    from locmt.backend import BackendConfig
    from locmt.corpus import LangTag, SplitSpec
    from locmt.locrules import localize_text
    from locmt.trainctl import EarlyStopPolicy, ExperimentConfig, run_experiment

    corpus = write_copy_corpus(tmp_path / "copy.jsonl", n=30, seed=11)
    config = ExperimentConfig(
        task="nmt",
        corpora={"train": str(corpus)},
        split=SplitSpec(ratios=(("train", 0.9), ("validation", 0.1)), seed=11),
        backend=BackendConfig(endpoint=live_server, timeout=60.0),
        eval_every=30,
        early_stop=EarlyStopPolicy(patience=5, min_delta=0.0),
        seed=11,
        hyperparams={"max_steps": 150, "dropout": 0.0, "batch_size": 27},
        src=LangTag("fr"),
        tgt=LangTag("ar", "lev"),
        output_dir=str(tmp_path / "run"),
        poll_interval=0.1,
    )
    manifest = run_experiment(config)
    assert manifest.status == "finished", manifest.error
    assert manifest.split_sizes == {"train": 27, "validation": 3}
    metrics = [e["metric"] for e in manifest.metric_history]
    assert manifest.metric_history[manifest.best_eval_index - 1]["metric"] == max(metrics)
    doc = json.loads((tmp_path / "run" / "run_manifest.json").read_text(encoding="utf-8"))
    assert doc["selected_model_id"] == manifest.selected_model_id

    # the freshly trained pair now serves localization end to end
    out = localize_text(
        "alpha beta 😀",
        LangTag("fr"),
        LangTag("ar", "lev"),
        BackendConfig(endpoint=live_server, timeout=60.0),
    )
    assert "😀" in out
    assert out.split()[-1] == "😀"
