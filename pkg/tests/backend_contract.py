"""Backend contract checks shared by the mock tests and by any real
service implementation's conformance suite. Each check takes a backend
handle (a BackendConfig or backend instance) and raises on violation.
"""

from __future__ import annotations

import pytest

from locmt.backend import (
    ClassifyRequest,
    TrainingJob,
    TranslateRequest,
    classify_batch,
    poll_job,
    stop_job,
    submit_training_job,
    translate_batch,
)
from locmt.corpus import LangTag
from locmt.errors import JobNotFoundError, UnsupportedPairError

STATE_RANK = {"queued": 0, "running": 1, "finished": 2, "failed": 2}


def check_translate_contract(handle, src: LangTag, tgt: LangTag, texts: list[str],
                             model_id: str | None = None) -> None:
    items = [(f"t{i}", text) for i, text in enumerate(texts)]
    response = translate_batch(
        handle, TranslateRequest(items=items, src=src, tgt=tgt, model_id=model_id)
    )
    assert [i for i, _ in response.items] == [i for i, _ in items]
    assert all(isinstance(translation, str) for _, translation in response.items)

    empty = translate_batch(
        handle, TranslateRequest(items=[], src=src, tgt=tgt, model_id=model_id)
    )
    assert empty.items == ()

    again = translate_batch(
        handle, TranslateRequest(items=items, src=src, tgt=tgt, model_id=model_id)
    )
    assert again.items == response.items, "identical requests must answer identically"


def check_unsupported_pair(handle, tgt: LangTag) -> None:
    with pytest.raises(UnsupportedPairError):
        translate_batch(
            handle,
            TranslateRequest(items=[("x", "hallo")], src=LangTag("de"), tgt=tgt),
        )


def check_classify_contract(handle, task: str, texts: list[str],
                            model_id: str | None = None) -> None:
    items = [(f"c{i}", text) for i, text in enumerate(texts)]
    response = classify_batch(
        handle, ClassifyRequest(items=items, task=task, model_id=model_id)
    )
    assert [item.id for item in response.items] == [i for i, _ in items]
    for item in response.items:
        total = sum(item.probabilities.values())
        assert abs(total - 1.0) <= 1e-6
        assert item.probabilities[item.label] == max(item.probabilities.values())

    empty = classify_batch(handle, ClassifyRequest(items=[], task=task, model_id=model_id))
    assert empty.items == ()


def check_job_contract(handle, job: TrainingJob, poll_limit: int = 2000,
                       sleep: float = 0.0) -> str:
    """Submit, poll to completion, verify monotone states and the metric
    log invariants; returns the finished model id."""
    import time

    job_id = submit_training_job(handle, job)
    assert isinstance(job_id, str) and job_id

    with pytest.raises(JobNotFoundError):
        poll_job(handle, job_id + "-definitely-not-a-job")

    states = []
    status = poll_job(handle, job_id)
    states.append(status.state)
    assert status.state in ("queued", "running", "finished")
    for _ in range(poll_limit):
        if status.state in ("finished", "failed"):
            break
        if sleep:
            time.sleep(sleep)
        status = poll_job(handle, job_id)
        states.append(status.state)
    assert status.state == "finished", f"job ended in {status.state}: {status.reason}"
    assert all(
        STATE_RANK[a] <= STATE_RANK[b] for a, b in zip(states, states[1:])
    ), f"states regressed: {states}"
    assert status.model_id, "finished job must expose a model id"

    evals = status.evals
    assert [e.index for e in evals] == list(range(1, len(evals) + 1))
    if evals:
        best = max(evals, key=lambda e: e.metric)
        first_best = next(e for e in evals if e.metric >= best.metric)
        assert status.model_id == first_best.model_id

    # a finished job's status must be stable
    after = poll_job(handle, job_id)
    assert after.state == "finished"
    assert after.model_id == status.model_id
    return status.model_id
