"""Job registry, single-worker training queue, and the model store.

One training job runs at a time per process; inference endpoints stay
responsive while it does. Job status moves queued -> running -> finished
or failed, never backwards, and the evaluation log is append-only. After a
job finishes, only the best checkpoint plus the five most recent are kept.
"""

from __future__ import annotations

import logging
import queue
import re
import threading
from dataclasses import dataclass, field

import torch

from .corpusio import TASK_LABELS, CorpusReadError
from .models import HashBagClassifier
from .training import EvalRecord, run_finetune_classifier, run_finetune_seq2seq

_PLACEHOLDER_RE = re.compile("\\d+")

log = logging.getLogger(__name__)

KEEP_RECENT_CHECKPOINTS = 5
MAX_BATCH_ITEMS = 256


class ServiceError(Exception):
    def __init__(self, kind: str, detail: str, status_code: int = 400):
        super().__init__(detail)
        self.kind = kind
        self.detail = detail
        self.status_code = status_code


@dataclass
class JobRecord:
    job_id: str
    doc: dict
    status: str = "queued"
    evals: list[EvalRecord] = field(default_factory=list)
    model_id: str | None = None
    reason: str | None = None
    hyperparams_used: dict = field(default_factory=dict)
    stop_event: threading.Event = field(default_factory=threading.Event)

    def snapshot(self) -> dict:
        evals = [
            {
                "index": e.index,
                "step": e.step,
                "metric": e.metric,
                "model_id": e.model_id,
                "train_loss": e.train_loss,
            }
            for e in self.evals
        ]
        latest = self.evals[-1] if self.evals else None
        doc: dict = {
            "job_id": self.job_id,
            "status": self.status,
            "evals": evals,
        }
        if latest is not None:
            doc["step"] = latest.step
            doc["metric"] = latest.metric
        if self.status == "finished":
            doc["model_id"] = self.model_id
        if self.status == "failed":
            doc["reason"] = self.reason
        if self.hyperparams_used:
            doc["hyperparams"] = self.hyperparams_used
        return doc


def best_eval(evals: list[EvalRecord]) -> EvalRecord | None:
    if not evals:
        return None
    best = evals[0]
    for record in evals[1:]:
        if record.metric > best.metric:
            best = record
    return best


class Registry:
    """Owns jobs, trained models, and the worker that runs the queue."""

    def __init__(self):
        self._lock = threading.Lock()
        self._jobs: dict[str, JobRecord] = {}
        self._models: dict[str, object] = {}
        self._pair_best: dict[tuple[str, str], str] = {}
        self._task_best: dict[str, str] = {}
        self._untrained: dict[str, HashBagClassifier] = {}
        self._counter = 0
        self._queue: "queue.Queue[str]" = queue.Queue()
        self._worker = threading.Thread(target=self._run_worker, daemon=True)
        self._worker.start()

    # -- job lifecycle -------------------------------------------------------

    def submit(self, doc: dict) -> str:
        kind = doc.get("kind")
        if kind not in ("nmt", "classifier"):
            raise ServiceError("validation", f"unknown job kind {kind!r}")
        if kind == "classifier" and doc.get("task") not in TASK_LABELS:
            raise ServiceError("validation", "classifier jobs need a sentiment/hate task")
        if "train" not in doc.get("corpora", {}):
            raise ServiceError("validation", "job needs a train corpus URI")
        with self._lock:
            self._counter += 1
            job_id = f"job-{self._counter:04d}"
            self._jobs[job_id] = JobRecord(job_id=job_id, doc=dict(doc))
        self._queue.put(job_id)
        return job_id

    def stop(self, job_id: str) -> dict:
        record = self._get(job_id)
        record.stop_event.set()
        return record.snapshot()

    def status(self, job_id: str) -> dict:
        return self._get(job_id).snapshot()

    def _get(self, job_id: str) -> JobRecord:
        with self._lock:
            if job_id not in self._jobs:
                raise ServiceError("unknown_job", f"unknown job id {job_id!r}", 404)
            return self._jobs[job_id]

    def _run_worker(self) -> None:
        while True:
            job_id = self._queue.get()
            record = self._get(job_id)
            record.status = "running"
            try:
                self._train(record)
            except (CorpusReadError, ValueError) as exc:
                record.reason = str(exc)
                record.status = "failed"
                log.warning("job %s failed: %s", job_id, exc)
            except Exception as exc:  # surface anything else as a failed job
                record.reason = f"{type(exc).__name__}: {exc}"
                record.status = "failed"
                log.exception("job %s crashed", job_id)
            finally:
                self._queue.task_done()

    def _train(self, record: JobRecord) -> None:
        runner = run_finetune_seq2seq if record.doc["kind"] == "nmt" else run_finetune_classifier
        outcome = runner(
            record.job_id,
            record.doc,
            report=lambda e: record.evals.append(e),
            should_stop=record.stop_event.is_set,
        )
        record.hyperparams_used = outcome.hyperparams_used
        best = best_eval(record.evals)
        if best is None:
            record.reason = "no evaluations were produced (max_steps < eval_every?)"
            record.status = "failed"
            return
        keep = {best.model_id}
        keep.update(e.model_id for e in record.evals[-KEEP_RECENT_CHECKPOINTS:])
        with self._lock:
            for ckpt_id, model in outcome.checkpoints.items():
                if ckpt_id in keep:
                    self._models[ckpt_id] = model
            if record.doc["kind"] == "nmt":
                pair = (str(record.doc.get("src")), str(record.doc.get("tgt")))
                self._pair_best[pair] = best.model_id
            else:
                self._task_best[str(record.doc.get("task"))] = best.model_id
        record.model_id = best.model_id
        record.status = "finished"

    # -- serving -------------------------------------------------------------

    def _model_for_translation(self, src: str, tgt: str, model_id: str | None):
        with self._lock:
            if model_id is not None:
                if model_id not in self._models:
                    raise ServiceError("validation", f"unknown model id {model_id!r}")
                return self._models[model_id], model_id
            chosen = self._pair_best.get((src, tgt))
            if chosen is None:
                raise ServiceError(
                    "unsupported_pair", f"no trained model for {src}->{tgt}"
                )
            return self._models[chosen], chosen

    def _model_for_task(self, task: str, model_id: str | None):
        if task not in TASK_LABELS:
            raise ServiceError("validation", f"unknown task {task!r}")
        with self._lock:
            if model_id is not None:
                if model_id not in self._models:
                    raise ServiceError("validation", f"unknown model id {model_id!r}")
                return self._models[model_id], model_id
            chosen = self._task_best.get(task)
            if chosen is not None:
                return self._models[chosen], chosen
            if task not in self._untrained:
                torch.manual_seed(sum(ord(c) for c in task))
                self._untrained[task] = HashBagClassifier(TASK_LABELS[task])
            return self._untrained[task], f"untrained-{task}"

    @staticmethod
    def _check_batch(items) -> None:
        if len(items) > MAX_BATCH_ITEMS:
            raise ServiceError(
                "validation", f"batch of {len(items)} exceeds limit {MAX_BATCH_ITEMS}"
            )

    @staticmethod
    def _restore_placeholders(source: str, translation: str) -> str:
        """Fidelity guard: the protection placeholders of the request must
        come back exactly once each. Training teaches the model to copy
        them; when a checkpoint slips, drop its placeholder emissions and
        append the request's placeholders in their original order."""
        expected = _PLACEHOLDER_RE.findall(source)
        produced = _PLACEHOLDER_RE.findall(translation)
        if produced == expected:
            return translation
        cleaned = " ".join(_PLACEHOLDER_RE.sub(" ", translation).split())
        return " ".join(([cleaned] if cleaned else []) + expected)

    def translate(self, items, src: str, tgt: str, model_id: str | None) -> dict:
        self._check_batch(items)
        if not items:
            return {"items": [], "model_id": model_id or ""}
        model, used = self._model_for_translation(src, tgt, model_id)
        translations = model.greedy_decode([text for _, text in items])
        return {
            "items": [
                {
                    "id": item_id,
                    "translation": self._restore_placeholders(text, translation),
                }
                for (item_id, text), translation in zip(items, translations)
            ],
            "model_id": used,
        }

    def classify(self, items, task: str, model_id: str | None) -> dict:
        self._check_batch(items)
        if not items:
            return {"items": [], "model_id": model_id or ""}
        model, used = self._model_for_task(task, model_id)
        predictions = model.predict([text for _, text in items])
        out = []
        for (item_id, _), probabilities in zip(items, predictions):
            label = max(probabilities, key=probabilities.get)
            out.append(
                {"id": item_id, "label": label, "probabilities": probabilities}
            )
        return {"items": out, "model_id": used}
