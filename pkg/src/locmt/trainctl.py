"""Training orchestration: experiment configs, split wiring, the periodic
evaluation schedule, early stopping, and best-checkpoint selection.

The controller never touches an ML runtime. It materializes splits, submits
a job to the backend, polls, keeps an append-only metric log, signals early
stop, and records everything needed to replay the run in a manifest.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import backend as backend_mod
from .backend import BackendConfig, TrainingJob
from .corpus import LABELED, PARALLEL, Corpus, LangTag, SplitSpec, load_corpus, save_corpus
from .errors import BackendError, LocmtError, ValidationError
from .metrics import COMBINED_VARIANT
from .textprep import nmt_clean, osb_clean

log = logging.getLogger(__name__)

TASKS = ("nmt", "sentiment", "hate")

# Monitored validation metric per task; recorded in every manifest.
MONITORED_METRIC = {
    "nmt": COMBINED_VARIANT,
    "sentiment": "macro-f1",
    "hate": "macro-f1",
}

DEFAULT_PATIENCE = 5
DEFAULT_MIN_DELTA = 1e-4


@dataclass(frozen=True)
class EarlyStopPolicy:
    """Stop after `patience` consecutive evaluations that fail to beat the
    best value by more than `min_delta` (maximize mode)."""

    patience: int = DEFAULT_PATIENCE
    min_delta: float = DEFAULT_MIN_DELTA
    mode: str = "maximize"

    def __post_init__(self) -> None:
        if self.patience < 1:
            raise ValidationError("patience must be >= 1")
        if self.min_delta < 0:
            raise ValidationError("min_delta must be >= 0")
        if self.mode != "maximize":
            raise ValidationError("only maximize mode is supported")


@dataclass(frozen=True)
class EarlyStopState:
    best_value: float = -math.inf
    best_eval_index: int = 0
    staleness: int = 0
    eval_count: int = 0


def early_stop_update(
    state: EarlyStopState, policy: EarlyStopPolicy, value: float
) -> tuple[EarlyStopState, str]:
    """Fold one validation value into the state; returns (state, decision).

    Evaluation indices are 1-based. A tie with the current best is not an
    improvement, so the first occurrence of the best value is kept.
    """
    if not math.isfinite(value):
        raise ValidationError(f"non-finite validation value {value!r}")
    index = state.eval_count + 1
    if value > state.best_value + policy.min_delta:
        new_state = EarlyStopState(
            best_value=value, best_eval_index=index, staleness=0, eval_count=index
        )
        return new_state, "continue"
    staleness = min(state.staleness + 1, policy.patience)
    new_state = EarlyStopState(
        best_value=state.best_value,
        best_eval_index=state.best_eval_index,
        staleness=staleness,
        eval_count=index,
    )
    return new_state, ("stop" if staleness >= policy.patience else "continue")


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    corpora: dict[str, str]
    split: SplitSpec
    backend: BackendConfig
    eval_every: int = 100
    early_stop: EarlyStopPolicy = EarlyStopPolicy()
    seed: int = 0
    hyperparams: dict = field(default_factory=dict)
    src: LangTag | None = None
    tgt: LangTag | None = None
    output_dir: str = "runs"
    poll_interval: float = 0.0

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValidationError(f"unknown task {self.task!r}")
        if self.eval_every < 1:
            raise ValidationError("eval_every must be >= 1")
        if "train" not in self.corpora:
            raise ValidationError("config needs a 'train' corpus")
        if self.task == "nmt" and (self.src is None or self.tgt is None):
            raise ValidationError("nmt experiments need src and tgt language tags")

    def to_json(self) -> dict:
        doc: dict = {
            "task": self.task,
            "corpora": dict(self.corpora),
            "split": {
                "ratios": [[name, frac] for name, frac in self.split.ratios],
                "seed": self.split.seed,
                "stratified": self.split.stratified,
            },
            "backend": {
                "endpoint": self.backend.endpoint,
                "timeout": self.backend.timeout,
                "max_in_flight": self.backend.max_in_flight,
                "retry_count": self.backend.retry_count,
                "backoff_base": self.backend.backoff_base,
                "batch_size": self.backend.batch_size,
            },
            "eval_every": self.eval_every,
            "early_stop": {
                "patience": self.early_stop.patience,
                "min_delta": self.early_stop.min_delta,
                "mode": self.early_stop.mode,
            },
            "seed": self.seed,
            "hyperparams": dict(self.hyperparams),
            "output_dir": self.output_dir,
            "poll_interval": self.poll_interval,
        }
        if self.src is not None:
            doc["src"] = str(self.src)
        if self.tgt is not None:
            doc["tgt"] = str(self.tgt)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentConfig":
        try:
            split = SplitSpec(
                ratios=tuple((str(n), float(f)) for n, f in doc["split"]["ratios"]),
                seed=int(doc["split"]["seed"]),
                stratified=bool(doc["split"].get("stratified", False)),
            )
            backend_doc = doc["backend"]
            backend = BackendConfig(
                endpoint=str(backend_doc["endpoint"]),
                timeout=float(backend_doc.get("timeout", 30.0)),
                max_in_flight=int(backend_doc.get("max_in_flight", 4)),
                retry_count=int(backend_doc.get("retry_count", 3)),
                backoff_base=float(backend_doc.get("backoff_base", 0.25)),
                batch_size=int(backend_doc.get("batch_size", 32)),
            )
            early_doc = doc.get("early_stop", {})
            return cls(
                task=str(doc["task"]),
                corpora={str(k): str(v) for k, v in doc["corpora"].items()},
                split=split,
                backend=backend,
                eval_every=int(doc.get("eval_every", 100)),
                early_stop=EarlyStopPolicy(
                    patience=int(early_doc.get("patience", DEFAULT_PATIENCE)),
                    min_delta=float(early_doc.get("min_delta", DEFAULT_MIN_DELTA)),
                ),
                seed=int(doc.get("seed", 0)),
                hyperparams=dict(doc.get("hyperparams", {})),
                src=LangTag.parse(doc["src"]) if "src" in doc else None,
                tgt=LangTag.parse(doc["tgt"]) if "tgt" in doc else None,
                output_dir=str(doc.get("output_dir", "runs")),
                poll_interval=float(doc.get("poll_interval", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed experiment config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot load experiment config {path}: {exc}") from exc
        return cls.from_json(doc)


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.to_json(), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class RunManifest:
    """The auditable record that makes a run replayable."""

    status: str
    task: str
    config_hash: str
    seed: int
    split_sizes: dict[str, int]
    metric_history: list[dict]
    best_eval_index: int | None
    selected_model_id: str | None
    job_id: str | None
    monitored_metric: str
    effective_config: dict
    notes: list[str]
    error: str | None = None
    error_kind: str | None = None
    started_at: str = ""
    finished_at: str = ""

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "task": self.task,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "split_sizes": dict(self.split_sizes),
            "metric_history": list(self.metric_history),
            "best_eval_index": self.best_eval_index,
            "selected_model_id": self.selected_model_id,
            "job_id": self.job_id,
            "monitored_metric": self.monitored_metric,
            "effective_config": self.effective_config,
            "notes": list(self.notes),
            "error": self.error,
            "error_kind": self.error_kind,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }


RUN_NOTES = [
    "splits are computed per corpus file (per language pair), never pooled",
    "preprocessing steps execute in their listed order",
    "checkpoint selection is the argmax of the validation log, first occurrence on ties",
]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _pipeline_for(config: ExperimentConfig) -> dict:
    if config.task == "nmt":
        return nmt_clean().to_json()
    lang = config.tgt.language if config.tgt is not None else "ar"
    return osb_clean(lang).to_json()


def _failed_manifest(config: ExperimentConfig, started: str, exc: Exception) -> RunManifest:
    kind = "backend" if isinstance(exc, BackendError) else "validation"
    return RunManifest(
        status="failed",
        task=config.task,
        config_hash=config_hash(config),
        seed=config.seed,
        split_sizes={},
        metric_history=[],
        best_eval_index=None,
        selected_model_id=None,
        job_id=None,
        monitored_metric=MONITORED_METRIC[config.task],
        effective_config=config.to_json(),
        notes=list(RUN_NOTES),
        error=str(exc),
        error_kind=kind,
        started_at=started,
        finished_at=_now(),
    )


def write_manifest(manifest: RunManifest, output_dir: str | Path) -> Path:
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    path = output_dir / "run_manifest.json"
    path.write_text(
        json.dumps(manifest.to_json(), ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return path


def _materialize_splits(config: ExperimentConfig, output_dir: Path) -> tuple[dict[str, str], dict[str, int]]:
    kind = PARALLEL if config.task == "nmt" else LABELED
    corpus = load_corpus(config.corpora["train"], kind)
    splits_dir = output_dir / "splits"
    uris: dict[str, str] = {}
    sizes: dict[str, int] = {}
    from .corpus import split_corpus

    for name, part in split_corpus(corpus, config.split):
        path = splits_dir / f"{name}.jsonl"
        save_corpus(part, path)
        uris[name] = str(path)
        sizes[name] = len(part)
    return uris, sizes


def run_experiment(config: ExperimentConfig, write: bool = True) -> RunManifest:
    """Split, submit, poll, early-stop, select, and record one experiment.

    Validation or backend failures produce a failed manifest (still written
    when `write` is set) instead of propagating, so a run always leaves an
    auditable record behind.
    """
    started = _now()
    output_dir = Path(config.output_dir)
    try:
        uris, sizes = _materialize_splits(config, output_dir)
        job = TrainingJob(
            kind="nmt" if config.task == "nmt" else "classifier",
            task=None if config.task == "nmt" else config.task,
            corpora=uris,
            src=config.src,
            tgt=config.tgt,
            hyperparams=config.hyperparams,
            eval_every=config.eval_every,
            seed=config.seed,
            pipeline=_pipeline_for(config),
        )
        handle = config.backend
        job_id = backend_mod.submit_training_job(handle, job)
        log.info("submitted %s job %s", config.task, job_id)

        metric_log: list[backend_mod.EvalPoint] = []
        state = EarlyStopState()
        stop_sent = False
        while True:
            status = backend_mod.poll_job(handle, job_id)
            for point in status.evals:
                if point.index <= len(metric_log):
                    continue
                if point.index != len(metric_log) + 1:
                    raise BackendError(
                        f"evaluation log skipped from {len(metric_log)} to {point.index}"
                    )
                metric_log.append(point)
                state, decision = early_stop_update(state, config.early_stop, point.metric)
                if decision == "stop" and not stop_sent:
                    backend_mod.stop_job(handle, job_id)
                    stop_sent = True
                    log.info("early stop signalled at evaluation %d", point.index)
            if status.state == "finished":
                break
            if status.state == "failed":
                raise BackendError(f"training job failed: {status.reason or 'unknown reason'}")
            if config.poll_interval > 0:
                time.sleep(config.poll_interval)

        if metric_log:
            # max() keeps the first occurrence on ties, matching the
            # earliest-checkpoint-wins rule.
            best = max(range(len(metric_log)), key=lambda i: metric_log[i].metric)
            best_index = metric_log[best].index
            selected = metric_log[best].model_id or status.model_id
        else:
            best_index = None
            selected = status.model_id

        manifest = RunManifest(
            status="finished",
            task=config.task,
            config_hash=config_hash(config),
            seed=config.seed,
            split_sizes=sizes,
            metric_history=[
                {
                    "index": p.index,
                    "step": p.step,
                    "metric": p.metric,
                    "model_id": p.model_id,
                }
                for p in metric_log
            ],
            best_eval_index=best_index,
            selected_model_id=selected,
            job_id=job_id,
            monitored_metric=MONITORED_METRIC[config.task],
            effective_config=config.to_json(),
            notes=list(RUN_NOTES),
            started_at=started,
            finished_at=_now(),
        )
    except LocmtError as exc:
        manifest = _failed_manifest(config, started, exc)
    if write:
        write_manifest(manifest, output_dir)
    return manifest
