"""Pluggable translation/classification backend.

Two implementations sit behind one contract: an HTTP client speaking the
``/v1/`` JSON protocol of the model service, and a deterministic mock
(dictionary translator plus rule classifier plus scripted trainer) that
makes every test hermetic. A backend is addressed by an endpoint string:
an ``http(s)://`` URL or ``mock:<directory>``.

Wire protocol summary (UTF-8 JSON bodies):

* ``POST /v1/translate``   {"items": [{"id", "text"}...], "src", "tgt"}
  -> {"items": [{"id", "translation"}...], "model_id"}
* ``POST /v1/classify``    {"items": [{"id", "text"}...], "task"}
  -> {"items": [{"id", "label", "probabilities"}...]}
* ``POST /v1/train``       job description -> {"job_id"}
* ``GET  /v1/jobs/<id>``   -> status document (see JobStatus)
* ``POST /v1/jobs/<id>/stop``  early-stop signal -> status document

Requests may carry an optional ``model_id`` to pin a finished checkpoint.
Errors arrive as ``{"error": {"kind", "detail"}}``.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import LangTag, TASK_LABELS
from .errors import (
    BackendError,
    BackendResponseError,
    JobNotFoundError,
    TransportError,
    UnsupportedPairError,
    ValidationError,
)

_ERROR_KINDS = {
    "transport": TransportError,
    "unsupported_pair": UnsupportedPairError,
    "unknown_job": JobNotFoundError,
    "protocol": BackendResponseError,
    "validation": BackendError,
    "backend": BackendError,
}


@dataclass(frozen=True)
class BackendConfig:
    """How to reach a backend and how hard to push it."""

    endpoint: str
    timeout: float = 30.0
    max_in_flight: int = 4
    retry_count: int = 3
    backoff_base: float = 0.25
    batch_size: int = 32

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValidationError("backend timeout must be > 0")
        if self.max_in_flight < 1:
            raise ValidationError("max_in_flight must be >= 1")
        if self.retry_count < 1:
            raise ValidationError("retry_count must be >= 1")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")


@dataclass(frozen=True)
class TranslateRequest:
    items: tuple[tuple[str, str], ...]
    src: LangTag
    tgt: LangTag
    model_id: str | None = None

    def __init__(self, items, src, tgt, model_id=None):
        object.__setattr__(self, "items", tuple((str(i), str(t)) for i, t in items))
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "tgt", tgt)
        object.__setattr__(self, "model_id", model_id)


@dataclass(frozen=True)
class TranslateResponse:
    items: tuple[tuple[str, str], ...]
    model_id: str


@dataclass(frozen=True)
class ClassifyRequest:
    items: tuple[tuple[str, str], ...]
    task: str
    model_id: str | None = None

    def __init__(self, items, task, model_id=None):
        object.__setattr__(self, "items", tuple((str(i), str(t)) for i, t in items))
        object.__setattr__(self, "task", task)
        object.__setattr__(self, "model_id", model_id)


@dataclass(frozen=True)
class ClassifyItem:
    id: str
    label: str
    probabilities: dict[str, float]


@dataclass(frozen=True)
class ClassifyResponse:
    items: tuple[ClassifyItem, ...]


@dataclass(frozen=True)
class TrainingJob:
    """What the controller hands to the service: data by URI, knobs opaque."""

    kind: str
    corpora: dict[str, str]
    task: str | None = None
    src: LangTag | None = None
    tgt: LangTag | None = None
    hyperparams: dict = field(default_factory=dict)
    eval_every: int = 100
    seed: int = 0
    pipeline: dict | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("nmt", "classifier"):
            raise ValidationError(f"unknown job kind {self.kind!r}")
        if self.eval_every < 1:
            raise ValidationError("eval_every must be >= 1")

    def to_json(self) -> dict:
        doc: dict = {
            "kind": self.kind,
            "corpora": dict(self.corpora),
            "hyperparams": dict(self.hyperparams),
            "eval_every": self.eval_every,
            "seed": self.seed,
        }
        if self.task is not None:
            doc["task"] = self.task
        if self.src is not None:
            doc["src"] = str(self.src)
        if self.tgt is not None:
            doc["tgt"] = str(self.tgt)
        if self.pipeline is not None:
            doc["pipeline"] = self.pipeline
        return doc


@dataclass(frozen=True)
class EvalPoint:
    index: int
    step: int
    metric: float
    model_id: str


@dataclass(frozen=True)
class JobStatus:
    job_id: str
    state: str
    step: int | None = None
    metric: float | None = None
    model_id: str | None = None
    reason: str | None = None
    evals: tuple[EvalPoint, ...] = ()

    _RANK = {"queued": 0, "running": 1, "finished": 2, "failed": 2}

    def __post_init__(self) -> None:
        if self.state not in self._RANK:
            raise BackendResponseError(f"unknown job state {self.state!r}")


def _argmax_eval(evals) -> EvalPoint:
    best = evals[0]
    for point in evals[1:]:
        if point.metric > best.metric:
            best = point
    return best


class MockBackend:
    """Deterministic in-process backend.

    Translation is whitespace tokenization plus case-insensitive lexicon
    lookup with passthrough for unknown tokens (placeholders included).
    Classification consults an id script, then keyword rules, then a
    per-task default. Training walks a scripted metric sequence, one new
    evaluation per poll.
    """

    def __init__(
        self,
        lexicons: dict[tuple[str, str], dict[str, str]] | None = None,
        classify_rules: dict[str, dict[str, str]] | None = None,
        classify_script: dict[str, dict[str, str]] | None = None,
        classify_default: dict[str, str] | None = None,
        metric_sequences: dict[str, list[float]] | None = None,
    ):
        # classify_rules/classify_script keys may be "task" or "task.tgt";
        # the dialect-qualified table wins when the model_id being served
        # came from a job trained toward that dialect.
        self.lexicons = {
            pair: {k.casefold(): v for k, v in table.items()}
            for pair, table in (lexicons or {}).items()
        }
        self.classify_rules = classify_rules or {}
        self.classify_script = classify_script or {}
        self.classify_default = classify_default or {}
        self.metric_sequences = metric_sequences or {}
        self._jobs: dict[str, dict] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_directory(cls, directory: str | Path) -> "MockBackend":
        """Build from a mock directory: ``<src>__<tgt>.tsv`` lexicons,
        ``classify_<task>.tsv`` rule tables (``*`` row = default label),
        optional ``jobs.json`` metric sequences."""
        directory = Path(directory)
        if not directory.is_dir():
            raise ValidationError(f"mock backend directory not found: {directory}")
        lexicons: dict[tuple[str, str], dict[str, str]] = {}
        classify_rules: dict[str, dict[str, str]] = {}
        classify_default: dict[str, str] = {}
        for path in sorted(directory.glob("*.tsv")):
            if path.stem.startswith("classify_"):
                table_key = path.stem.removeprefix("classify_")
                rules: dict[str, str] = {}
                for line in path.read_text(encoding="utf-8").splitlines():
                    if not line.strip() or line.startswith("#"):
                        continue
                    keyword, label = line.split("\t", 1)
                    if keyword.strip() == "*":
                        classify_default[table_key] = label.strip()
                    else:
                        rules[keyword.strip()] = label.strip()
                classify_rules[table_key] = rules
            elif "__" in path.stem:
                src, tgt = path.stem.split("__", 1)
                table: dict[str, str] = {}
                for line in path.read_text(encoding="utf-8").splitlines():
                    if not line.strip() or line.startswith("#"):
                        continue
                    source, target = line.split("\t", 1)
                    table[source.strip().casefold()] = target.strip()
                lexicons[(src, tgt)] = table
        metric_sequences: dict[str, list[float]] = {}
        jobs_file = directory / "jobs.json"
        if jobs_file.exists():
            metric_sequences = {
                k: [float(v) for v in seq]
                for k, seq in json.loads(jobs_file.read_text(encoding="utf-8")).items()
            }
        return cls(
            lexicons=lexicons,
            classify_rules=classify_rules,
            classify_default=classify_default,
            metric_sequences=metric_sequences,
        )

    def translate(self, req: TranslateRequest) -> TranslateResponse:
        pair = (str(req.src), str(req.tgt))
        if pair not in self.lexicons:
            raise UnsupportedPairError(f"mock backend has no lexicon for {pair[0]}->{pair[1]}")
        table = self.lexicons[pair]
        out = []
        for item_id, text in req.items:
            tokens = [table.get(tok.casefold(), tok) for tok in text.split()]
            out.append((item_id, " ".join(tokens)))
        return TranslateResponse(items=tuple(out), model_id=req.model_id or "mock")

    def _model_dialect(self, model_id: str | None) -> str | None:
        if not model_id:
            return None
        job_id = model_id.split("-ckpt-")[0]
        with self._lock:
            record = self._jobs.get(job_id)
        if record is None:
            return None
        tgt = record["job"].tgt
        return str(tgt) if tgt is not None else None

    def classify(self, req: ClassifyRequest) -> ClassifyResponse:
        if req.task not in TASK_LABELS:
            raise BackendError(f"mock backend does not know task {req.task!r}")
        labels = TASK_LABELS[req.task]
        keys = [req.task]
        dialect = self._model_dialect(req.model_id)
        if dialect is not None:
            keys.insert(0, f"{req.task}.{dialect}")
        script = next((self.classify_script[k] for k in keys if k in self.classify_script), {})
        rules = next((self.classify_rules[k] for k in keys if k in self.classify_rules), {})
        default = next(
            (self.classify_default[k] for k in keys if k in self.classify_default),
            labels[0],
        )
        out = []
        for item_id, text in req.items:
            label = script.get(item_id)
            if label is None:
                for keyword, rule_label in sorted(rules.items()):
                    if keyword in text:
                        label = rule_label
                        break
            if label is None:
                label = default
            probabilities = {c: (0.9 if c == label else 0.1 / (len(labels) - 1)) for c in labels}
            out.append(ClassifyItem(id=item_id, label=label, probabilities=probabilities))
        return ClassifyResponse(items=tuple(out))

    def _sequence_for(self, job: TrainingJob) -> list[float]:
        for key in (job.task, job.kind):
            if key in self.metric_sequences:
                return self.metric_sequences[key]
        return [0.50, 0.58, 0.62, 0.61, 0.60, 0.59, 0.585, 0.58]

    def submit_training_job(self, job: TrainingJob) -> str:
        """Deterministic job id from the job content: resubmitting an
        identical description attaches to the existing job."""
        canonical = json.dumps(job.to_json(), sort_keys=True, ensure_ascii=False)
        job_id = "job-" + hashlib.blake2b(canonical.encode("utf-8"), digest_size=6).hexdigest()
        with self._lock:
            if job_id not in self._jobs:
                self._jobs[job_id] = {
                    "job": job,
                    "sequence": self._sequence_for(job),
                    "delivered": 0,
                    "polled": False,
                    "stopped": False,
                    "final": None,
                }
        return job_id

    def poll_job(self, job_id: str) -> JobStatus:
        # First poll reports queued; each later poll surfaces one more
        # evaluation until the sequence is exhausted or a stop arrives, at
        # which point the log freezes and the state is finished for good.
        with self._lock:
            if job_id not in self._jobs:
                raise JobNotFoundError(f"unknown job id {job_id!r}")
            record = self._jobs[job_id]
            job: TrainingJob = record["job"]
            sequence = record["sequence"]
            if record["final"] is None:
                if record["stopped"] or record["delivered"] >= len(sequence):
                    record["final"] = record["delivered"]
                elif not record["polled"]:
                    record["polled"] = True
                else:
                    record["delivered"] += 1
            finished = record["final"] is not None
            delivered = record["final"] if finished else record["delivered"]
        evals = tuple(
            EvalPoint(
                index=i + 1,
                step=(i + 1) * job.eval_every,
                metric=sequence[i],
                model_id=f"{job_id}-ckpt-{i + 1}",
            )
            for i in range(delivered)
        )
        if finished:
            best = _argmax_eval(evals) if evals else None
            return JobStatus(
                job_id=job_id,
                state="finished",
                step=evals[-1].step if evals else 0,
                metric=best.metric if best else None,
                model_id=best.model_id if best else f"{job_id}-ckpt-0",
                evals=evals,
            )
        if delivered == 0:
            return JobStatus(job_id=job_id, state="queued")
        return JobStatus(
            job_id=job_id,
            state="running",
            step=evals[-1].step,
            metric=evals[-1].metric,
            evals=evals,
        )

    def stop_job(self, job_id: str) -> None:
        with self._lock:
            if job_id not in self._jobs:
                raise JobNotFoundError(f"unknown job id {job_id!r}")
            self._jobs[job_id]["stopped"] = True


class HttpxTransport:
    """Default transport: one shared httpx client per backend."""

    def __init__(self):
        import httpx

        self._client = httpx.Client()
        self._httpx = httpx

    def request(self, method: str, url: str, payload: dict | None, timeout: float):
        try:
            response = self._client.request(method, url, json=payload, timeout=timeout)
        except self._httpx.TimeoutException as exc:
            raise TransportError(f"timeout talking to {url}: {exc}") from exc
        except self._httpx.HTTPError as exc:
            raise TransportError(f"transport failure talking to {url}: {exc}") from exc
        try:
            body = response.json()
        except ValueError:
            body = None
        return response.status_code, body


class HttpBackend:
    """Client for the ``/v1/`` wire protocol with retries and bounded batching."""

    def __init__(self, config: BackendConfig, transport=None):
        self.config = config
        self.transport = transport or HttpxTransport()
        self.base = config.endpoint.rstrip("/")

    def _raise_for_error(self, status_code: int, body):
        if status_code >= 500:
            detail = ""
            if isinstance(body, dict) and "error" in body:
                detail = f": {(body['error'] or {}).get('detail', '')}"
            raise TransportError(f"backend returned HTTP {status_code}{detail}")
        if isinstance(body, dict) and "error" in body:
            error = body["error"] or {}
            kind = error.get("kind", "backend")
            detail = error.get("detail", "backend error")
            raise _ERROR_KINDS.get(kind, BackendError)(detail)
        if status_code >= 400:
            raise BackendError(f"backend returned HTTP {status_code}")

    def _call(self, method: str, path: str, payload: dict | None, retry: bool):
        attempts = self.config.retry_count if retry else 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                time.sleep(self.config.backoff_base * (2 ** (attempt - 1)))
            try:
                status_code, body = self.transport.request(
                    method, self.base + path, payload, self.config.timeout
                )
                self._raise_for_error(status_code, body)
                return body
            except TransportError as exc:
                last_error = exc
                continue
        raise TransportError(
            f"giving up on {path} after {attempts} attempts: {last_error}"
        )

    def _chunked_post(self, path: str, chunks: list[dict]) -> list:
        if len(chunks) == 1:
            return [self._call("POST", path, chunks[0], retry=True)]
        results: list = [None] * len(chunks)
        with ThreadPoolExecutor(max_workers=self.config.max_in_flight) as pool:
            futures = {
                pool.submit(self._call, "POST", path, chunk, True): i
                for i, chunk in enumerate(chunks)
            }
            for future, i in futures.items():
                results[i] = future.result()
        return results

    def translate(self, req: TranslateRequest) -> TranslateResponse:
        if not req.items:
            return TranslateResponse(items=(), model_id=req.model_id or "")
        chunks = []
        for start in range(0, len(req.items), self.config.batch_size):
            part = req.items[start : start + self.config.batch_size]
            payload: dict = {
                "items": [{"id": i, "text": t} for i, t in part],
                "src": str(req.src),
                "tgt": str(req.tgt),
            }
            if req.model_id:
                payload["model_id"] = req.model_id
            chunks.append(payload)
        bodies = self._chunked_post("/v1/translate", chunks)
        by_id: dict[str, str] = {}
        model_id = ""
        for body in bodies:
            if not isinstance(body, dict) or "items" not in body:
                raise BackendResponseError("translate response missing 'items'")
            model_id = body.get("model_id", model_id)
            for item in body["items"]:
                by_id[str(item["id"])] = str(item["translation"])
        return TranslateResponse(
            items=_items_in_request_order(req.items, by_id), model_id=model_id
        )

    def classify(self, req: ClassifyRequest) -> ClassifyResponse:
        if not req.items:
            return ClassifyResponse(items=())
        chunks = []
        for start in range(0, len(req.items), self.config.batch_size):
            part = req.items[start : start + self.config.batch_size]
            payload: dict = {
                "items": [{"id": i, "text": t} for i, t in part],
                "task": req.task,
            }
            if req.model_id:
                payload["model_id"] = req.model_id
            chunks.append(payload)
        bodies = self._chunked_post("/v1/classify", chunks)
        by_id: dict[str, ClassifyItem] = {}
        for body in bodies:
            if not isinstance(body, dict) or "items" not in body:
                raise BackendResponseError("classify response missing 'items'")
            for item in body["items"]:
                by_id[str(item["id"])] = ClassifyItem(
                    id=str(item["id"]),
                    label=str(item["label"]),
                    probabilities={
                        str(k): float(v) for k, v in item["probabilities"].items()
                    },
                )
        ordered = []
        for item_id, _ in req.items:
            if item_id not in by_id:
                raise BackendResponseError(f"classify response missing id {item_id!r}")
            ordered.append(by_id[item_id])
        if len(by_id) != len(req.items):
            raise BackendResponseError("classify response ids are not a permutation")
        return ClassifyResponse(items=tuple(ordered))

    def submit_training_job(self, job: TrainingJob) -> str:
        body = self._call("POST", "/v1/train", job.to_json(), retry=False)
        if not isinstance(body, dict) or "job_id" not in body:
            raise BackendResponseError("train response missing 'job_id'")
        return str(body["job_id"])

    def poll_job(self, job_id: str) -> JobStatus:
        body = self._call("GET", f"/v1/jobs/{job_id}", None, retry=False)
        return _parse_job_status(body)

    def stop_job(self, job_id: str) -> None:
        self._call("POST", f"/v1/jobs/{job_id}/stop", {}, retry=False)


def _items_in_request_order(request_items, by_id: dict[str, str]):
    ordered = []
    for item_id, _ in request_items:
        if item_id not in by_id:
            raise BackendResponseError(f"translate response missing id {item_id!r}")
        ordered.append((item_id, by_id[item_id]))
    if len(by_id) != len(request_items):
        raise BackendResponseError("translate response ids are not a permutation")
    return tuple(ordered)


def _parse_job_status(body) -> JobStatus:
    if not isinstance(body, dict) or "status" not in body:
        raise BackendResponseError("job status response missing 'status'")
    evals = tuple(
        EvalPoint(
            index=int(e["index"]),
            step=int(e["step"]),
            metric=float(e["metric"]),
            model_id=str(e.get("model_id", "")),
        )
        for e in body.get("evals", [])
    )
    return JobStatus(
        job_id=str(body.get("job_id", "")),
        state=str(body["status"]),
        step=body.get("step"),
        metric=body.get("metric"),
        model_id=body.get("model_id"),
        reason=body.get("reason"),
        evals=evals,
    )


_RESOLVED: dict[str, object] = {}
_RESOLVE_LOCK = threading.Lock()


def register_backend(endpoint: str, backend) -> None:
    """Install a backend instance under an endpoint name (embedding and
    test hooks; scripted mocks built in code register through this)."""
    with _RESOLVE_LOCK:
        _RESOLVED[endpoint] = backend


def unregister_backend(endpoint: str) -> None:
    with _RESOLVE_LOCK:
        _RESOLVED.pop(endpoint, None)


def resolve_backend(config: BackendConfig):
    """Instantiate (and cache) the backend behind a config.

    Mock backends must be cached per endpoint so that training-job state
    survives across calls within one process.
    """
    with _RESOLVE_LOCK:
        if config.endpoint not in _RESOLVED:
            if config.endpoint.startswith("mock:"):
                _RESOLVED[config.endpoint] = MockBackend.from_directory(
                    config.endpoint.removeprefix("mock:")
                )
            elif config.endpoint.startswith(("http://", "https://")):
                _RESOLVED[config.endpoint] = HttpBackend(config)
            else:
                raise ValidationError(
                    f"backend endpoint must be a URL or mock:<dir>, got {config.endpoint!r}"
                )
        return _RESOLVED[config.endpoint]


def _as_backend(handle):
    if isinstance(handle, BackendConfig):
        return resolve_backend(handle)
    return handle


def _validate_translate_response(req: TranslateRequest, resp: TranslateResponse) -> TranslateResponse:
    request_ids = [i for i, _ in req.items]
    response_ids = [i for i, _ in resp.items]
    if sorted(request_ids) != sorted(response_ids):
        raise BackendResponseError("response ids are not a permutation of request ids")
    if request_ids != response_ids:
        by_id = dict(resp.items)
        resp = TranslateResponse(
            items=tuple((i, by_id[i]) for i in request_ids), model_id=resp.model_id
        )
    return resp


def _validate_classify_response(req: ClassifyRequest, resp: ClassifyResponse) -> ClassifyResponse:
    request_ids = [i for i, _ in req.items]
    response_ids = [item.id for item in resp.items]
    if sorted(request_ids) != sorted(response_ids):
        raise BackendResponseError("response ids are not a permutation of request ids")
    labels = TASK_LABELS.get(req.task)
    for item in resp.items:
        total = sum(item.probabilities.values())
        if abs(total - 1.0) > 1e-6:
            raise BackendResponseError(
                f"item {item.id!r}: probabilities sum to {total}, expected 1"
            )
        top = max(item.probabilities.values())
        if item.probabilities.get(item.label, 0.0) < top:
            raise BackendResponseError(
                f"item {item.id!r}: label {item.label!r} is not an argmax"
            )
        if labels and item.label not in labels:
            raise BackendResponseError(
                f"item {item.id!r}: label {item.label!r} not legal for task {req.task!r}"
            )
    if request_ids != response_ids:
        by_id = {item.id: item for item in resp.items}
        resp = ClassifyResponse(items=tuple(by_id[i] for i in request_ids))
    return resp


def translate_batch(handle, req: TranslateRequest) -> TranslateResponse:
    """One translation per input id, in request order, batching invisible."""
    backend = _as_backend(handle)
    if not req.items:
        return TranslateResponse(items=(), model_id=req.model_id or "")
    return _validate_translate_response(req, backend.translate(req))


def classify_batch(handle, req: ClassifyRequest) -> ClassifyResponse:
    """One normalized-probability prediction per input id, in request order."""
    if req.task not in TASK_LABELS:
        raise ValidationError(f"unknown task {req.task!r}")
    backend = _as_backend(handle)
    if not req.items:
        return ClassifyResponse(items=())
    return _validate_classify_response(req, backend.classify(req))


def submit_training_job(handle, job: TrainingJob) -> str:
    return _as_backend(handle).submit_training_job(job)


def poll_job(handle, job_id: str) -> JobStatus:
    return _as_backend(handle).poll_job(job_id)


def stop_job(handle, job_id: str) -> None:
    _as_backend(handle).stop_job(job_id)
