"""Readers for the toolkit's newline-delimited corpus files.

The service only needs the documented file schema: parallel records carry
``pair_id``/``src_text``/``src_lang``/``tgt_text``/``tgt_lang``, labeled
records carry ``id``/``text``/``lang``/``task``/``label``. Texts arrive
already preprocessed by the client toolkit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

TASK_LABELS = {
    "sentiment": ("positive", "negative"),
    "hate": ("hate", "no_hate"),
}


class CorpusReadError(ValueError):
    pass


@dataclass(frozen=True)
class ParallelRecord:
    pair_id: str
    src_text: str
    tgt_text: str


@dataclass(frozen=True)
class LabeledRecord:
    id: str
    text: str
    label: str


def _lines(path: str | Path):
    path = Path(path)
    if not path.exists():
        raise CorpusReadError(f"corpus not found: {path}")
    with path.open("r", encoding="utf-8-sig") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield line_no, json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusReadError(f"{path}:{line_no}: invalid record ({exc.msg})") from exc


def read_parallel(path: str | Path) -> list[ParallelRecord]:
    records = []
    for line_no, doc in _lines(path):
        try:
            records.append(
                ParallelRecord(
                    pair_id=str(doc["pair_id"]),
                    src_text=str(doc["src_text"]),
                    tgt_text=str(doc["tgt_text"]),
                )
            )
        except KeyError as exc:
            raise CorpusReadError(f"{path}:{line_no}: missing field {exc.args[0]!r}") from exc
    if not records:
        raise CorpusReadError(f"empty corpus: {path}")
    return records


def read_labeled(path: str | Path, task: str) -> list[LabeledRecord]:
    if task not in TASK_LABELS:
        raise CorpusReadError(f"unknown task {task!r}")
    legal = TASK_LABELS[task]
    records = []
    for line_no, doc in _lines(path):
        try:
            label = str(doc["label"])
            if label not in legal:
                raise CorpusReadError(
                    f"{path}:{line_no}: label {label!r} not legal for task {task!r}"
                )
            records.append(
                LabeledRecord(id=str(doc["id"]), text=str(doc["text"]), label=label)
            )
        except KeyError as exc:
            raise CorpusReadError(f"{path}:{line_no}: missing field {exc.args[0]!r}") from exc
    if not records:
        raise CorpusReadError(f"empty corpus: {path}")
    return records
