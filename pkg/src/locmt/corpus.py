"""Corpus data model, newline-delimited on-disk format, manifests, and splits.

A corpus is either *parallel* (aligned source/target utterances for
translation work) or *labeled* (one utterance plus a sentiment or hate
label). Files are UTF-8 with one JSON record per line; a small manifest
sidecar carries recomputed counts so downstream tooling can sanity-check
files without a full parse.

All corpus values are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import CorpusFormatError, ValidationError

SCHEMA_VERSION = 1

PARALLEL = "parallel"
LABELED = "labeled"
KINDS = (PARALLEL, LABELED)

TASK_SENTIMENT = "sentiment"
TASK_HATE = "hate"
TASK_LABELS = {
    TASK_SENTIMENT: ("positive", "negative"),
    TASK_HATE: ("hate", "no_hate"),
}

ARABIC_DIALECTS = ("lev", "glf")


@dataclass(frozen=True)
class LangTag:
    """Language tag: ISO 639-1 code plus an optional Arabic dialect code."""

    language: str
    dialect: str | None = None

    def __post_init__(self) -> None:
        if not (len(self.language) == 2 and self.language.isalpha() and self.language.islower()):
            raise ValidationError(f"language must be a lowercase 2-letter code, got {self.language!r}")
        if self.dialect is not None:
            if self.language != "ar":
                raise ValidationError(f"dialect {self.dialect!r} only allowed for Arabic")
            if self.dialect not in ARABIC_DIALECTS:
                raise ValidationError(f"unknown Arabic dialect {self.dialect!r}")

    @classmethod
    def parse(cls, tag: str) -> "LangTag":
        if "-" in tag:
            language, dialect = tag.split("-", 1)
            return cls(language, dialect)
        return cls(tag)

    def __str__(self) -> str:
        return self.language if self.dialect is None else f"{self.language}-{self.dialect}"


@dataclass(frozen=True)
class Utterance:
    """One social-media text with its language tag and optional provenance."""

    id: str
    text: str
    lang: LangTag
    source: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("utterance id must be non-empty")
        if not self.text.strip():
            raise ValidationError(f"utterance {self.id!r} has empty text")


@dataclass(frozen=True)
class ParallelPair:
    """Aligned source/target utterances for translation training or eval."""

    pair_id: str
    source: Utterance
    target: Utterance

    def __post_init__(self) -> None:
        if not self.pair_id:
            raise ValidationError("pair_id must be non-empty")
        if self.source.lang == self.target.lang:
            raise ValidationError(
                f"pair {self.pair_id!r}: source and target language tags are identical"
            )


@dataclass(frozen=True)
class LabeledExample:
    """Utterance plus an online-social-behavior label, kept stable across localization."""

    utterance: Utterance
    task: str
    label: str

    def __post_init__(self) -> None:
        if self.task not in TASK_LABELS:
            raise ValidationError(f"unknown task {self.task!r}")
        if self.label not in TASK_LABELS[self.task]:
            raise ValidationError(
                f"label {self.label!r} not legal for task {self.task!r}"
            )


@dataclass(frozen=True)
class CorpusManifest:
    """Recomputed corpus statistics; what the sidecar file stores."""

    name: str
    kind: str
    counts: dict[str, int]
    schema_version: int = SCHEMA_VERSION
    seed: int | None = None
    dropped: int = 0
    token_count: int | None = None
    mean_tokens: float | None = None

    def to_json(self) -> dict:
        doc: dict = {
            "name": self.name,
            "kind": self.kind,
            "counts": dict(self.counts),
            "schema_version": self.schema_version,
            "dropped": self.dropped,
        }
        if self.seed is not None:
            doc["seed"] = self.seed
        if self.token_count is not None:
            doc["token_count"] = self.token_count
        if self.mean_tokens is not None:
            doc["mean_tokens"] = self.mean_tokens
        return doc


@dataclass(frozen=True)
class SplitSpec:
    """Named split ratios plus the seed that fixes the assignment."""

    ratios: tuple[tuple[str, float], ...]
    seed: int
    stratified: bool = False

    def __post_init__(self) -> None:
        if not self.ratios:
            raise ValidationError("split spec needs at least one split")
        names = [name for name, _ in self.ratios]
        if len(set(names)) != len(names):
            raise ValidationError("split names must be unique")
        for name, frac in self.ratios:
            if not (0.0 < frac <= 1.0):
                raise ValidationError(f"split {name!r} fraction {frac} outside (0, 1]")
        total = sum(frac for _, frac in self.ratios)
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"split fractions sum to {total}, expected 1.0")


@dataclass(frozen=True)
class Corpus:
    """Immutable record collection with a recomputed manifest."""

    name: str
    kind: str
    records: tuple
    dropped: int = 0
    seed: int | None = None
    manifest: CorpusManifest = field(init=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValidationError(f"unknown corpus kind {self.kind!r}")
        seen: set[str] = set()
        for record_id in self.ids():
            if record_id in seen:
                raise CorpusFormatError(f"duplicate id {record_id!r}")
            seen.add(record_id)
        object.__setattr__(self, "manifest", self._build_manifest())

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator:
        return iter(self.records)

    def ids(self) -> Iterator[str]:
        if self.kind == PARALLEL:
            return (pair.pair_id for pair in self.records)
        return (example.utterance.id for example in self.records)

    def texts(self) -> Iterator[str]:
        if self.kind == PARALLEL:
            for pair in self.records:
                yield pair.source.text
                yield pair.target.text
        else:
            for example in self.records:
                yield example.utterance.text

    def _build_manifest(self) -> CorpusManifest:
        counts: dict[str, int] = {"total": len(self.records)}
        if self.kind == LABELED:
            for example in self.records:
                counts[example.label] = counts.get(example.label, 0) + 1
        return CorpusManifest(
            name=self.name,
            kind=self.kind,
            counts=counts,
            seed=self.seed,
            dropped=self.dropped,
        )

    def with_records(self, records: Iterable, name: str | None = None,
                     seed: int | None = None) -> "Corpus":
        return Corpus(
            name=self.name if name is None else name,
            kind=self.kind,
            records=tuple(records),
            seed=self.seed if seed is None else seed,
        )


def _parse_parallel_record(doc: dict, line_no: int) -> ParallelPair:
    try:
        pair_id = str(doc["pair_id"])
        src_lang = LangTag.parse(str(doc["src_lang"]))
        tgt_lang = LangTag.parse(str(doc["tgt_lang"]))
        return ParallelPair(
            pair_id=pair_id,
            source=Utterance(f"{pair_id}:src", str(doc["src_text"]), src_lang,
                             doc.get("source")),
            target=Utterance(f"{pair_id}:tgt", str(doc["tgt_text"]), tgt_lang,
                             doc.get("source")),
        )
    except KeyError as exc:
        raise CorpusFormatError(f"line {line_no}: missing field {exc.args[0]!r}") from exc
    except ValidationError as exc:
        raise CorpusFormatError(f"line {line_no}: {exc}") from exc


def _parse_labeled_record(doc: dict, line_no: int) -> LabeledExample | None:
    """Parse one labeled record; returns None when the label is not legal for
    the task (those records are dropped and counted, matching how source
    datasets with extra classes are consumed)."""
    try:
        task = str(doc["task"])
        label = str(doc["label"])
        if task not in TASK_LABELS:
            raise CorpusFormatError(f"line {line_no}: unknown task {task!r}")
        if label not in TASK_LABELS[task]:
            return None
        return LabeledExample(
            utterance=Utterance(
                str(doc["id"]), str(doc["text"]), LangTag.parse(str(doc["lang"])),
                doc.get("source"),
            ),
            task=task,
            label=label,
        )
    except KeyError as exc:
        raise CorpusFormatError(f"line {line_no}: missing field {exc.args[0]!r}") from exc
    except ValidationError as exc:
        raise CorpusFormatError(f"line {line_no}: {exc}") from exc


def load_corpus(path: str | Path, kind: str) -> Corpus:
    """Load a newline-delimited corpus file, recomputing its manifest.

    Malformed lines raise with the 1-based line number; duplicate ids raise
    naming the id; an empty file (or one whose records are all dropped)
    raises "empty corpus".
    """
    if kind not in KINDS:
        raise ValidationError(f"unknown corpus kind {kind!r}")
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"corpus file not found: {path}")
    records: list = []
    dropped = 0
    with path.open("r", encoding="utf-8-sig") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"line {line_no}: invalid record ({exc.msg})") from exc
            if not isinstance(doc, dict):
                raise CorpusFormatError(f"line {line_no}: record is not an object")
            if kind == PARALLEL:
                records.append(_parse_parallel_record(doc, line_no))
            else:
                example = _parse_labeled_record(doc, line_no)
                if example is None:
                    dropped += 1
                else:
                    records.append(example)
    if not records:
        raise CorpusFormatError(f"empty corpus: {path}")
    return Corpus(name=path.stem, kind=kind, records=tuple(records), dropped=dropped)


def _record_to_doc(kind: str, record) -> dict:
    if kind == PARALLEL:
        return {
            "pair_id": record.pair_id,
            "src_text": record.source.text,
            "src_lang": str(record.source.lang),
            "tgt_text": record.target.text,
            "tgt_lang": str(record.target.lang),
        }
    doc = {
        "id": record.utterance.id,
        "text": record.utterance.text,
        "lang": str(record.utterance.lang),
        "task": record.task,
        "label": record.label,
    }
    if record.utterance.source is not None:
        doc["source"] = record.utterance.source
    return doc


def manifest_path_for(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".manifest")


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write the corpus plus its manifest sidecar; refuses to write an empty corpus."""
    if len(corpus) == 0:
        raise ValidationError("refusing to save empty corpus")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in corpus.records:
            handle.write(json.dumps(_record_to_doc(corpus.kind, record), ensure_ascii=False))
            handle.write("\n")
    manifest_path_for(path).write_text(
        json.dumps(corpus.manifest.to_json(), ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )


def _rank_key(seed: int, record_id: str) -> bytes:
    digest = hashlib.blake2b(
        record_id.encode("utf-8"),
        digest_size=8,
        key=seed.to_bytes(8, "big", signed=True),
    )
    return digest.digest()


def _allocate(total: int, ratios: Sequence[tuple[str, float]]) -> list[int]:
    """Cumulative-floor allocation: each split lands within one item of its
    exact share and the sizes always sum to the total."""
    sizes: list[int] = []
    cumulative = 0.0
    previous_floor = 0
    for _, frac in ratios:
        cumulative += frac
        boundary = math.floor(cumulative * total + 1e-9)
        sizes.append(boundary - previous_floor)
        previous_floor = boundary
    sizes[-1] += total - previous_floor
    return sizes


def _split_records(records: Sequence, ids: Sequence[str], spec: SplitSpec) -> list[list]:
    ranked = sorted(
        range(len(records)),
        key=lambda i: (_rank_key(spec.seed, ids[i]), ids[i]),
    )
    sizes = _allocate(len(records), spec.ratios)
    out: list[list] = []
    cursor = 0
    for size in sizes:
        out.append([records[i] for i in sorted(ranked[cursor : cursor + size])])
        cursor += size
    return out


def split_corpus(corpus: Corpus, spec: SplitSpec) -> list[tuple[str, Corpus]]:
    """Partition a corpus by a seeded hash ranking of record ids.

    The assignment depends only on (seed, id multiset): records are ranked by
    a keyed hash of their id and the ranking is cut at the cumulative ratio
    boundaries, so file order never matters and sizes are exact up to integer
    rounding. Stratified mode applies the same ranking within each label.
    """
    if len(corpus) < len(spec.ratios):
        raise ValidationError(
            f"corpus of {len(corpus)} records cannot fill {len(spec.ratios)} splits"
        )
    records = list(corpus.records)
    ids = list(corpus.ids())
    if spec.stratified and corpus.kind == LABELED:
        by_label: dict[str, list[int]] = {}
        for i, example in enumerate(records):
            by_label.setdefault(example.label, []).append(i)
        buckets: list[list] = [[] for _ in spec.ratios]
        for label_indices in by_label.values():
            parts = _split_records(
                [records[i] for i in label_indices],
                [ids[i] for i in label_indices],
                spec,
            )
            for bucket, part in zip(buckets, parts):
                bucket.extend(part)
        id_order = {record_id: i for i, record_id in enumerate(ids)}
        parts = [
            sorted(bucket, key=lambda r: id_order[r.utterance.id])
            for bucket in buckets
        ]
    else:
        parts = _split_records(records, ids, spec)
    out = []
    for (split_name, _), part in zip(spec.ratios, parts):
        out.append(
            (
                split_name,
                Corpus(
                    name=f"{corpus.name}-{split_name}",
                    kind=corpus.kind,
                    records=tuple(part),
                    seed=spec.seed,
                ),
            )
        )
    return out


def corpus_stats(corpus: Corpus, tokenizer=None) -> CorpusManifest:
    """Manifest plus token statistics.

    Token counts are whitespace tokens after the social-text cleaning
    pipeline; pass ``tokenizer`` to override (it receives the raw text and
    the record's language tag and returns a token list).
    """
    if tokenizer is None:
        from .textprep import osb_tokenize

        tokenizer = osb_tokenize
    token_count = 0
    text_count = 0
    if corpus.kind == PARALLEL:
        for pair in corpus.records:
            token_count += len(tokenizer(pair.source.text, pair.source.lang))
            token_count += len(tokenizer(pair.target.text, pair.target.lang))
            text_count += 2
    else:
        for example in corpus.records:
            token_count += len(tokenizer(example.utterance.text, example.utterance.lang))
            text_count += 1
    mean_tokens = token_count / text_count if text_count else 0.0
    return replace(corpus.manifest, token_count=token_count, mean_tokens=mean_tokens)
