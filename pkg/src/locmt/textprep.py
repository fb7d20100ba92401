"""Composable, serializable text-cleaning steps for translation and
classification preprocessing.

Two shipped pipelines:

* ``nmt-clean``: whitespace collapse, encoding-artifact removal, URL
  removal, lowercasing, Arabic diacritic removal, hamza normalization.
* ``osb-clean``: the same six steps followed by mention removal,
  punctuation/digit removal, and stopword removal (language-specific).

Every step is a pure function and is idempotent: applying it twice gives
the same result as applying it once. Steps that delete tokens (URLs,
mentions, specials, stopwords) also normalize the whitespace they disturb,
so surviving tokens are always single-space separated.
"""

from __future__ import annotations

import html
import json
import re
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .corpus import LangTag
from .errors import PipelineError

# Diacritic code points removed by default: tashkeel/harakat plus Quranic
# annotation marks. Override per step with a "ranges" parameter.
DEFAULT_DIACRITIC_RANGES = ("0610-061A", "064B-065F", "0670", "06D6-06ED")

HAMZA_ALEF_FORMS = {0x0622: 0x0627, 0x0623: 0x0627, 0x0625: 0x0627}
HAMZA_EXTENDED_FORMS = {0x0624: 0x0648, 0x0626: 0x064A}

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION_RE = re.compile(r"(?<![\w@])@\w+", re.UNICODE)
_ZERO_WIDTH = {0x200B, 0x200C, 0x200D, 0x200E, 0x200F, 0xFFFD}

ARABIC_INDIC_DIGITS = set(range(0x0660, 0x066A)) | set(range(0x06F0, 0x06FA))


def _parse_ranges(ranges) -> frozenset[int]:
    points: set[int] = set()
    for item in ranges:
        if "-" in item:
            lo, hi = item.split("-", 1)
            points.update(range(int(lo, 16), int(hi, 16) + 1))
        else:
            points.add(int(item, 16))
    return frozenset(points)


DEFAULT_DIACRITICS = _parse_ranges(DEFAULT_DIACRITIC_RANGES)


def _collapse(text: str) -> str:
    return " ".join(text.split())


def collapse_whitespace(text: str) -> str:
    return _collapse(text)


def strip_encoding_artifacts(text: str) -> str:
    """Decode HTML entities and drop replacement/zero-width characters.

    Runs to a fixed point so that entity text uncovered by a removal (or
    doubly-encoded entities) cannot survive a single application.
    """
    for _ in range(10):
        decoded = html.unescape(text)
        cleaned = "".join(ch for ch in decoded if ord(ch) not in _ZERO_WIDTH)
        if cleaned == text:
            return text
        text = cleaned
    return text


def strip_urls(text: str) -> str:
    return _collapse(_URL_RE.sub("", text))


def lowercase(text: str) -> str:
    return text.lower()


def strip_diacritics(text: str, diacritics: frozenset[int] = DEFAULT_DIACRITICS) -> str:
    # When a standalone mark is deleted it can orphan a space; collapse in
    # that case so the full cleaning pipeline stays idempotent.
    stripped = "".join(ch for ch in text if ord(ch) not in diacritics)
    if stripped != text and _collapse(stripped) != stripped:
        return _collapse(stripped)
    return stripped


def normalize_hamza(text: str, extended: bool = False) -> str:
    table = dict(HAMZA_ALEF_FORMS)
    if extended:
        table.update(HAMZA_EXTENDED_FORMS)
    return text.translate(table)


def strip_mentions(text: str) -> str:
    # Removing "@a" in "@a@b" exposes "@b" to the word-boundary guard, so
    # iterate to a fixed point (each pass strictly shrinks the text).
    while True:
        stripped = _MENTION_RE.sub("", text)
        if stripped == text:
            return _collapse(text)
        text = stripped


def _is_special_or_digit(ch: str) -> bool:
    category = unicodedata.category(ch)
    return category.startswith("P") or category == "Nd" or ord(ch) in ARABIC_INDIC_DIGITS


def strip_specials_numbers(text: str) -> str:
    """Remove punctuation and digits token-by-token, keeping emoji intact
    (they are symbols, not punctuation, and localization needs them)."""
    kept = []
    for token in text.split():
        cleaned = "".join(ch for ch in token if not _is_special_or_digit(ch))
        if cleaned:
            kept.append(cleaned)
    return " ".join(kept)


def _normalize_stopword(entry: str) -> str:
    entry = entry.casefold()
    entry = strip_diacritics(entry)
    entry = normalize_hamza(entry)
    return "".join(ch for ch in entry if not _is_special_or_digit(ch))


@lru_cache(maxsize=32)
def _stopwords_from_file(path: str) -> frozenset[str]:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise PipelineError(f"unreadable stopword list {path!r}: {exc}") from exc
    return _normalize_stopword_lines(raw)


def _normalize_stopword_lines(raw: str) -> frozenset[str]:
    words = set()
    for line in raw.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        normalized = _normalize_stopword(line)
        if normalized:
            words.add(normalized)
    return frozenset(words)


@lru_cache(maxsize=8)
def default_stopwords(lang: str) -> frozenset[str]:
    """Shipped default stopword list for a language code (``ar`` merges
    Modern Standard Arabic with dialect particles)."""
    resource = resources.files("locmt").joinpath(f"data/stopwords/{lang}.txt")
    try:
        raw = resource.read_text(encoding="utf-8")
    except (FileNotFoundError, OSError) as exc:
        raise PipelineError(f"no shipped stopword list for language {lang!r}") from exc
    return _normalize_stopword_lines(raw)


def remove_stopwords(text: str, stopwords: frozenset[str]) -> str:
    kept = [tok for tok in text.split() if _normalize_stopword(tok) not in stopwords]
    return " ".join(kept)


STEP_IDS = (
    "collapse_whitespace",
    "strip_encoding_artifacts",
    "strip_urls",
    "lowercase",
    "strip_diacritics",
    "normalize_hamza",
    "strip_mentions",
    "strip_specials_numbers",
    "remove_stopwords",
)

_ALLOWED_PARAMS = {
    "collapse_whitespace": set(),
    "strip_encoding_artifacts": set(),
    "strip_urls": set(),
    "lowercase": set(),
    "strip_diacritics": {"ranges"},
    "normalize_hamza": {"extended"},
    "strip_mentions": set(),
    "strip_specials_numbers": set(),
    "remove_stopwords": {"lang", "list", "words"},
}


@dataclass(frozen=True)
class StepSpec:
    """One registered step plus its parameters."""

    id: str
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.id not in _ALLOWED_PARAMS:
            raise PipelineError(f"unknown step id {self.id!r}")
        extra = set(self.params) - _ALLOWED_PARAMS[self.id]
        if extra:
            raise PipelineError(f"step {self.id!r} does not accept params {sorted(extra)}")
        if self.id == "remove_stopwords":
            sources = [k for k in ("lang", "list", "words") if k in self.params]
            if len(sources) != 1:
                raise PipelineError(
                    "remove_stopwords needs exactly one of 'lang', 'list', or 'words'"
                )


@dataclass(frozen=True)
class PipelineSpec:
    """Named, ordered step list; serializes losslessly to JSON."""

    name: str
    steps: tuple[StepSpec, ...]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "steps": [{"id": s.id, "params": dict(s.params)} for s in self.steps],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PipelineSpec":
        try:
            steps = tuple(
                StepSpec(step["id"], dict(step.get("params", {}))) for step in doc["steps"]
            )
            return cls(name=str(doc["name"]), steps=steps)
        except (KeyError, TypeError) as exc:
            raise PipelineError(f"malformed pipeline document: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json(), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "PipelineSpec":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise PipelineError(f"cannot load pipeline {path}: {exc}") from exc
        return cls.from_json(doc)


def _stopwords_for(step: StepSpec) -> frozenset[str]:
    if "lang" in step.params:
        return default_stopwords(str(step.params["lang"]))
    if "list" in step.params:
        return _stopwords_from_file(str(step.params["list"]))
    return frozenset(_normalize_stopword(w) for w in step.params["words"] if _normalize_stopword(w))


def apply_step(step: StepSpec, text: str) -> str:
    if step.id == "collapse_whitespace":
        return collapse_whitespace(text)
    if step.id == "strip_encoding_artifacts":
        return strip_encoding_artifacts(text)
    if step.id == "strip_urls":
        return strip_urls(text)
    if step.id == "lowercase":
        return lowercase(text)
    if step.id == "strip_diacritics":
        ranges = step.params.get("ranges")
        diacritics = DEFAULT_DIACRITICS if ranges is None else _parse_ranges(ranges)
        return strip_diacritics(text, diacritics)
    if step.id == "normalize_hamza":
        return normalize_hamza(text, extended=bool(step.params.get("extended", False)))
    if step.id == "strip_mentions":
        return strip_mentions(text)
    if step.id == "strip_specials_numbers":
        return strip_specials_numbers(text)
    if step.id == "remove_stopwords":
        return remove_stopwords(text, _stopwords_for(step))
    raise PipelineError(f"unknown step id {step.id!r}")


def apply_pipeline(spec: PipelineSpec, text: str) -> str:
    for step in spec.steps:
        text = apply_step(step, text)
    return text


def nmt_clean() -> PipelineSpec:
    """Translation-side cleaning: steps shared by every language pair."""
    return PipelineSpec(
        name="nmt-clean",
        steps=(
            StepSpec("collapse_whitespace"),
            StepSpec("strip_encoding_artifacts"),
            StepSpec("strip_urls"),
            StepSpec("lowercase"),
            StepSpec("strip_diacritics"),
            StepSpec("normalize_hamza"),
        ),
    )


def osb_clean(lang: str) -> PipelineSpec:
    """Classification-side cleaning: translation steps plus mention,
    punctuation/digit, and stopword removal for the given language."""
    return PipelineSpec(
        name=f"osb-clean-{lang}",
        steps=nmt_clean().steps
        + (
            StepSpec("strip_mentions"),
            StepSpec("strip_specials_numbers"),
            StepSpec("remove_stopwords", {"lang": lang}),
        ),
    )


def resolve_pipeline(name_or_path: str, lang: str | None = None) -> PipelineSpec:
    """Resolve a preset name (``nmt-clean``, ``osb-clean``) or a JSON file path."""
    if name_or_path == "nmt-clean":
        return nmt_clean()
    if name_or_path == "osb-clean":
        if lang is None:
            raise PipelineError("the osb-clean preset needs a language (--lang)")
        return osb_clean(lang)
    if Path(name_or_path).exists():
        return PipelineSpec.load(name_or_path)
    raise PipelineError(f"unknown pipeline preset or missing file: {name_or_path!r}")


def nmt_tokenize(text: str, lang: LangTag | None = None) -> list[str]:
    """Whitespace tokens after translation-side cleaning; the tokenization
    every translation metric in this toolkit is defined over."""
    return apply_pipeline(nmt_clean(), text).split()


def osb_tokenize(text: str, lang: LangTag) -> list[str]:
    """Whitespace tokens after classification-side cleaning."""
    return apply_pipeline(osb_clean(lang.language), text).split()
