"""Mechanics that make translation *localization*: protect social-media
artifacts (emoji, emoticons, hashtags, mentions, URLs, borrowed words)
across the translation backend, keep their order, and apply code-borrowing
transliteration afterwards.

Protected regions are swapped for placeholder tokens built from private-use
code points (U+E000 ordinal U+E001) that a model service can be taught to
copy verbatim; the dictionary mock backend passes them through unchanged.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import backend as backend_mod
from .corpus import LABELED, Corpus, LangTag, Utterance
from .errors import BackendError, ValidationError

PLACEHOLDER_OPEN = ""
PLACEHOLDER_CLOSE = ""
_PLACEHOLDER_RE = re.compile(f"{PLACEHOLDER_OPEN}(\\d+){PLACEHOLDER_CLOSE}")

SPAN_KINDS = ("emoji", "emoticon", "hashtag", "mention", "url", "borrowed")

_FLAG = "[\U0001F1E6-\U0001F1FF]{2}"
_KEYCAP = "[0-9#*]️?⃣"
_VS16_ONLY = (
    "[©®™ℹⓂ▪▫▶◀"
    "◻-◾↔-↪〰〽㊗㊙]️"
)
_PICTOGRAPH = (
    "[☀-➿⤴⤵⬅-⬇⬛⬜⭐⭕"
    "\U0001F000-\U0001FAFF]"
)
_MODIFIERS = "(?:️|[\U0001F3FB-\U0001F3FF]){0,2}"
_EMOJI_UNIT = f"(?:{_FLAG}|{_KEYCAP}|{_VS16_ONLY}|{_PICTOGRAPH}{_MODIFIERS})"
EMOJI_RE = re.compile(f"{_EMOJI_UNIT}(?:‍{_EMOJI_UNIT})*")

HASHTAG_RE = re.compile(r"#\w+", re.UNICODE)
MENTION_RE = re.compile(r"(?<![\w@])@\w+", re.UNICODE)
URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)

_CAMEL_SEGMENT_RE = re.compile(r"[0-9]+|[A-Z]+(?![a-z])|[A-Z][a-z]*|[a-z]+|[^\W0-9_]+", re.UNICODE)


def _load_emoticon_patterns() -> re.Pattern:
    raw = resources.files("locmt").joinpath("data/emoticons.txt").read_text(encoding="utf-8")
    literals = [line.strip() for line in raw.splitlines()
                if line.strip() and not line.startswith("#")]
    literals.sort(key=len, reverse=True)
    alternation = "|".join(re.escape(lit) for lit in literals)
    return re.compile(rf"(?:(?<=\s)|^)(?:{alternation})(?=\s|$)")


EMOTICON_RE = _load_emoticon_patterns()


@dataclass(frozen=True)
class ProtectedSpan:
    """A protected substring: where it was and what it said."""

    kind: str
    start: int
    end: int
    payload: str

    def __post_init__(self) -> None:
        if self.kind not in SPAN_KINDS:
            raise ValidationError(f"unknown span kind {self.kind!r}")
        if not (0 <= self.start < self.end):
            raise ValidationError(f"bad span offsets [{self.start}, {self.end})")


@dataclass(frozen=True)
class BorrowLexicon:
    """Case-insensitive whole-token replacement table for one target language."""

    target: LangTag
    entries: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for key, value in self.entries.items():
            if key != key.casefold():
                raise ValidationError(f"lexicon key {key!r} must be casefolded")
            if not value:
                raise ValidationError(f"lexicon entry {key!r} has empty target")

    @classmethod
    def load(cls, target: LangTag, *paths: str | Path) -> "BorrowLexicon":
        entries: dict[str, str] = {}
        for path in paths:
            for line_no, line in enumerate(
                Path(path).read_text(encoding="utf-8").splitlines(), start=1
            ):
                if not line.strip() or line.startswith("#"):
                    continue
                if "\t" not in line:
                    raise ValidationError(f"{path}:{line_no}: expected source<TAB>target")
                source, rendered = line.split("\t", 1)
                key = source.strip().casefold()
                rendered = rendered.strip()
                if not key or not rendered:
                    raise ValidationError(f"{path}:{line_no}: empty source or target")
                if key in entries and entries[key] != rendered:
                    raise ValidationError(f"{path}:{line_no}: duplicate key {key!r}")
                entries[key] = rendered
        return cls(target=target, entries=entries)

    def pattern(self) -> re.Pattern | None:
        if not self.entries:
            return None
        keys = sorted(self.entries, key=len, reverse=True)
        alternation = "|".join(re.escape(k) for k in keys)
        return re.compile(rf"(?<!\w)(?:{alternation})(?!\w)", re.IGNORECASE | re.UNICODE)


def shipped_borrow_lexicon(target: LangTag) -> BorrowLexicon:
    """Default borrowing plus proper-noun transliteration tables for Arabic targets."""
    if target.language != "ar":
        return BorrowLexicon(target=target)
    data = resources.files("locmt").joinpath("data/lexicons")
    entries: dict[str, str] = {}
    for name in ("borrow_ar.tsv", "names_ar.tsv"):
        raw = data.joinpath(name).read_text(encoding="utf-8")
        for line in raw.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            source, rendered = line.split("\t", 1)
            entries[source.strip().casefold()] = rendered.strip()
    return BorrowLexicon(target=target, entries=entries)


def placeholder(ordinal: int) -> str:
    return f"{PLACEHOLDER_OPEN}{ordinal}{PLACEHOLDER_CLOSE}"


def extract_protected_spans(
    text: str, lexicon: BorrowLexicon | None = None
) -> tuple[str, list[ProtectedSpan]]:
    """Replace protected regions with ordinal placeholders.

    Detector priority (first claim wins on overlap): URLs, mentions,
    hashtags, emoticons, emoji, borrowed tokens. Reinserting the payloads at
    the placeholders reproduces the input exactly.
    """
    detectors: list[tuple[str, re.Pattern]] = [
        ("url", URL_RE),
        ("mention", MENTION_RE),
        ("hashtag", HASHTAG_RE),
        ("emoticon", EMOTICON_RE),
        ("emoji", EMOJI_RE),
    ]
    borrow_pattern = lexicon.pattern() if lexicon else None
    if borrow_pattern is not None:
        detectors.append(("borrowed", borrow_pattern))

    claimed: list[tuple[int, int]] = []
    found: list[ProtectedSpan] = []
    for kind, pattern in detectors:
        for match in pattern.finditer(text):
            start, end = match.span()
            if any(start < e and s < end for s, e in claimed):
                continue
            claimed.append((start, end))
            found.append(ProtectedSpan(kind, start, end, match.group()))
    found.sort(key=lambda span: span.start)

    parts: list[str] = []
    cursor = 0
    for ordinal, span in enumerate(found):
        parts.append(text[cursor : span.start])
        parts.append(placeholder(ordinal))
        cursor = span.end
    parts.append(text[cursor:])
    return "".join(parts), found


def reinsert_spans(
    templated: str, spans: list[ProtectedSpan], rendered: list[str]
) -> str:
    """Substitute rendering ``i`` at placeholder ``i``.

    The template must contain each ordinal 0..n-1 exactly once, and one
    rendering must be supplied per span.
    """
    if len(rendered) != len(spans):
        raise ValidationError(
            f"got {len(rendered)} renderings for {len(spans)} spans"
        )
    seen: list[int] = [int(m.group(1)) for m in _PLACEHOLDER_RE.finditer(templated)]
    expected = set(range(len(spans)))
    duplicates = {o for o in seen if seen.count(o) > 1}
    if duplicates:
        raise ValidationError(f"duplicate placeholder ordinals {sorted(duplicates)}")
    missing = expected - set(seen)
    if missing:
        raise ValidationError(f"missing placeholder ordinals {sorted(missing)}")
    unexpected = set(seen) - expected
    if unexpected:
        raise ValidationError(f"unexpected placeholder ordinals {sorted(unexpected)}")
    return _PLACEHOLDER_RE.sub(lambda m: rendered[int(m.group(1))], templated)


def transliterate_borrowed(text: str, lexicon: BorrowLexicon) -> str:
    """Whole-token, case-insensitive lexicon replacement; everything else untouched."""
    pattern = lexicon.pattern()
    if pattern is None:
        return text
    return pattern.sub(lambda m: lexicon.entries[m.group().casefold()], text)


def _segment_hashtag_body(body: str) -> list[str]:
    segments = _CAMEL_SEGMENT_RE.findall(body.replace("_", " "))
    return segments if segments else [body]


def _template_is_all_protected(templated: str) -> bool:
    return not _PLACEHOLDER_RE.sub("", templated).strip()


def localize_text(
    text: str,
    src: LangTag,
    tgt: LangTag,
    backend,
    lexicon: BorrowLexicon | None = None,
    translate_hashtags: bool = True,
) -> str:
    """Translate with protection: extract spans, translate the template,
    reinsert (hashtag bodies go through the backend word-internally; emoji,
    emoticons, mentions, and URLs pass through verbatim), then apply the
    transliteration pass.
    """
    if not text:
        return text
    templated, spans = extract_protected_spans(text, lexicon)

    if _template_is_all_protected(templated):
        translated = templated
    else:
        response = backend_mod.translate_batch(
            backend,
            backend_mod.TranslateRequest(items=[("t", templated)], src=src, tgt=tgt),
        )
        translated = response.items[0][1]

    hashtag_segments: dict[int, list[str]] = {}
    if translate_hashtags:
        batch: list[tuple[str, str]] = []
        for ordinal, span in enumerate(spans):
            if span.kind != "hashtag":
                continue
            segments = _segment_hashtag_body(span.payload[1:])
            hashtag_segments[ordinal] = segments
            batch.extend((f"{ordinal}:{j}", seg) for j, seg in enumerate(segments))
        if batch:
            response = backend_mod.translate_batch(
                backend,
                backend_mod.TranslateRequest(items=batch, src=src, tgt=tgt),
            )
            translated_by_key = dict(response.items)
            for ordinal, segments in hashtag_segments.items():
                hashtag_segments[ordinal] = [
                    translated_by_key[f"{ordinal}:{j}"] for j in range(len(segments))
                ]

    renderings: list[str] = []
    for ordinal, span in enumerate(spans):
        if span.kind == "hashtag" and ordinal in hashtag_segments:
            renderings.append("#" + "_".join(hashtag_segments[ordinal]))
        else:
            renderings.append(span.payload)

    result = reinsert_spans(translated, spans, renderings)
    if lexicon is not None:
        result = transliterate_borrowed(result, lexicon)
    return result


def localize_corpus(
    corpus: Corpus,
    src: LangTag,
    tgt: LangTag,
    backend,
    lexicon: BorrowLexicon | None = None,
    translate_hashtags: bool = True,
    max_failure_rate: float = 0.0,
    concurrency: int = 4,
) -> Corpus:
    """Localize every record of a labeled corpus, keeping ids and labels.

    Per-record backend failures are collected; the whole run fails when the
    failure rate exceeds ``max_failure_rate``, otherwise failed records are
    dropped and counted in the output manifest.
    """
    if corpus.kind != LABELED:
        raise ValidationError("localize_corpus expects a labeled corpus")
    if len(corpus) == 0:
        raise ValidationError("empty corpus")
    for example in corpus.records:
        if example.utterance.lang != src:
            raise ValidationError(
                f"record {example.utterance.id!r} is {example.utterance.lang}, expected {src}"
            )

    def work(example):
        return localize_text(
            example.utterance.text, src, tgt, backend, lexicon, translate_hashtags
        )

    failures: list[tuple[str, Exception]] = []
    localized = []
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        outcomes = list(pool.map(lambda ex: _guarded(work, ex), corpus.records))
    for example, (result, error) in zip(corpus.records, outcomes):
        if error is not None:
            failures.append((example.utterance.id, error))
            continue
        localized.append(
            type(example)(
                utterance=Utterance(
                    id=example.utterance.id,
                    text=result,
                    lang=tgt,
                    source=example.utterance.source,
                ),
                task=example.task,
                label=example.label,
            )
        )

    if failures:
        rate = len(failures) / len(corpus)
        if rate > max_failure_rate:
            failed_id, error = failures[0]
            raise BackendError(
                f"localization failed for {len(failures)}/{len(corpus)} records "
                f"(first: {failed_id!r}: {error})"
            )
    return Corpus(
        name=f"{corpus.name}-{tgt}",
        kind=LABELED,
        records=tuple(localized),
        dropped=corpus.dropped + len(failures),
        seed=corpus.seed,
    )


def _guarded(fn, arg):
    try:
        return fn(arg), None
    except Exception as exc:  # per-record failures are tallied by the caller
        return None, exc
