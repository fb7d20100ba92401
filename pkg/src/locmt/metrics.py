"""Translation metrics (corpus BLEU, unigram ROUGE recall, their harmonic
combination) and classification metrics (confusion matrix, per-class
precision/recall/F1, accuracy), plus a consistency validator for published
result tables.

Translation metrics live on a 0-100 scale, classification rates on 0-1.
Everything is computed by summing integer counts first and dividing once,
so results cannot depend on evaluation order.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .errors import ValidationError

BLEU_MAX_ORDER = 4
BLEU_EPSILON = 0.1

# Variant identifiers recorded in every report so numbers stay comparable.
BLEU_VARIANT = f"bleu-{BLEU_MAX_ORDER}gram-eps{BLEU_EPSILON}"
ROUGE_VARIANT = "rouge-1-recall-micro"
COMBINED_VARIANT = "f-harmonic(bleu,rouge)"


@dataclass(frozen=True)
class MetricValue:
    name: str
    value: float
    scale: float = 100.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.value <= self.scale + 1e-9):
            raise ValidationError(
                f"metric {self.name!r} value {self.value} outside [0, {self.scale}]"
            )


def _check_pairs(hypotheses, references) -> None:
    if len(hypotheses) != len(references):
        raise ValidationError(
            f"{len(hypotheses)} hypotheses vs {len(references)} references"
        )
    if not hypotheses:
        raise ValidationError("empty corpus")


def _ngram_counts(tokens, order: int) -> Counter:
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def corpus_bleu(hypotheses, references) -> MetricValue:
    """Corpus-level BLEU over n-gram orders 1..4.

    Modified (clipped) precisions are pooled over the whole corpus; an order
    with zero matches gets an epsilon numerator, and orders for which the
    hypotheses contain no n-grams at all are left out of the geometric mean
    (so short-sentence corpora are not zeroed by missing 4-grams). Brevity
    penalty exp(1 - r/c) applies when the hypothesis side is shorter.
    """
    _check_pairs(hypotheses, references)
    log_precision_sum = 0.0
    orders_used = 0
    for order in range(1, BLEU_MAX_ORDER + 1):
        total = 0
        matched = 0
        for hyp, ref in zip(hypotheses, references):
            hyp_counts = _ngram_counts(hyp, order)
            if not hyp_counts:
                continue
            ref_counts = _ngram_counts(ref, order)
            total += sum(hyp_counts.values())
            matched += sum(
                min(count, ref_counts[gram]) for gram, count in hyp_counts.items()
            )
        if total == 0:
            continue
        orders_used += 1
        log_precision_sum += math.log((matched if matched else BLEU_EPSILON) / total)
    hyp_length = sum(len(h) for h in hypotheses)
    ref_length = sum(len(r) for r in references)
    if hyp_length == 0 or orders_used == 0:
        return MetricValue(BLEU_VARIANT, 0.0)
    brevity = 1.0 if hyp_length >= ref_length else math.exp(1.0 - ref_length / hyp_length)
    score = 100.0 * brevity * math.exp(log_precision_sum / orders_used)
    return MetricValue(BLEU_VARIANT, min(score, 100.0))


def rouge_recall(hypotheses, references) -> MetricValue:
    """Micro-averaged unigram recall: clipped matches over reference tokens."""
    _check_pairs(hypotheses, references)
    matched = 0
    total_reference = 0
    for hyp, ref in zip(hypotheses, references):
        ref_counts = Counter(ref)
        hyp_counts = Counter(hyp)
        total_reference += sum(ref_counts.values())
        matched += sum(min(count, ref_counts[tok]) for tok, count in hyp_counts.items())
    if total_reference == 0:
        return MetricValue(ROUGE_VARIANT, 0.0)
    return MetricValue(ROUGE_VARIANT, 100.0 * matched / total_reference)


def combined_f(bleu: MetricValue, rouge: MetricValue) -> MetricValue:
    """Harmonic mean of BLEU and ROUGE on the 0-100 scale; zero if either is."""
    b, r = bleu.value, rouge.value
    value = 0.0 if (b + r) == 0 else 2.0 * b * r / (b + r)
    return MetricValue(COMBINED_VARIANT, value)


@dataclass(frozen=True)
class ConfusionMatrix:
    classes: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.classes)
        if len(self.counts) != n or any(len(row) != n for row in self.counts):
            raise ValidationError("confusion matrix dimensions do not match classes")
        if any(cell < 0 for row in self.counts for cell in row):
            raise ValidationError("confusion matrix cells must be nonnegative")

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    @property
    def trace(self) -> int:
        return sum(self.counts[i][i] for i in range(len(self.classes)))

    def row_sums(self) -> tuple[int, ...]:
        return tuple(sum(row) for row in self.counts)

    def col_sums(self) -> tuple[int, ...]:
        return tuple(sum(row[j] for row in self.counts) for j in range(len(self.classes)))

    def to_json(self) -> dict:
        return {"classes": list(self.classes), "counts": [list(r) for r in self.counts]}


@dataclass(frozen=True)
class ClassStats:
    precision: float | None
    recall: float | None
    f1: float | None
    support: int | None = None


@dataclass(frozen=True)
class ClassReport:
    """Per-class precision/recall/F1 plus accuracy; the matrix rides along
    when the report was computed (transcribed tables have none)."""

    classes: tuple[str, ...]
    per_class: dict[str, ClassStats]
    accuracy: float | None
    matrix: ConfusionMatrix | None = None

    def to_json(self) -> dict:
        doc: dict = {
            "classes": list(self.classes),
            "per_class": {
                c: {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "support": s.support,
                }
                for c, s in self.per_class.items()
            },
            "accuracy": self.accuracy,
        }
        if self.matrix is not None:
            doc["matrix"] = self.matrix.to_json()
        return doc


def _safe_ratio(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator else 0.0


def f1_score(precision: float, recall: float) -> float:
    return 0.0 if (precision + recall) == 0 else 2 * precision * recall / (precision + recall)


def confusion_matrix(truth, predicted, classes) -> ConfusionMatrix:
    index = {c: i for i, c in enumerate(classes)}
    grid = [[0] * len(classes) for _ in classes]
    for t, p in zip(truth, predicted):
        if t not in index:
            raise ValidationError(f"unknown true label {t!r}")
        if p not in index:
            raise ValidationError(f"unknown predicted label {p!r}")
        grid[index[t]][index[p]] += 1
    return ConfusionMatrix(
        classes=tuple(classes), counts=tuple(tuple(row) for row in grid)
    )


def report_from_matrix(matrix: ConfusionMatrix) -> ClassReport:
    row_sums = matrix.row_sums()
    col_sums = matrix.col_sums()
    per_class: dict[str, ClassStats] = {}
    for i, cls in enumerate(matrix.classes):
        precision = _safe_ratio(matrix.counts[i][i], col_sums[i])
        recall = _safe_ratio(matrix.counts[i][i], row_sums[i])
        per_class[cls] = ClassStats(
            precision=precision,
            recall=recall,
            f1=f1_score(precision, recall),
            support=row_sums[i],
        )
    return ClassReport(
        classes=matrix.classes,
        per_class=per_class,
        accuracy=_safe_ratio(matrix.trace, matrix.total),
        matrix=matrix,
    )


def classification_report(truth, predicted, classes) -> ClassReport:
    """Confusion matrix plus derived per-class rates and overall accuracy."""
    if len(truth) != len(predicted):
        raise ValidationError(
            f"{len(truth)} true labels vs {len(predicted)} predictions"
        )
    return report_from_matrix(confusion_matrix(truth, predicted, classes))


def _f1_consistent(f1: float, precision: float, recall: float, tolerance: float) -> bool:
    """Published precision/recall are usually rounded, so treat the reported
    values as intervals of half-width `tolerance`: the triple is consistent
    when the reported F1 lies within tolerance of some F reachable from
    precision/recall values inside those intervals. The harmonic mean is
    monotone in both arguments, so the reachable set is an interval."""
    low = f1_score(max(precision - tolerance, 0.0), max(recall - tolerance, 0.0))
    high = f1_score(min(precision + tolerance, 1.0), min(recall + tolerance, 1.0))
    return low - tolerance - 1e-12 <= f1 <= high + tolerance + 1e-12


def validate_report_consistency(report: ClassReport, tolerance: float = 0.005) -> list[str]:
    """Check that every F1 matches its precision/recall and, when a matrix
    is present, that accuracy matches trace/total. Returns violations."""
    violations: list[str] = []
    for cls, stats in report.per_class.items():
        if stats.precision is None or stats.recall is None or stats.f1 is None:
            continue
        if not _f1_consistent(stats.f1, stats.precision, stats.recall, tolerance):
            expected = f1_score(stats.precision, stats.recall)
            violations.append(
                f"class {cls!r}: reported F1 {stats.f1} vs 2PR/(P+R) = {expected:.6f}"
            )
    if report.matrix is not None and report.accuracy is not None:
        expected = _safe_ratio(report.matrix.trace, report.matrix.total)
        if abs(report.accuracy - expected) > tolerance + 1e-12:
            violations.append(
                f"accuracy: reported {report.accuracy} vs trace/total = {expected:.6f}"
            )
    return violations


def transcribed_report(per_class: dict[str, tuple], accuracy: float | None) -> ClassReport:
    """Build a report from published table triples (precision, recall, f1);
    entries may be None when a table omits them."""
    stats = {
        cls: ClassStats(precision=p, recall=r, f1=f)
        for cls, (p, r, f) in per_class.items()
    }
    return ClassReport(
        classes=tuple(per_class), per_class=stats, accuracy=accuracy, matrix=None
    )
