"""Corpus BLEU used as the validation metric for translation jobs.

Orders 1..4 with clipped counts; orders without hypothesis n-grams are
skipped and zero-match orders get a 0.1 numerator, so short validation
sentences still produce a usable signal. 0-100 scale.
"""

from __future__ import annotations

import math
from collections import Counter


def _ngrams(tokens: list[str], order: int) -> Counter:
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def corpus_bleu(hypotheses: list[list[str]], references: list[list[str]]) -> float:
    if not hypotheses or len(hypotheses) != len(references):
        raise ValueError("need equal, nonempty hypothesis/reference lists")
    log_sum = 0.0
    used = 0
    for order in range(1, 5):
        total = 0
        matched = 0
        for hyp, ref in zip(hypotheses, references):
            hyp_counts = _ngrams(hyp, order)
            total += sum(hyp_counts.values())
            matched += sum((hyp_counts & _ngrams(ref, order)).values())
        if total == 0:
            continue
        used += 1
        log_sum += math.log((matched if matched else 0.1) / total)
    hyp_len = sum(len(h) for h in hypotheses)
    ref_len = sum(len(r) for r in references)
    if hyp_len == 0 or used == 0:
        return 0.0
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(log_sum / used)
