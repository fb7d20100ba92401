"""Content-localization translation toolkit: corpus management, social-text
preprocessing, localization mechanics, translation/classification metrics,
training orchestration, and scripted evaluation scenarios."""

__version__ = "0.1.0"

from .corpus import (
    Corpus,
    CorpusManifest,
    LabeledExample,
    LangTag,
    ParallelPair,
    SplitSpec,
    Utterance,
    corpus_stats,
    load_corpus,
    save_corpus,
    split_corpus,
)
from .errors import (
    BackendError,
    CorpusFormatError,
    LocmtError,
    PipelineError,
    TransportError,
    UnsupportedPairError,
    ValidationError,
)
from .metrics import combined_f, corpus_bleu, rouge_recall

__all__ = [
    "BackendError",
    "Corpus",
    "CorpusFormatError",
    "CorpusManifest",
    "LabeledExample",
    "LangTag",
    "LocmtError",
    "ParallelPair",
    "PipelineError",
    "SplitSpec",
    "TransportError",
    "UnsupportedPairError",
    "Utterance",
    "ValidationError",
    "combined_f",
    "corpus_bleu",
    "corpus_stats",
    "load_corpus",
    "rouge_recall",
    "save_corpus",
    "split_corpus",
    "__version__",
]
