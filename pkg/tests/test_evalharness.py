from __future__ import annotations

import json
import random

import pytest

from locmt.backend import (
    BackendConfig,
    MockBackend,
    register_backend,
    unregister_backend,
)
from locmt.corpus import Corpus, LABELED, LabeledExample, LangTag, Utterance
from locmt.errors import ValidationError
from locmt.evalharness import (
    CROSSDIALECT_HATE,
    LOCALIZED_SENTIMENT,
    NMT_EVAL,
    EvalReport,
    Scenario,
    run_crossdialect_hate,
    run_localized_sentiment,
    run_nmt_eval,
    word_frequencies,
)
from locmt.metrics import validate_report_consistency
from locmt.textprep import apply_pipeline, osb_clean

from testutil import labeled_doc, write_jsonl
from oracles import brute_force_word_counts

AR_LEV = LangTag("ar", "lev")


def nmt_scenario(fixtures_dir, mock_endpoint, out_dir, endpoint=None) -> Scenario:
    return Scenario(
        kind=NMT_EVAL,
        inputs={"test": str(fixtures_dir / "parallel_fr_ar-lev_10.jsonl")},
        backend=BackendConfig(endpoint=endpoint or mock_endpoint),
        output_dir=str(out_dir),
    )


def sentiment_scenario(fixtures_dir, mock_endpoint, out_dir, **kw) -> Scenario:
    args = dict(
        kind=LOCALIZED_SENTIMENT,
        inputs={
            "source": str(fixtures_dir / "sentiment_fr_100.jsonl"),
            "external": str(fixtures_dir / "sentiment_ar-lev_external_40.jsonl"),
        },
        backend=BackendConfig(endpoint=mock_endpoint),
        output_dir=str(out_dir),
        src=LangTag("fr"),
        tgt=AR_LEV,
        seed=42,
    )
    args.update(kw)
    return Scenario(**args)


def hate_scenario(fixtures_dir, mock_endpoint, out_dir, **kw) -> Scenario:
    args = dict(
        kind=CROSSDIALECT_HATE,
        inputs={
            "source": str(fixtures_dir / "hate_es_20.jsonl"),
            "external": str(fixtures_dir / "hate_ar-lev_external_100.jsonl"),
        },
        backend=BackendConfig(endpoint=mock_endpoint),
        output_dir=str(out_dir),
        src=LangTag("es"),
        tgts=(AR_LEV, LangTag("ar", "glf")),
        seed=42,
    )
    args.update(kw)
    return Scenario(**args)


class TestNmtEval:
    def test_mock_equal_to_reference_mapping_scores_100(
        self, fixtures_dir, mock_endpoint, tmp_path
    ):
        report = run_nmt_eval(nmt_scenario(fixtures_dir, mock_endpoint, tmp_path))
        assert report.metrics["f-harmonic(bleu,rouge)"] == 100.0

    def test_empty_translations_floor(self, fixtures_dir, mock_endpoint, tmp_path):
        class EmptyBackend(MockBackend):
            def translate(self, req):
                return type(super().translate(req))(
                    items=tuple((i, "") for i, _ in req.items), model_id="empty"
                )

        endpoint = "mock:empty-translations"
        register_backend(endpoint, EmptyBackend(lexicons={("fr", "ar-lev"): {}}))
        try:
            report = run_nmt_eval(
                nmt_scenario(fixtures_dir, mock_endpoint, tmp_path, endpoint=endpoint)
            )
        finally:
            unregister_backend(endpoint)
        assert report.metrics["bleu-4gram-eps0.1"] < 1.0
        assert report.metrics["rouge-1-recall-micro"] == 0.0
        assert report.metrics["f-harmonic(bleu,rouge)"] == 0.0

    def test_report_embeds_variant_identifiers(self, fixtures_dir, mock_endpoint, tmp_path):
        report = run_nmt_eval(nmt_scenario(fixtures_dir, mock_endpoint, tmp_path))
        assert set(report.metrics) == {
            "bleu-4gram-eps0.1",
            "rouge-1-recall-micro",
            "f-harmonic(bleu,rouge)",
        }
        on_disk = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
        assert set(on_disk["metrics"]) == set(report.metrics)


class TestLocalizedSentiment:
    def test_fixture_confusion_matrix_reproduced(
        self, fixtures_dir, mock_endpoint, tmp_path
    ):
        report = run_localized_sentiment(
            sentiment_scenario(fixtures_dir, mock_endpoint, tmp_path)
        )
        class_report = report.class_reports["fr->ar-lev"]
        # the external fixture is built to hit exactly this matrix
        assert class_report.matrix.counts == ((22, 2), (3, 13))
        assert class_report.accuracy == pytest.approx(35 / 40)
        assert class_report.per_class["positive"].precision == pytest.approx(22 / 25)
        assert class_report.per_class["positive"].recall == pytest.approx(22 / 24)
        assert class_report.per_class["negative"].precision == pytest.approx(13 / 15)
        assert class_report.per_class["negative"].recall == pytest.approx(13 / 16)

    def test_wrong_external_language_rejected(
        self, fixtures_dir, mock_endpoint, tmp_path
    ):
        wrong = write_jsonl(
            tmp_path / "wrong.jsonl",
            [labeled_doc(i, "positive", lang="ar-glf") for i in range(4)],
        )
        scenario = sentiment_scenario(
            fixtures_dir,
            mock_endpoint,
            tmp_path,
            inputs={
                "source": str(fixtures_dir / "sentiment_fr_100.jsonl"),
                "external": str(wrong),
            },
        )
        with pytest.raises(ValidationError, match="external"):
            run_localized_sentiment(scenario)

    def test_localized_training_labels_equal_source_labels(
        self, fixtures_dir, mock_endpoint, tmp_path
    ):
        run_localized_sentiment(sentiment_scenario(fixtures_dir, mock_endpoint, tmp_path))
        from locmt.corpus import load_corpus

        source = load_corpus(fixtures_dir / "sentiment_fr_100.jsonl", LABELED)
        localized = load_corpus(tmp_path / "localized-ar-lev.jsonl", LABELED)
        assert {ex.utterance.id: ex.label for ex in localized.records} == {
            ex.utterance.id: ex.label for ex in source.records
        }
        assert all(ex.utterance.lang == AR_LEV for ex in localized.records)

    def test_report_validates_and_freqs_present(
        self, fixtures_dir, mock_endpoint, tmp_path
    ):
        report = run_localized_sentiment(
            sentiment_scenario(fixtures_dir, mock_endpoint, tmp_path)
        )
        for class_report in report.class_reports.values():
            assert validate_report_consistency(class_report, 0.005) == []
        freqs = report.word_frequencies["fr->ar-lev"]
        assert set(freqs) <= {"positive", "negative"}
        assert all(count > 0 for ranked in freqs.values() for _, count in ranked)


class TestCrossdialectHate:
    def test_fixture_recall_gap_and_disagreements(
        self, fixtures_dir, mock_endpoint, tmp_path
    ):
        report = run_crossdialect_hate(hate_scenario(fixtures_dir, mock_endpoint, tmp_path))
        lev = report.class_reports["es->ar-lev"]
        glf = report.class_reports["es->ar-glf"]
        assert lev.per_class["hate"].recall == pytest.approx(0.68)
        assert glf.per_class["hate"].recall == pytest.approx(0.54)
        assert lev.per_class["hate"].recall > glf.per_class["hate"].recall
        # the seven Levantine-only toxic expressions
        assert report.disagreements == tuple(f"xh{i:03d}" for i in range(28, 35))

    def test_identical_models_have_empty_disagreement_set(
        self, fixtures_dir, tmp_path
    ):
        # one shared rule table for both dialects
        backend = MockBackend(
            lexicons={
                ("es", "ar-lev"): {"odio": "بكره"},
                ("es", "ar-glf"): {"odio": "اكره"},
            },
            classify_rules={"hate": {"غبي": "hate"}},
            classify_default={"hate": "no_hate"},
            metric_sequences={"hate": [0.5, 0.6, 0.55]},
        )
        endpoint = "mock:identical-hate-models"
        register_backend(endpoint, backend)
        try:
            fixtures = fixtures_dir
            report = run_crossdialect_hate(
                hate_scenario(fixtures, None, tmp_path, backend=BackendConfig(endpoint=endpoint))
            )
        finally:
            unregister_backend(endpoint)
        assert report.disagreements == ()

    def test_published_external_matrices_reproduced(self, tmp_path, fixtures_dir):
        # Synthetic external corpus shaped like the published evaluation set
        # (2196 hate / 3650 no-hate) with id-scripted model predictions that
        # realize the two published rows exactly.
        hate_ids = [f"h{i:04d}" for i in range(2196)]
        clean_ids = [f"n{i:04d}" for i in range(3650)]
        records = tuple(
            LabeledExample(
                utterance=Utterance(i, f"نص {i}", AR_LEV), task="hate", label="hate"
            )
            for i in hate_ids
        ) + tuple(
            LabeledExample(
                utterance=Utterance(i, f"نص {i}", AR_LEV), task="hate", label="no_hate"
            )
            for i in clean_ids
        )
        external = Corpus(name="external", kind=LABELED, records=records)
        from locmt.corpus import save_corpus

        external_path = tmp_path / "external.jsonl"
        save_corpus(external, external_path)

        def script(true_positive: int, false_positive: int) -> dict[str, str]:
            out = {i: "no_hate" for i in hate_ids + clean_ids}
            for i in hate_ids[:true_positive]:
                out[i] = "hate"
            for i in clean_ids[:false_positive]:
                out[i] = "hate"
            return out

        backend = MockBackend(
            lexicons={
                ("es", "ar-lev"): {"odio": "بكره"},
                ("es", "ar-glf"): {"odio": "اكره"},
            },
            classify_script={
                "hate.ar-lev": script(1493, 766),
                "hate.ar-glf": script(1186, 511),
            },
            classify_default={"hate": "no_hate"},
            metric_sequences={"hate": [0.5, 0.6, 0.55]},
        )
        endpoint = "mock:published-hate-rows"
        register_backend(endpoint, backend)
        try:
            scenario = hate_scenario(
                fixtures_dir,
                None,
                tmp_path,
                backend=BackendConfig(endpoint=endpoint),
                inputs={
                    "source": str(fixtures_dir / "hate_es_20.jsonl"),
                    "external": str(external_path),
                },
            )
            report = run_crossdialect_hate(scenario)
        finally:
            unregister_backend(endpoint)

        lev = report.class_reports["es->ar-lev"]
        glf = report.class_reports["es->ar-glf"]
        assert lev.matrix.counts == ((1493, 703), (766, 2884))
        assert glf.matrix.counts == ((1186, 1010), (511, 3139))
        published = {
            "es->ar-lev": {"hate": (0.66, 0.68, 0.67), "no_hate": (0.80, 0.79, 0.80)},
            "es->ar-glf": {"hate": (0.70, 0.54, 0.61), "no_hate": (0.76, 0.86, 0.80)},
        }
        for model, expected in published.items():
            stats = report.class_reports[model].per_class
            for cls, (p, r, f) in expected.items():
                assert round(stats[cls].precision, 2) == p, (model, cls)
                assert round(stats[cls].recall, 2) == r, (model, cls)
                assert round(stats[cls].f1, 2) == f, (model, cls)
        assert round(lev.accuracy, 2) == 0.75
        assert round(glf.accuracy, 2) == 0.74

    def test_disagreement_set_symmetric(self, fixtures_dir, mock_endpoint, tmp_path):
        scenario = hate_scenario(fixtures_dir, mock_endpoint, tmp_path)
        report = run_crossdialect_hate(scenario)
        flipped = hate_scenario(
            fixtures_dir, mock_endpoint, tmp_path / "flipped",
            tgts=(LangTag("ar", "glf"), AR_LEV),
        )
        report_flipped = run_crossdialect_hate(flipped)
        assert set(report.disagreements) == set(report_flipped.disagreements)


class TestWordFrequencies:
    def _corpus(self, texts_by_label) -> Corpus:
        records = []
        i = 0
        for label, texts in texts_by_label.items():
            for text in texts:
                records.append(
                    LabeledExample(
                        utterance=Utterance(f"w{i:03d}", text, AR_LEV),
                        task="sentiment",
                        label=label,
                    )
                )
                i += 1
        return Corpus(name="wf", kind=LABELED, records=records and tuple(records))

    def test_direct_count_example(self):
        corpus = self._corpus({"positive": ["جميل جميل", "جميل"], "negative": ["سيئ"]})
        freqs = word_frequencies(corpus, k=5)
        assert freqs["positive"][0] == ("جميل", 3)

    def test_k_larger_than_vocabulary_returns_full_list(self):
        corpus = self._corpus({"positive": ["جميل يوم", "جميل"]})
        freqs = word_frequencies(corpus, k=100)
        assert freqs["positive"] == [("جميل", 2), ("يوم", 1)]

    def test_k_below_one_rejected(self):
        corpus = self._corpus({"positive": ["جميل"]})
        with pytest.raises(ValidationError):
            word_frequencies(corpus, k=0)

    def test_ties_break_lexicographically(self):
        corpus = self._corpus({"positive": ["ورد شمس", "شمس ورد قمر"]})
        freqs = word_frequencies(corpus, k=3)
        assert freqs["positive"] == [("شمس", 2), ("ورد", 2), ("قمر", 1)]

    def test_matches_brute_force_oracle_on_50_docs(self):
        rng = random.Random(31)
        vocab = ["شمس", "قمر", "ورد", "بحر", "جبل", "مطر", "ليل"]
        texts_by_label = {
            "positive": [
                " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 8)))
                for _ in range(25)
            ],
            "negative": [
                " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 8)))
                for _ in range(25)
            ],
        }
        corpus = self._corpus(texts_by_label)
        got = word_frequencies(corpus, k=100)
        cleaned = {
            label: [
                apply_pipeline(osb_clean("ar"), text) for text in texts
            ]
            for label, texts in texts_by_label.items()
        }
        expected = brute_force_word_counts(cleaned, stopwords=frozenset())
        assert {k: list(v) for k, v in got.items()} == expected

    def test_stable_under_document_reordering(self):
        texts = {"positive": ["شمس قمر", "قمر", "شمس شمس"], "negative": ["ليل"]}
        corpus = self._corpus(texts)
        reordered = Corpus(
            name="wf2", kind=LABELED, records=tuple(reversed(corpus.records))
        )
        assert word_frequencies(corpus, k=10) == word_frequencies(reordered, k=10)

    def test_predicted_labels_override(self):
        corpus = self._corpus({"positive": ["شمس"], "negative": ["قمر"]})
        flipped = {"w000": "negative", "w001": "positive"}
        freqs = word_frequencies(corpus, k=5, labels_by_id=flipped)
        assert freqs["negative"] == [("شمس", 1)]
        assert freqs["positive"] == [("قمر", 1)]


class TestScenarioPlumbing:
    def test_scenario_config_round_trip(self, fixtures_dir, mock_endpoint, tmp_path):
        scenario = hate_scenario(fixtures_dir, mock_endpoint, tmp_path)
        doc = {
            "kind": scenario.kind,
            "inputs": scenario.inputs,
            "backend": {"endpoint": scenario.backend.endpoint},
            "src": str(scenario.src),
            "tgts": [str(t) for t in scenario.tgts],
            "seed": scenario.seed,
            "output_dir": scenario.output_dir,
        }
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        assert Scenario.load(path) == scenario

    def test_missing_inputs_rejected(self, mock_endpoint, tmp_path):
        with pytest.raises(ValidationError, match="missing inputs"):
            Scenario(
                kind=LOCALIZED_SENTIMENT,
                inputs={"source": "x"},
                backend=BackendConfig(endpoint=mock_endpoint),
                output_dir=str(tmp_path),
            )

    def test_deterministic_reports_given_seed(self, fixtures_dir, mock_endpoint, tmp_path):
        scenario = sentiment_scenario(fixtures_dir, mock_endpoint, tmp_path / "a")
        first = run_localized_sentiment(scenario).to_json()
        second = run_localized_sentiment(scenario).to_json()
        first.pop("created_at")
        second.pop("created_at")
        assert first == second

    def test_inconsistent_embedded_report_rejected(self):
        from locmt.metrics import transcribed_report

        bad = transcribed_report({"hate": (0.9, 0.9, 0.2)}, None)
        with pytest.raises(ValidationError, match="inconsistent"):
            EvalReport(
                scenario_kind=CROSSDIALECT_HATE,
                metrics={},
                class_reports={"m": bad},
                word_frequencies={},
                disagreements=(),
                run_manifests={},
                metadata={},
            )
