#!/usr/bin/env python3
"""Regenerate the toy fixture corpora and the mock backend directory.

Deterministic: running it twice produces byte-identical files. The fixtures
are small hand-designed datasets whose mock-backend behavior is known in
advance (the hate fixtures are engineered so the Levantine-trained mock
recalls 34/50 hate records and the Gulf-trained mock 27/50).
"""

from __future__ import annotations

import json
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "src" / "locmt" / "data" / "fixtures"
MOCK = FIXTURES / "mockbackend"

FR_AR_LEV = {
    "bonjour": "مرحبا", "salut": "اهلين", "ami": "صاحبي", "mon": "يا",
    "le": "ال", "la": "ال", "jour": "يوم", "est": "هو", "beau": "حلو",
    "très": "كتير", "ce": "هاد", "film": "فيلم", "bien": "منيح",
    "je": "انا", "aime": "بحب", "vie": "حياة", "soleil": "شمس",
    "plage": "شاطئ", "demain": "بكرا", "nuit": "ليل", "musique": "موسيقى",
    "content": "مبسوط", "triste": "زعلان", "pluie": "شتي", "examen": "فحص",
    "facile": "سهل", "difficile": "صعب", "oui": "اي", "non": "لا",
    "pourquoi": "ليش", "quoi": "شو", "maison": "بيت", "travail": "شغل",
    "école": "مدرسة", "super": "خرافي", "génial": "رائع", "sunset": "غروب",
    "mauvais": "بشع", "bonne": "منيحة", "chance": "حظ",
}

ES_COMMON = {
    "hola": ("مرحبا", "هلا"), "odio": ("بكره", "اكره"), "amor": ("حب", "حب"),
    "gente": ("ناس", "ناس"), "tonto": ("هبيلة", "اهبل"), "feo": ("بشع", "شين"),
    "bueno": ("منيح", "زين"), "malo": ("عاطل", "خايس"), "dia": ("يوم", "يوم"),
    "noche": ("ليل", "ليل"), "gracias": ("شكرا", "مشكور"),
    "amigo": ("صاحبي", "ربيعي"), "trabajo": ("شغل", "شغل"),
    "ciudad": ("مدينة", "مدينة"), "calle": ("شارع", "شارع"),
    "feliz": ("مبسوط", "فرحان"), "triste": ("زعلان", "حزين"),
    "esto": ("هاد", "هذا"), "es": ("هو", "هو"), "muy": ("كتير", "وايد"),
    "no": ("لا", "لا"), "si": ("اي", "اي"), "yo": ("انا", "انا"),
    "estupido": ("غبي", "غبي"), "idiota": ("ازعر", "غبي"),
    "basura": ("مجرور", "زبالة"), "que": ("شو", "وش"),
}

# 10 parallel pairs whose targets are exactly the word-by-word mock mapping.
PARALLEL_SOURCES = [
    "bonjour mon ami",
    "le jour est beau",
    "je aime la vie",
    "le soleil est super",
    "demain est facile",
    "la nuit est difficile",
    "pourquoi le travail",
    "je aime la musique",
    "la plage est génial",
    "le examen est facile",
]

POSITIVE_FR = [
    "le jour est beau",
    "je aime la vie 😀",
    "la plage est génial #Sunset",
    "bonjour mon ami",
    "le soleil est super",
    "la musique est génial",
    "je suis content",
    "demain est facile oui",
    "bonne chance mon ami",
    "le film est bien",
]

NEGATIVE_FR = [
    "la nuit est difficile",
    "je suis triste",
    "le travail est mauvais",
    "ce jour est difficile",
    "le film est mauvais 😞",
    "la pluie est triste",
    "non le examen est difficile",
    "pourquoi ce travail difficile",
    "je suis triste @ami",
    "la vie est difficile",
]


def jsonl(path: Path, docs: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for doc in docs:
            handle.write(json.dumps(doc, ensure_ascii=False) + "\n")
    print(f"wrote {path} ({len(docs)} records)")


def tsv(path: Path, rows: list[tuple[str, str]], header: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {header}"] + [f"{k}\t{v}" for k, v in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path} ({len(rows)} rows)")


def make_parallel() -> None:
    docs = []
    for i, source in enumerate(PARALLEL_SOURCES, start=1):
        target = " ".join(FR_AR_LEV[tok] for tok in source.split())
        docs.append(
            {
                "pair_id": f"p{i:03d}",
                "src_text": source,
                "src_lang": "fr",
                "tgt_text": target,
                "tgt_lang": "ar-lev",
            }
        )
    jsonl(FIXTURES / "parallel_fr_ar-lev_10.jsonl", docs)


def make_sentiment_source() -> None:
    docs = []
    for i in range(100):
        if i % 2 == 0:
            text = POSITIVE_FR[(i // 2) % len(POSITIVE_FR)]
            label = "positive"
        else:
            text = NEGATIVE_FR[(i // 2) % len(NEGATIVE_FR)]
            label = "negative"
        docs.append(
            {
                "id": f"s{i + 1:03d}",
                "text": text,
                "lang": "fr",
                "task": "sentiment",
                "label": label,
                "source": "toy-sentiment-fr",
            }
        )
    jsonl(FIXTURES / "sentiment_fr_100.jsonl", docs)


def make_sentiment_external() -> None:
    # Native Levantine evaluation set: 24 positive, 16 negative. The mock
    # marks negative on {زعلان صعب بشع محزن}; two positives carry a negative
    # marker and three negatives carry none, so the confusion matrix is
    # [[22, 2], [3, 13]] with accuracy 35/40.
    positive_texts = (
        ["اليوم كتير حلو والجو رائع"] * 10
        + ["مبسوط كتير بهالشغل"] * 8
        + ["الفيلم منيح بس الوقت صعب"] * 2
        + ["يوم حلو"] * 4
    )
    negative_texts = (
        ["هاليوم صعب ومتعب"] * 7
        + ["الوضع محزن كتير"] * 4
        + ["الطقس بشع اليوم"] * 2
        + ["ما بعرف شو بدي احكي"] * 3
    )
    docs = []
    for i, text in enumerate(positive_texts, start=1):
        docs.append(
            {
                "id": f"xp{i:03d}",
                "text": text,
                "lang": "ar-lev",
                "task": "sentiment",
                "label": "positive",
                "source": "toy-external-lev-sentiment",
            }
        )
    for i, text in enumerate(negative_texts, start=1):
        docs.append(
            {
                "id": f"xn{i:03d}",
                "text": text,
                "lang": "ar-lev",
                "task": "sentiment",
                "label": "negative",
                "source": "toy-external-lev-sentiment",
            }
        )
    jsonl(FIXTURES / "sentiment_ar-lev_external_40.jsonl", docs)


def make_hate_source() -> None:
    hate_texts = [
        "odio esta gente tonto",
        "que idiota es esto",
        "esto es basura",
        "gente mala y tonto",
        "odio este trabajo feo",
        "que estupido es",
        "esto es muy feo",
        "odio la calle fea",
    ]
    no_hate_texts = [
        "hola amigo feliz dia",
        "gracias por todo",
        "la ciudad es bonita",
        "el dia es bueno",
        "me gusta la musica",
        "hola que tal",
        "el trabajo es bueno",
        "la noche es tranquila",
        "gracias amigo",
        "feliz noche a todos",
        "la calle es bonita",
        "hola hola",
    ]
    docs = []
    for i, text in enumerate(hate_texts, start=1):
        docs.append(
            {
                "id": f"eh{i:03d}",
                "text": text,
                "lang": "es",
                "task": "hate",
                "label": "hate",
                "source": "toy-hate-es",
            }
        )
    for i, text in enumerate(no_hate_texts, start=1):
        docs.append(
            {
                "id": f"en{i:03d}",
                "text": text,
                "lang": "es",
                "task": "hate",
                "label": "no_hate",
                "source": "toy-hate-es",
            }
        )
    jsonl(FIXTURES / "hate_es_20.jsonl", docs)


def make_hate_external() -> None:
    # Native Levantine hate evaluation set: 50 hate + 50 no_hate.
    #   27 hate records carry the shared marker غبي   (both models hit)
    #    7 hate records carry Levantine-only markers  (only the lev model hits)
    #   16 hate records carry no marker               (both models miss)
    # so hate recall is 34/50 = 0.68 for the Levantine-trained mock and
    # 27/50 = 0.54 for the Gulf-trained mock, and the disagreement set is
    # exactly the 7 Levantine-marker ids.
    docs = []
    levantine_markers = ["هبيلة", "ازعر", "مجرور", "هبيلة", "ازعر", "مجرور", "هبيلة"]
    for i in range(1, 51):
        if i <= 27:
            text = f"هالشخص غبي وما بيفهم شي رقم {i}"
        elif i <= 34:
            marker = levantine_markers[i - 28]
            text = f"يا {marker} روح من هون رقم {i}"
        else:
            text = f"ما بدي شوفك ولا احكي معك رقم {i}"
        docs.append(
            {
                "id": f"xh{i:03d}",
                "text": text,
                "lang": "ar-lev",
                "task": "hate",
                "label": "hate",
                "source": "toy-external-lev-hate",
            }
        )
    for i in range(1, 51):
        text = f"يعطيك العافية شغل منيح رقم {i}"
        docs.append(
            {
                "id": f"xn{i:03d}",
                "text": text,
                "lang": "ar-lev",
                "task": "hate",
                "label": "no_hate",
                "source": "toy-external-lev-hate",
            }
        )
    jsonl(FIXTURES / "hate_ar-lev_external_100.jsonl", docs)


def make_mock_backend() -> None:
    tsv(
        MOCK / "fr__ar-lev.tsv",
        sorted(FR_AR_LEV.items()),
        "mock dictionary: French -> Levantine Arabic",
    )
    tsv(
        MOCK / "es__ar-lev.tsv",
        sorted((k, lev) for k, (lev, _) in ES_COMMON.items()),
        "mock dictionary: Spanish -> Levantine Arabic",
    )
    tsv(
        MOCK / "es__ar-glf.tsv",
        sorted((k, glf) for k, (_, glf) in ES_COMMON.items()),
        "mock dictionary: Spanish -> Gulf Arabic",
    )
    tsv(
        MOCK / "classify_sentiment.tsv",
        [
            ("بشع", "negative"),
            ("زعلان", "negative"),
            ("صعب", "negative"),
            ("محزن", "negative"),
            ("*", "positive"),
        ],
        "mock sentiment rules: keyword<TAB>label, * is the default",
    )
    tsv(
        MOCK / "classify_hate.ar-lev.tsv",
        [
            ("ازعر", "hate"),
            ("غبي", "hate"),
            ("مجرور", "hate"),
            ("هبيلة", "hate"),
            ("*", "no_hate"),
        ],
        "mock hate rules for the Levantine-trained model",
    )
    tsv(
        MOCK / "classify_hate.ar-glf.tsv",
        [
            ("غبي", "hate"),
            ("*", "no_hate"),
        ],
        "mock hate rules for the Gulf-trained model",
    )
    jobs = {
        "sentiment": [0.55, 0.62, 0.60, 0.64, 0.63, 0.62, 0.615, 0.61, 0.605, 0.60],
        "hate": [0.52, 0.60, 0.63, 0.62, 0.61, 0.60, 0.595, 0.59, 0.585],
        "nmt": [20.0, 28.5, 31.2, 30.8, 30.5, 30.2, 30.0, 29.8],
    }
    MOCK.mkdir(parents=True, exist_ok=True)
    (MOCK / "jobs.json").write_text(json.dumps(jobs, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {MOCK / 'jobs.json'}")


def main() -> None:
    make_parallel()
    make_sentiment_source()
    make_sentiment_external()
    make_hate_source()
    make_hate_external()
    make_mock_backend()


if __name__ == "__main__":
    main()
