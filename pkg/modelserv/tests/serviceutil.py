"""Shared helpers for the service test suite."""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

from fastapi.testclient import TestClient

# The primary toolkit's test directory provides the shared backend contract
# checks; the service must pass the same ones the mock backend passes.
PRIMARY_TESTS = Path(__file__).resolve().parent.parent.parent / "tests"
if str(PRIMARY_TESTS) not in sys.path:
    sys.path.insert(0, str(PRIMARY_TESTS))


class TestClientTransport:
    """Adapter: the toolkit's HTTP client driving the ASGI app in-process."""

    def __init__(self, client: TestClient):
        self.client = client

    def request(self, method: str, url: str, payload, timeout: float):
        response = self.client.request(method, url, json=payload)
        try:
            body = response.json()
        except ValueError:
            body = None
        return response.status_code, body


def write_copy_corpus(path: Path, n: int = 50, seed: int = 3) -> Path:
    """Parallel corpus whose target equals its source (the copy task)."""
    rng = random.Random(seed)
    vocab = ["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta",
             "iota", "kappa"]
    docs = []
    for i in range(n):
        words = " ".join(rng.choice(vocab) for _ in range(rng.randint(3, 7)))
        docs.append(
            {
                "pair_id": f"c{i:03d}",
                "src_text": words,
                "src_lang": "fr",
                "tgt_text": words,
                "tgt_lang": "ar-lev",
            }
        )
    path.write_text("\n".join(json.dumps(d) for d in docs) + "\n", encoding="utf-8")
    return path


def write_separable_corpus(path: Path, n: int = 60, seed: int = 5) -> Path:
    """Labeled corpus where one keyword fully determines the label."""
    rng = random.Random(seed)
    filler = ["يوم", "شغل", "ناس", "وقت", "كلام", "شي"]
    docs = []
    for i in range(n):
        marker = "سيئ" if i % 2 else "رائع"
        label = "negative" if i % 2 else "positive"
        words = [rng.choice(filler) for _ in range(rng.randint(2, 5))]
        words.insert(rng.randrange(len(words) + 1), marker)
        docs.append(
            {
                "id": f"s{i:03d}",
                "text": " ".join(words),
                "lang": "ar-lev",
                "task": "sentiment",
                "label": label,
            }
        )
    path.write_text("\n".join(json.dumps(d, ensure_ascii=False) for d in docs) + "\n",
                    encoding="utf-8")
    return path


COPY_JOB_HYPERPARAMS = {
    "max_steps": 320,
    "dropout": 0.0,
    "batch_size": 25,
}
