"""Model definitions: a small word-level sequence-to-sequence transformer
for translation and a hashed-embedding classifier with a feed-forward head
for the social-behavior tasks.

Tokenization is whitespace splitting, so the protection placeholders the
client toolkit injects (U+E000 ordinal U+E001) are atomic tokens; the
translation vocabulary reserves them explicitly so unseen ordinals never
degrade to the unknown token.
"""

from __future__ import annotations

import hashlib
import math

import torch
from torch import nn

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ("<pad>", "<bos>", "<eos>", "<unk>")

RESERVED_PLACEHOLDERS = tuple(f"{i}" for i in range(32))


def tokenize(text: str) -> list[str]:
    return text.split()


class Vocab:
    def __init__(self, tokens):
        self.itos: list[str] = list(SPECIALS) + list(RESERVED_PLACEHOLDERS)
        seen = set(self.itos)
        for token in tokens:
            if token not in seen:
                seen.add(token)
                self.itos.append(token)
        self.stoi = {tok: i for i, tok in enumerate(self.itos)}

    def __len__(self) -> int:
        return len(self.itos)

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.stoi.get(tok, UNK) for tok in tokens]

    def decode(self, ids) -> list[str]:
        return [self.itos[i] for i in ids if i not in (PAD, BOS, EOS)]


class TinySeq2Seq(nn.Module):
    def __init__(
        self,
        src_vocab: Vocab,
        tgt_vocab: Vocab,
        dim: int = 64,
        heads: int = 2,
        layers: int = 2,
        dropout: float = 0.1,
        max_len: int = 48,
    ):
        super().__init__()
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.max_len = max_len
        self.src_embed = nn.Embedding(len(src_vocab), dim, padding_idx=PAD)
        self.tgt_embed = nn.Embedding(len(tgt_vocab), dim, padding_idx=PAD)
        self.pos_embed = nn.Embedding(max_len, dim)
        self.transformer = nn.Transformer(
            d_model=dim,
            nhead=heads,
            num_encoder_layers=layers,
            num_decoder_layers=layers,
            dim_feedforward=dim * 2,
            dropout=dropout,
            batch_first=True,
            norm_first=True,
        )
        self.out = nn.Linear(dim, len(tgt_vocab))
        self.scale = math.sqrt(dim)

    def _positions(self, length: int, device) -> torch.Tensor:
        return torch.arange(min(length, self.max_len), device=device)

    def _embed(self, table: nn.Embedding, ids: torch.Tensor) -> torch.Tensor:
        ids = ids[:, : self.max_len]
        positions = self._positions(ids.size(1), ids.device)
        return table(ids) * self.scale + self.pos_embed(positions)

    def forward(self, src_ids: torch.Tensor, tgt_in_ids: torch.Tensor) -> torch.Tensor:
        src_ids = src_ids[:, : self.max_len]
        tgt_in_ids = tgt_in_ids[:, : self.max_len]
        width = tgt_in_ids.size(1)
        causal = torch.triu(
            torch.ones(width, width, dtype=torch.bool, device=src_ids.device),
            diagonal=1,
        )
        hidden = self.transformer(
            self._embed(self.src_embed, src_ids),
            self._embed(self.tgt_embed, tgt_in_ids),
            tgt_mask=causal,
            src_key_padding_mask=src_ids.eq(PAD),
            memory_key_padding_mask=src_ids.eq(PAD),
            tgt_key_padding_mask=tgt_in_ids.eq(PAD),
        )
        return self.out(hidden)

    @torch.no_grad()
    def greedy_decode(self, texts: list[str]) -> list[str]:
        self.eval()
        out: list[str] = []
        for text in texts:
            tokens = tokenize(text)
            if not tokens:
                out.append("")
                continue
            src = torch.tensor([self.src_vocab.encode(tokens)[: self.max_len]])
            generated = [BOS]
            for _ in range(min(self.max_len - 1, 2 * len(tokens) + 4)):
                logits = self.forward(src, torch.tensor([generated]))
                next_id = int(logits[0, -1].argmax())
                if next_id == EOS:
                    break
                generated.append(next_id)
            out.append(" ".join(self.tgt_vocab.decode(generated)))
        return out


_HASH_BUCKETS = 2048


def hash_bucket(token: str) -> int:
    digest = hashlib.md5(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") % _HASH_BUCKETS


class HashBagClassifier(nn.Module):
    """Mean-pooled hashed embeddings (the encoder) under a feed-forward
    classification head whose logits go through softmax at serving time."""

    def __init__(self, classes: tuple[str, ...], dim: int = 32):
        super().__init__()
        self.classes = tuple(classes)
        self.embedding = nn.EmbeddingBag(_HASH_BUCKETS, dim, mode="mean")
        self.head = nn.Sequential(
            nn.Linear(dim, dim),
            nn.ReLU(),
            nn.Linear(dim, len(self.classes)),
        )

    def freeze_encoder(self) -> None:
        self.embedding.requires_grad_(False)

    @staticmethod
    def batch_tensors(texts: list[str]) -> tuple[torch.Tensor, torch.Tensor]:
        flat: list[int] = []
        offsets: list[int] = []
        for text in texts:
            offsets.append(len(flat))
            tokens = tokenize(text) or ["<empty>"]
            flat.extend(hash_bucket(tok) for tok in tokens)
        return torch.tensor(flat, dtype=torch.long), torch.tensor(offsets, dtype=torch.long)

    def forward(self, texts: list[str]) -> torch.Tensor:
        flat, offsets = self.batch_tensors(texts)
        return self.head(self.embedding(flat, offsets))

    @torch.no_grad()
    def predict(self, texts: list[str]) -> list[dict[str, float]]:
        self.eval()
        probabilities = torch.softmax(self.forward(texts), dim=-1)
        return [
            {cls: float(row[i]) for i, cls in enumerate(self.classes)}
            for row in probabilities
        ]
