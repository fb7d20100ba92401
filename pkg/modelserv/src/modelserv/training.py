"""Fine-tuning loops for the two job kinds.

Both loops share the same shape: train on minibatches, evaluate on the
validation split every ``eval_every`` steps, snapshot a checkpoint per
evaluation, and honor an external stop signal between evaluations. The
caller owns job state; the loops communicate through a ``report`` callback
and a ``should_stop`` probe.
"""

from __future__ import annotations

import copy
import random
from dataclasses import dataclass, field

import torch
from torch import nn

from .bleu import corpus_bleu
from .corpusio import TASK_LABELS, read_labeled, read_parallel
from .models import (
    BOS,
    EOS,
    PAD,
    RESERVED_PLACEHOLDERS,
    HashBagClassifier,
    TinySeq2Seq,
    Vocab,
    tokenize,
)

# Desk-scale defaults; jobs override any of these through their opaque
# hyperparameter map. The published-constants profile (1e-4 learning rate,
# 0.01 weight decay, 10,000 warmup steps) is accepted verbatim the same way.
TINY_DEFAULTS = {
    "learning_rate": 3e-3,
    "weight_decay": 0.0,
    "warmup_steps": 0,
    "batch_size": 16,
    "model_dim": 64,
    "heads": 2,
    "layers": 2,
    "dropout": 0.1,
    "max_evals": 8,
    # fraction of training samples that get protection placeholders spliced
    # into both sides, teaching the model to copy them verbatim
    "placeholder_augment": 0.15,
}


@dataclass
class EvalRecord:
    index: int
    step: int
    metric: float
    model_id: str
    train_loss: float


@dataclass
class TrainOutcome:
    evals: list[EvalRecord] = field(default_factory=list)
    checkpoints: dict[str, object] = field(default_factory=dict)
    hyperparams_used: dict = field(default_factory=dict)


def _hp(hyperparams: dict, key: str, cast=float):
    value = hyperparams.get(key, TINY_DEFAULTS.get(key))
    return cast(value) if value is not None else None


def _lr_lambda(warmup_steps: int):
    def schedule(step: int) -> float:
        if warmup_steps <= 0:
            return 1.0
        return min(1.0, (step + 1) / warmup_steps)

    return schedule


def _resolve_steps(hyperparams: dict, eval_every: int) -> tuple[int, int]:
    max_evals = int(_hp(hyperparams, "max_evals", int))
    max_steps = int(hyperparams.get("max_steps", eval_every * max_evals))
    return max_steps, max_evals


def run_finetune_seq2seq(job_id: str, job: dict, report, should_stop) -> TrainOutcome:
    """Train the translation model on a parallel corpus; validation metric
    is corpus BLEU of greedy decodes."""
    seed = int(job.get("seed", 0))
    torch.manual_seed(seed)
    rng = random.Random(seed)
    hyperparams = dict(job.get("hyperparams", {}))
    eval_every = int(job.get("eval_every", 100))

    train_records = read_parallel(job["corpora"]["train"])
    validation_uri = job["corpora"].get("validation")
    val_records = read_parallel(validation_uri) if validation_uri else train_records

    src_vocab = Vocab(tok for r in train_records for tok in tokenize(r.src_text))
    tgt_vocab = Vocab(tok for r in train_records for tok in tokenize(r.tgt_text))
    model = TinySeq2Seq(
        src_vocab,
        tgt_vocab,
        dim=int(_hp(hyperparams, "model_dim", int)),
        heads=int(_hp(hyperparams, "heads", int)),
        layers=int(_hp(hyperparams, "layers", int)),
        dropout=_hp(hyperparams, "dropout"),
    )
    optimizer = torch.optim.AdamW(
        model.parameters(),
        lr=_hp(hyperparams, "learning_rate"),
        weight_decay=_hp(hyperparams, "weight_decay"),
    )
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, _lr_lambda(int(_hp(hyperparams, "warmup_steps", int)))
    )
    loss_fn = nn.CrossEntropyLoss(ignore_index=PAD)
    batch_size = int(_hp(hyperparams, "batch_size", int))
    max_steps, _ = _resolve_steps(hyperparams, eval_every)

    augment_rate = _hp(hyperparams, "placeholder_augment")

    def augmented_tokens(record):
        src_tokens = tokenize(record.src_text)
        tgt_tokens = tokenize(record.tgt_text)
        if augment_rate and rng.random() < augment_rate and src_tokens and tgt_tokens:
            markers = rng.sample(RESERVED_PLACEHOLDERS[:8], rng.randint(1, 2))
            positions = sorted(rng.randint(0, len(src_tokens)) for _ in markers)
            for offset, (marker, s_pos) in enumerate(zip(markers, positions)):
                # proportionally aligned target slot keeps copy-style pairs
                # exact copies and preserves placeholder order elsewhere
                t_pos = round(s_pos / len(src_tokens) * len(tgt_tokens))
                src_tokens.insert(s_pos + offset, marker)
                tgt_tokens.insert(min(t_pos + offset, len(tgt_tokens)), marker)
        return src_tokens, tgt_tokens

    def encode_batch(records):
        src: list[list[int]] = []
        tgt: list[list[int]] = []
        for record in records:
            src_tokens, tgt_tokens = augmented_tokens(record)
            src.append(src_vocab.encode(src_tokens)[: model.max_len])
            tgt.append(
                [BOS] + tgt_vocab.encode(tgt_tokens)[: model.max_len - 2] + [EOS]
            )
        src_width = max(len(s) for s in src)
        tgt_width = max(len(t) for t in tgt)
        src_ids = torch.tensor([s + [PAD] * (src_width - len(s)) for s in src])
        tgt_ids = torch.tensor([t + [PAD] * (tgt_width - len(t)) for t in tgt])
        return src_ids, tgt_ids

    outcome = TrainOutcome(hyperparams_used={**TINY_DEFAULTS, **hyperparams})
    window_losses: list[float] = []
    eval_index = 0
    for step in range(1, max_steps + 1):
        model.train()
        batch = rng.sample(train_records, min(batch_size, len(train_records)))
        src_ids, tgt_ids = encode_batch(batch)
        logits = model(src_ids, tgt_ids[:, :-1])
        loss = loss_fn(logits.reshape(-1, logits.size(-1)), tgt_ids[:, 1:].reshape(-1))
        optimizer.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), 1.0)
        optimizer.step()
        scheduler.step()
        window_losses.append(float(loss.detach()))

        if step % eval_every == 0:
            eval_index += 1
            hypotheses = [
                tokenize(h) for h in model.greedy_decode([r.src_text for r in val_records])
            ]
            references = [tokenize(r.tgt_text) for r in val_records]
            metric = corpus_bleu(hypotheses, references)
            snapshot = copy.deepcopy(model)
            snapshot.eval()
            ckpt_id = f"{job_id}-ckpt-{eval_index}"
            outcome.checkpoints[ckpt_id] = snapshot
            record = EvalRecord(
                index=eval_index,
                step=step,
                metric=metric,
                model_id=ckpt_id,
                train_loss=sum(window_losses) / len(window_losses),
            )
            outcome.evals.append(record)
            window_losses = []
            report(record)
            if should_stop():
                break
    return outcome


def macro_f1(truth: list[str], predicted: list[str], classes) -> float:
    scores = []
    for cls in classes:
        tp = sum(1 for t, p in zip(truth, predicted) if t == cls and p == cls)
        fp = sum(1 for t, p in zip(truth, predicted) if t != cls and p == cls)
        fn = sum(1 for t, p in zip(truth, predicted) if t == cls and p != cls)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        scores.append(
            0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        )
    return sum(scores) / len(scores)


def run_finetune_classifier(job_id: str, job: dict, report, should_stop) -> TrainOutcome:
    """Train a task classifier on a labeled corpus; validation metric is
    macro-F1. A ``freeze_encoder`` hyperparameter freezes the embeddings."""
    seed = int(job.get("seed", 0))
    torch.manual_seed(seed)
    rng = random.Random(seed)
    hyperparams = dict(job.get("hyperparams", {}))
    eval_every = int(job.get("eval_every", 100))
    task = job.get("task")
    if task not in TASK_LABELS:
        raise ValueError(f"classifier jobs need a task in {sorted(TASK_LABELS)}")
    classes = TASK_LABELS[task]

    train_records = read_labeled(job["corpora"]["train"], task)
    validation_uri = job["corpora"].get("validation")
    val_records = read_labeled(validation_uri, task) if validation_uri else train_records

    model = HashBagClassifier(classes, dim=int(_hp(hyperparams, "model_dim", int) or 32))
    frozen = bool(hyperparams.get("freeze_encoder", False))
    if frozen:
        model.freeze_encoder()
    optimizer = torch.optim.AdamW(
        (p for p in model.parameters() if p.requires_grad),
        lr=_hp(hyperparams, "learning_rate"),
        weight_decay=_hp(hyperparams, "weight_decay"),
    )
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, _lr_lambda(int(_hp(hyperparams, "warmup_steps", int)))
    )
    loss_fn = nn.CrossEntropyLoss()
    batch_size = int(_hp(hyperparams, "batch_size", int))
    max_steps, _ = _resolve_steps(hyperparams, eval_every)
    label_index = {cls: i for i, cls in enumerate(classes)}

    outcome = TrainOutcome(
        hyperparams_used={**TINY_DEFAULTS, **hyperparams, "freeze_encoder": frozen}
    )
    window_losses: list[float] = []
    eval_index = 0
    for step in range(1, max_steps + 1):
        model.train()
        batch = rng.sample(train_records, min(batch_size, len(train_records)))
        logits = model([r.text for r in batch])
        target = torch.tensor([label_index[r.label] for r in batch])
        loss = loss_fn(logits, target)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        scheduler.step()
        window_losses.append(float(loss.detach()))

        if step % eval_every == 0:
            eval_index += 1
            predictions = model.predict([r.text for r in val_records])
            predicted = [max(p, key=p.get) for p in predictions]
            metric = macro_f1([r.label for r in val_records], predicted, classes)
            snapshot = copy.deepcopy(model)
            snapshot.eval()
            ckpt_id = f"{job_id}-ckpt-{eval_index}"
            outcome.checkpoints[ckpt_id] = snapshot
            record = EvalRecord(
                index=eval_index,
                step=step,
                metric=metric,
                model_id=ckpt_id,
                train_loss=sum(window_losses) / len(window_losses),
            )
            outcome.evals.append(record)
            window_losses = []
            report(record)
            if should_stop():
                break
    return outcome
