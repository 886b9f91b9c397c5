"""Fine-tune the pair classifier on sampled retrieval pairs.

Input is the sampler's JSONL: one object per line with ``query``, ``context``
and ``label`` (positive/negative). The objective is the summed binary cross
entropy over both classes; the value logged per epoch is the full-dataset
objective evaluated after that epoch's updates.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import torch

from .model import ScorerBackend, build_tokenizer, load_pretrained_backend

log = logging.getLogger("scorer_service")

# Reference values for paper-scale runs; toy runs on a freshly initialized
# encoder typically need a larger learning rate to move at all.
DEFAULT_LR = 1e-5
DEFAULT_EPOCHS = 3
DEFAULT_BATCH = 16


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainHyper:
    lr: float = DEFAULT_LR
    epochs: int = DEFAULT_EPOCHS
    batch: int = DEFAULT_BATCH
    seed: int = 0
    vocab_size: int = 2000
    max_seq_len: int = 128


def load_pairs(path: str | Path) -> list[dict]:
    pairs = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "query" not in obj or "context" not in obj or "label" not in obj:
                raise TrainingError(f"{path}:{lineno}: pair needs query/context/label")
            if obj["label"] not in ("positive", "negative"):
                raise TrainingError(f"{path}:{lineno}: bad label {obj['label']!r}")
            pairs.append(obj)
    return pairs


def _batch_tensors(backend: ScorerBackend, chunk: list[dict]):
    ids, mask, types = backend.encode_mixed([(p["query"], p["context"]) for p in chunk])
    y = torch.tensor(
        [1.0 if p["label"] == "positive" else 0.0 for p in chunk], device=backend.device
    )
    return ids, mask, types, y


def dataset_objective(backend: ScorerBackend, pairs: list[dict], batch: int) -> float:
    """Full-dataset summed binary cross entropy in eval mode."""
    backend.model.eval()
    total = 0.0
    with torch.no_grad():
        for start in range(0, len(pairs), batch):
            ids, mask, types, y = _batch_tensors(backend, pairs[start:start + batch])
            probs = backend.model(ids, mask, types).clamp(1e-7, 1 - 1e-7)
            total += float(torch.nn.functional.binary_cross_entropy(probs, y, reduction="sum"))
    return total


def train(
    pairs_path: str | Path,
    out_dir: str | Path,
    hyper: TrainHyper = TrainHyper(),
    model: str = "mini",
    device: str = "cpu",
) -> tuple[ScorerBackend, list[float]]:
    """Train and checkpoint; returns the backend and the objective trace
    (initial value first, then one per epoch). The checkpoint directory is
    loadable by serve."""
    pairs = load_pairs(pairs_path)
    if not pairs:
        raise TrainingError("no training pairs")
    labels = {p["label"] for p in pairs}
    if labels != {"positive", "negative"}:
        raise TrainingError(f"training data contains a single class: {sorted(labels)}")

    torch.manual_seed(hyper.seed)
    if model == "mini":
        texts = [p["query"] for p in pairs] + [p["context"] for p in pairs]
        tokenizer = build_tokenizer(texts, vocab_size=hyper.vocab_size)
        backend = ScorerBackend.fresh(tokenizer, max_seq_len=hyper.max_seq_len,
                                      device=device, seed=hyper.seed)
    else:
        backend = load_pretrained_backend(model, hyper.max_seq_len, device=device,
                                          seed=hyper.seed)

    optimizer = torch.optim.Adam(backend.model.parameters(), lr=hyper.lr)
    generator = torch.Generator().manual_seed(hyper.seed)

    losses = [dataset_objective(backend, pairs, hyper.batch)]
    log.info("initial objective: %.4f", losses[0])
    for epoch in range(hyper.epochs):
        backend.model.train()
        order = torch.randperm(len(pairs), generator=generator).tolist()
        for start in range(0, len(order), hyper.batch):
            chunk = [pairs[i] for i in order[start:start + hyper.batch]]
            ids, mask, types, y = _batch_tensors(backend, chunk)
            probs = backend.model(ids, mask, types).clamp(1e-7, 1 - 1e-7)
            loss = torch.nn.functional.binary_cross_entropy(probs, y, reduction="mean")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        epoch_loss = dataset_objective(backend, pairs, hyper.batch)
        if not math.isfinite(epoch_loss):
            raise TrainingError(f"objective diverged at epoch {epoch + 1}: {epoch_loss}")
        losses.append(epoch_loss)
        log.info("epoch %d objective: %.4f", epoch + 1, epoch_loss)

    backend.save(out_dir)
    (Path(out_dir) / "training_log.json").write_text(
        json.dumps({"epoch_objective": losses, "pairs": len(pairs),
                    "lr": hyper.lr, "epochs": hyper.epochs, "batch": hyper.batch},
                   indent=2) + "\n",
        encoding="utf-8",
    )
    return backend, losses
