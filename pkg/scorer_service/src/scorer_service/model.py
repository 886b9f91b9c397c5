"""Pair classifier: bidirectional encoder, affine head on the leading token,
sigmoid output.

Inputs follow the ``[CLS] query [SEP] context [SEP]`` layout; the context
segment is truncated from the right to fit the length budget after the query.
Two backbones are supported: a compact locally-initialized encoder with a
WordPiece tokenizer trained on the task's own pairs (the offline default),
and any pretrained encoder loadable through ``transformers`` when a model
hub or cache is available.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch
from collections import Counter

from tokenizers import Tokenizer
from tokenizers.models import WordPiece
from tokenizers.normalizers import NFD, Lowercase, Sequence as NormSequence, StripAccents
from tokenizers.pre_tokenizers import Whitespace
from tokenizers.processors import TemplateProcessing
from torch import nn
from transformers import BertConfig, BertModel

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]

MINI_ENCODER = dict(
    hidden_size=64,
    num_hidden_layers=2,
    num_attention_heads=2,
    intermediate_size=128,
    max_position_embeddings=256,
)


class QueryTooLongError(ValueError):
    """The query alone leaves no room for any context token."""


def _pipeline_stubs():
    normalizer = NormSequence([NFD(), Lowercase(), StripAccents()])
    return normalizer, Whitespace()


def build_tokenizer(texts, vocab_size: int = 2000) -> Tokenizer:
    """Word-level lowercased vocabulary over the given texts, with the pair
    template attached.

    Ids are assigned by descending frequency then lexicographic order, so the
    vocabulary is deterministic for fixed inputs (the library's subword
    trainer is not). Out-of-vocabulary words map to [UNK].
    """
    normalizer, pre_tokenizer = _pipeline_stubs()
    counts: Counter[str] = Counter()
    for text in texts:
        normalized = normalizer.normalize_str(text)
        counts.update(word for word, _span in pre_tokenizer.pre_tokenize_str(normalized))
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    vocab = {token: i for i, token in enumerate(SPECIALS)}
    for word, _count in ranked[: max(vocab_size - len(SPECIALS), 0)]:
        vocab[word] = len(vocab)

    tokenizer = Tokenizer(WordPiece(vocab, unk_token="[UNK]"))
    tokenizer.normalizer, tokenizer.pre_tokenizer = _pipeline_stubs()
    _attach_pair_template(tokenizer)
    return tokenizer


def _attach_pair_template(tokenizer: Tokenizer) -> None:
    cls_id = tokenizer.token_to_id("[CLS]")
    sep_id = tokenizer.token_to_id("[SEP]")
    tokenizer.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B:1 [SEP]:1",
        special_tokens=[("[CLS]", cls_id), ("[SEP]", sep_id)],
    )
    tokenizer.enable_padding(pad_id=tokenizer.token_to_id("[PAD]"), pad_token="[PAD]")


class PairScorer(nn.Module):
    """Encoder plus a scalar affine head over the first position."""

    def __init__(self, encoder: nn.Module, hidden_size: int):
        super().__init__()
        self.encoder = encoder
        self.head = nn.Linear(hidden_size, 1)

    def forward(self, input_ids, attention_mask, token_type_ids):
        out = self.encoder(
            input_ids=input_ids,
            attention_mask=attention_mask,
            token_type_ids=token_type_ids,
        )
        first = out.last_hidden_state[:, 0]
        return torch.sigmoid(self.head(first)).squeeze(-1)


class ScorerBackend:
    """Tokenizer + model + device under one scoring interface."""

    def __init__(self, model: PairScorer, tokenizer: Tokenizer, max_seq_len: int,
                 device: str = "cpu", name: str = "mini", encoder_config: dict | None = None):
        self.model = model.to(device)
        self.tokenizer = tokenizer
        self.max_seq_len = max_seq_len
        self.device = device
        self.name = name
        self.encoder_config = encoder_config or {}
        # untruncated clone for measuring query length; the main tokenizer
        # truncates the context segment from the right
        self._query_counter = Tokenizer.from_str(tokenizer.to_str())
        self._query_counter.no_truncation()
        self.tokenizer.enable_truncation(max_length=max_seq_len, strategy="only_second")

    def _check_query_budget(self, query: str) -> None:
        q_tokens = len(self._query_counter.encode(query).ids)  # includes [CLS] . [SEP]
        # a pair adds one more [SEP]; require room for at least one context token
        if q_tokens + 2 > self.max_seq_len:
            raise QueryTooLongError(
                f"query occupies {q_tokens} of {self.max_seq_len} positions; "
                "no context fits after truncation"
            )

    def encode_pairs(self, query: str, texts: list[str]):
        self._check_query_budget(query)
        return self.encode_mixed([(query, t) for t in texts])

    def encode_mixed(self, pairs: list[tuple[str, str]]):
        """Encode (query, context) pairs; queries may differ (training batches)."""
        encodings = self.tokenizer.encode_batch(
            [(q, t if t else "[UNK]") for q, t in pairs]
        )
        input_ids = torch.tensor([e.ids for e in encodings], device=self.device)
        attention = torch.tensor([e.attention_mask for e in encodings], device=self.device)
        type_ids = torch.tensor([e.type_ids for e in encodings], device=self.device)
        return input_ids, attention, type_ids

    def score(self, query: str, texts: list[str], batch_size: int = 32) -> list[float]:
        if not texts:
            return []
        self.model.eval()
        scores: list[float] = []
        with torch.no_grad():
            for start in range(0, len(texts), batch_size):
                chunk = texts[start:start + batch_size]
                input_ids, attention, type_ids = self.encode_pairs(query, chunk)
                out = self.model(input_ids, attention, type_ids)
                scores.extend(float(s) for s in out.reshape(-1).tolist())
        return [min(max(s, 0.0), 1.0) for s in scores]

    # -- persistence --------------------------------------------------------

    def save(self, out_dir: str | Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.tokenizer.save(str(out_dir / "tokenizer.json"))
        torch.save(self.model.state_dict(), out_dir / "weights.pt")
        meta = {
            "backend": self.name,
            "max_seq_len": self.max_seq_len,
            "encoder_config": self.encoder_config,
        }
        (out_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, checkpoint: str | Path, device: str = "cpu") -> "ScorerBackend":
        checkpoint = Path(checkpoint)
        meta = json.loads((checkpoint / "meta.json").read_text(encoding="utf-8"))
        tokenizer = Tokenizer.from_file(str(checkpoint / "tokenizer.json"))
        _attach_pair_template(tokenizer)
        backend = cls.fresh(
            tokenizer,
            max_seq_len=meta["max_seq_len"],
            device=device,
            encoder_config=meta["encoder_config"],
            name=meta.get("backend", "mini"),
        )
        state = torch.load(checkpoint / "weights.pt", map_location=device, weights_only=True)
        backend.model.load_state_dict(state)
        return backend

    @classmethod
    def fresh(cls, tokenizer: Tokenizer, max_seq_len: int, device: str = "cpu",
              encoder_config: dict | None = None, name: str = "mini",
              seed: int = 0) -> "ScorerBackend":
        params = dict(MINI_ENCODER)
        params.update(encoder_config or {})
        torch.manual_seed(seed)
        config = BertConfig(vocab_size=tokenizer.get_vocab_size(), **params)
        model = PairScorer(BertModel(config), config.hidden_size)
        return cls(model, tokenizer, max_seq_len, device=device,
                   name=name, encoder_config=params)


def load_pretrained_backend(model_id: str, max_seq_len: int, device: str = "cpu",
                            seed: int = 0) -> "HFBackend":
    """Backend over a pretrained encoder from the transformers hub/cache.
    Requires network access or a local cache; the head starts fresh."""
    from transformers import AutoModel, AutoTokenizer

    hf_tokenizer = AutoTokenizer.from_pretrained(model_id)
    encoder = AutoModel.from_pretrained(model_id)
    torch.manual_seed(seed)
    model = PairScorer(encoder, encoder.config.hidden_size)
    return HFBackend(model, hf_tokenizer, max_seq_len, device=device, name=model_id)


class HFBackend(ScorerBackend):
    """ScorerBackend over a transformers tokenizer instead of a raw one."""

    def __init__(self, model, hf_tokenizer, max_seq_len, device="cpu", name="hf"):
        self.model = model.to(device)
        self.tokenizer = hf_tokenizer
        self.max_seq_len = max_seq_len
        self.device = device
        self.name = name
        self.encoder_config = {}

    def _check_query_budget(self, query: str) -> None:
        q_tokens = len(self.tokenizer(query)["input_ids"])
        if q_tokens + 2 > self.max_seq_len:
            raise QueryTooLongError(
                f"query occupies {q_tokens} of {self.max_seq_len} positions"
            )

    def encode_pairs(self, query: str, texts: list[str]):
        self._check_query_budget(query)
        return self.encode_mixed([(query, t) for t in texts])

    def encode_mixed(self, pairs: list[tuple[str, str]]):
        enc = self.tokenizer(
            [q for q, _ in pairs],
            [t if t else self.tokenizer.unk_token for _, t in pairs],
            truncation="only_second",
            max_length=self.max_seq_len,
            padding=True,
            return_tensors="pt",
        )
        type_ids = enc.get("token_type_ids")
        if type_ids is None:
            type_ids = torch.zeros_like(enc["input_ids"])
        return (enc["input_ids"].to(self.device),
                enc["attention_mask"].to(self.device),
                type_ids.to(self.device))

    def save(self, out_dir: str | Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.tokenizer.save_pretrained(out_dir / "hf_tokenizer")
        torch.save(self.model.state_dict(), out_dir / "weights.pt")
        self.model.encoder.config.save_pretrained(out_dir / "hf_encoder")
        meta = {"backend": "hf", "max_seq_len": self.max_seq_len, "name": self.name}
        (out_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def load_backend(model: str, max_seq_len: int, device: str = "cpu") -> ScorerBackend:
    """Resolve a model spec: checkpoint directory, or hub identifier."""
    path = Path(model)
    if (path / "meta.json").exists():
        meta = json.loads((path / "meta.json").read_text(encoding="utf-8"))
        if meta.get("backend") == "hf":
            from transformers import AutoConfig, AutoModel, AutoTokenizer

            hf_tokenizer = AutoTokenizer.from_pretrained(path / "hf_tokenizer")
            config = AutoConfig.from_pretrained(path / "hf_encoder")
            model_obj = PairScorer(AutoModel.from_config(config), config.hidden_size)
            backend = HFBackend(model_obj, hf_tokenizer, meta["max_seq_len"], device=device,
                                name=meta.get("name", "hf"))
            state = torch.load(path / "weights.pt", map_location=device, weights_only=True)
            backend.model.load_state_dict(state)
            return backend
        return ScorerBackend.load(path, device=device)
    if model == "mini":
        raise ValueError(
            "'mini' is only valid for training; serving needs a trained checkpoint directory"
        )
    return load_pretrained_backend(model, max_seq_len, device=device)
