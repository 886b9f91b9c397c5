"""Relevance scorers used at the paragraph and sentence filtering stages.

Three interchangeable scorer kinds sit behind one interface:

* ``LexicalScorer``   built-in logistic regression over lexical features,
  trained with the retrieval objective
  J = -sum_pos log(p) - sum_neg log(1 - p) by mini-batch gradient descent.
* ``RemoteScorer``    client for the JSON-over-HTTP wire protocol
  (``POST /score``, ``GET /health``); batches are split, sent, and
  reassembled in order.
* ``TableScorer``     deterministic id -> score lookup, used to inject fixed
  scores in experiments and tests.

Feature vector (``FEATURE_SPEC_VERSION``): unigram overlap ratio, bigram
overlap ratio, idf-weighted overlap, log context length, title-match
indicator, tf-idf cosine. The idf table defaults to uniform 1.0 when no
index statistics are supplied; the title defaults to empty, which zeroes the
title-match feature.

Candidate id strings follow ``<title>#p<i>`` for paragraphs and
``<title>#s<j>`` for sentences; the built-in scorer recovers the title from
that format for the title-match feature.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np
import requests

from .text import bigrams, contains_subsequence, tokenize

FEATURE_SPEC_VERSION = "lexical-v1"
N_FEATURES = 6

_ID_TITLE_RE = re.compile(r"^(?P<title>.+?)#(?:p|s)\d+(?:#s\d+)?$")


class ScorerError(Exception):
    pass


class ScorerTransportError(ScorerError):
    """Remote endpoint unreachable or unresponsive."""


class ScorerConnectionError(ScorerTransportError):
    pass


class ScorerTimeoutError(ScorerTransportError):
    pass


class ScorerProtocolError(ScorerError):
    """Remote endpoint violated the wire protocol."""


class TrainingError(ScorerError):
    pass


@dataclass(frozen=True)
class ScoredCandidate:
    id: object
    score: float

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score out of range [0, 1]: {self.score}")


@dataclass(frozen=True)
class LabeledPair:
    query_text: str
    context_text: str
    label: str                 # "positive" | "negative"
    provenance: str            # "ground_truth" | "upstream_sampled"
    context_id: str | None = None

    def __post_init__(self):
        if self.label not in ("positive", "negative"):
            raise ValueError(f"label must be positive/negative, got {self.label!r}")
        if self.provenance not in ("ground_truth", "upstream_sampled"):
            raise ValueError(f"unknown provenance: {self.provenance!r}")
        if self.label == "positive" and self.provenance != "ground_truth":
            raise ValueError("positive pairs must come from ground truth")


def parse_title_from_id(candidate_id: str) -> str | None:
    match = _ID_TITLE_RE.match(candidate_id)
    return match.group("title") if match else None


def paragraph_id_str(title: str, para_index: int) -> str:
    return f"{title}#p{para_index}"


def sentence_id_str(title: str, sent_index: int) -> str:
    return f"{title}#s{sent_index}"


def extract_features(
    query: str,
    context: str,
    title: str | None = None,
    idf: Callable[[str], float] | None = None,
) -> np.ndarray:
    """Lexical feature vector for a (query, context) pair. All entries finite."""
    weight = idf if idf is not None else (lambda _t: 1.0)
    q_tokens = tokenize(query)
    c_tokens = tokenize(context)
    q_set, c_set = set(q_tokens), set(c_tokens)

    uni = len(q_set & c_set) / len(q_set) if q_set else 0.0

    q_bi, c_bi = set(bigrams(q_tokens)), set(bigrams(c_tokens))
    bi = len(q_bi & c_bi) / len(q_bi) if q_bi else 0.0

    q_idf_total = sum(weight(t) for t in q_set)
    idf_overlap = (
        sum(weight(t) for t in q_set & c_set) / q_idf_total if q_idf_total > 0 else 0.0
    )

    log_len = math.log(1.0 + len(c_tokens))

    title_match = 0.0
    if title:
        title_tokens = tokenize(title)
        if title_tokens and contains_subsequence(q_tokens, title_tokens):
            title_match = 1.0

    cosine = _tfidf_cosine(q_tokens, c_tokens, weight)
    return np.array([uni, bi, idf_overlap, log_len, title_match, cosine], dtype=np.float64)


def _tfidf_cosine(q_tokens: list[str], c_tokens: list[str], weight) -> float:
    def vec(tokens: list[str]) -> dict[str, float]:
        counts: dict[str, int] = {}
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
        return {t: (1.0 + math.log(c)) * weight(t) for t, c in counts.items()}

    qv, cv = vec(q_tokens), vec(c_tokens)
    dot = sum(w * cv[t] for t, w in qv.items() if t in cv)
    qn = math.sqrt(sum(w * w for w in qv.values()))
    cn = math.sqrt(sum(w * w for w in cv.values()))
    if qn == 0.0 or cn == 0.0:
        return 0.0
    return dot / (qn * cn)


def sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    arr = np.atleast_1d(np.asarray(z, dtype=np.float64))
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ez = np.exp(arr[~pos])
    out[~pos] = ez / (1.0 + ez)
    return float(out[0]) if np.isscalar(z) or np.ndim(z) == 0 else out


@dataclass
class LexicalScorerModel:
    weights: np.ndarray
    bias: float
    feature_spec_version: str = FEATURE_SPEC_VERSION

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} weights, got shape {self.weights.shape}")

    @classmethod
    def zeros(cls) -> "LexicalScorerModel":
        return cls(weights=np.zeros(N_FEATURES), bias=0.0)

    def save(self, path: str | Path) -> None:
        payload = {
            "feature_spec_version": self.feature_spec_version,
            "weights": [float(w) for w in self.weights],
            "bias": float(self.bias),
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "LexicalScorerModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("feature_spec_version") != FEATURE_SPEC_VERSION:
            raise ValueError(
                f"feature spec mismatch: {payload.get('feature_spec_version')!r} != {FEATURE_SPEC_VERSION!r}"
            )
        return cls(weights=np.array(payload["weights"]), bias=payload["bias"])


class Scorer(Protocol):
    def score_batch(self, query: str, contexts: Sequence[tuple[str, str]]) -> list[ScoredCandidate]:
        """One score in [0, 1] per (id, text) input, order preserved."""


class LexicalScorer:
    """Pure, deterministic scorer: sigmoid(w . features + b)."""

    def __init__(self, model: LexicalScorerModel | None = None,
                 idf: Callable[[str], float] | None = None):
        self.model = model if model is not None else LexicalScorerModel.zeros()
        self.idf = idf

    def score_one(self, query: str, text: str, title: str | None = None) -> float:
        f = extract_features(query, text, title=title, idf=self.idf)
        return float(sigmoid(float(self.model.weights @ f) + self.model.bias))

    def score_batch(self, query: str, contexts: Sequence[tuple[str, str]]) -> list[ScoredCandidate]:
        out = []
        for cid, text in contexts:
            title = parse_title_from_id(cid) if isinstance(cid, str) else None
            out.append(ScoredCandidate(id=cid, score=self.score_one(query, text, title)))
        return out


class TableScorer:
    """Fixed id -> score lookup with a default for unlisted ids."""

    def __init__(self, scores: dict[str, float], default: float = 0.0):
        self.scores = dict(scores)
        self.default = default

    @classmethod
    def load(cls, path: str | Path) -> "TableScorer":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(scores=payload["scores"], default=payload.get("default", 0.0))

    def score_batch(self, query: str, contexts: Sequence[tuple[str, str]]) -> list[ScoredCandidate]:
        return [ScoredCandidate(id=cid, score=self.scores.get(cid, self.default)) for cid, _ in contexts]


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0


def pairs_to_arrays(data: Sequence[LabeledPair],
                    idf: Callable[[str], float] | None = None) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([
        extract_features(p.query_text, p.context_text,
                         title=parse_title_from_id(p.context_id) if p.context_id else None,
                         idf=idf)
        for p in data
    ])
    y = np.array([1.0 if p.label == "positive" else 0.0 for p in data])
    return x, y


def retrieval_loss_and_grad(
    weights: np.ndarray, bias: float, x: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray, float]:
    """The retrieval objective (summed binary cross entropy) and its exact gradient."""
    z = x @ weights + bias
    p = np.clip(sigmoid(z), 1e-12, 1.0 - 1e-12)
    loss = float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).sum())
    residual = p - y
    return loss, x.T @ residual, float(residual.sum())


def train_logistic_scorer(
    data: Sequence[LabeledPair],
    config: TrainConfig = TrainConfig(),
    idf: Callable[[str], float] | None = None,
) -> tuple[LexicalScorerModel, list[float]]:
    """Minimize the retrieval objective over the labeled pairs.

    Weights start at zero (untrained score is exactly 0.5). Returns the model
    and the objective value at initialization followed by each epoch end.
    Reproducible under a fixed seed.
    """
    if not data:
        raise TrainingError("no training pairs")
    x, y = pairs_to_arrays(data, idf=idf)
    if y.min() == y.max():
        raise TrainingError("training data contains a single class; need positives and negatives")

    rng = np.random.default_rng(config.seed)
    w = np.zeros(N_FEATURES)
    b = 0.0
    losses = [retrieval_loss_and_grad(w, b, x, y)[0]]
    n = len(y)
    for _epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            _, gw, gb = retrieval_loss_and_grad(w, b, x[batch], y[batch])
            scale = config.learning_rate / len(batch)
            w -= scale * gw
            b -= scale * gb
        loss = retrieval_loss_and_grad(w, b, x, y)[0]
        if not math.isfinite(loss):
            raise TrainingError(
                f"objective diverged at epoch {_epoch}: loss={loss}, |w|={np.abs(w).max():.3g}, "
                f"lr={config.learning_rate}"
            )
        losses.append(loss)
    return LexicalScorerModel(weights=w, bias=b), losses


class RemoteScorer:
    """Client for the scorer wire protocol. Health is checked on first use."""

    def __init__(self, endpoint: str, timeout: float = 10.0, batch_size: int = 128,
                 session: requests.Session | None = None):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.batch_size = batch_size
        self._session = session or requests.Session()
        self._healthy = False

    def check_health(self) -> dict:
        try:
            resp = self._session.get(f"{self.endpoint}/health", timeout=self.timeout)
        except requests.exceptions.ConnectTimeout as exc:
            raise ScorerTimeoutError(f"health check timed out: {self.endpoint}") from exc
        except requests.exceptions.ConnectionError as exc:
            raise ScorerConnectionError(f"cannot connect to scorer at {self.endpoint}") from exc
        except requests.exceptions.Timeout as exc:
            raise ScorerTimeoutError(f"health check timed out: {self.endpoint}") from exc
        if resp.status_code != 200:
            raise ScorerConnectionError(f"health check failed with HTTP {resp.status_code}")
        body = resp.json()
        if body.get("status") != "ok":
            raise ScorerConnectionError(f"scorer unhealthy: {body!r}")
        self._healthy = True
        return body

    def score_batch(self, query: str, contexts: Sequence[tuple[str, str]]) -> list[ScoredCandidate]:
        if not self._healthy:
            self.check_health()
        results: list[ScoredCandidate] = []
        for start in range(0, len(contexts), self.batch_size):
            chunk = contexts[start : start + self.batch_size]
            scores = self._score_chunk(query, chunk)
            results.extend(ScoredCandidate(id=cid, score=s) for (cid, _), s in zip(chunk, scores))
        return results

    def _score_chunk(self, query: str, chunk: Sequence[tuple[str, str]]) -> list[float]:
        payload = {"query": query, "contexts": [{"id": str(cid), "text": text} for cid, text in chunk]}
        try:
            resp = self._session.post(f"{self.endpoint}/score", json=payload, timeout=self.timeout)
        except requests.exceptions.ConnectTimeout as exc:
            raise ScorerTimeoutError(f"scorer request timed out: {self.endpoint}") from exc
        except requests.exceptions.ConnectionError as exc:
            raise ScorerConnectionError(f"lost connection to scorer at {self.endpoint}") from exc
        except requests.exceptions.Timeout as exc:
            raise ScorerTimeoutError(f"scorer request timed out: {self.endpoint}") from exc
        if resp.status_code != 200:
            raise ScorerProtocolError(f"scorer returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            scores = resp.json()["scores"]
        except (ValueError, KeyError) as exc:
            raise ScorerProtocolError(f"malformed scorer response: {resp.text[:200]}") from exc
        if len(scores) != len(chunk):
            raise ScorerProtocolError(
                f"scorer returned {len(scores)} scores for {len(chunk)} contexts"
            )
        for s in scores:
            if not isinstance(s, (int, float)) or not (0.0 <= s <= 1.0):
                raise ScorerProtocolError(f"score out of range: {s!r}")
        return [float(s) for s in scores]


def connect_remote_scorer(endpoint: str, timeout: float = 10.0, batch_size: int = 128) -> RemoteScorer:
    return RemoteScorer(endpoint=endpoint, timeout=timeout, batch_size=batch_size)
