"""Downstream task adapters: span/yes-no question answering and 3-way claim
verification.

The pipeline only needs the two call contracts defined here; everything else
is interchangeable. Oracle adapters are perfect readers given sufficient
evidence (they emit the gold output only when the context supports it),
baseline adapters are deterministic lexical stand-ins, and remote adapters
speak JSON over HTTP (``POST /qa``, ``POST /verify``).

Every non-yes/no QA answer must be a contiguous substring of the provided
context; the wrapper operations enforce this on every prediction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Protocol

import requests

from .corpus import SentenceId
from .metrics import normalize_answer
from .scoring import (
    ScorerConnectionError,
    ScorerProtocolError,
    ScorerTimeoutError,
)
from .text import WH_WORDS, count_negations, tokenize

AUX_STARTERS = frozenset(
    "is are was were am be do does did can could will would shall should has have had".split()
)
_SENT_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")
_TOKEN_RE = re.compile(r"\w+", re.UNICODE)
MAX_SPAN_TOKENS = 8


class DownstreamError(Exception):
    pass


@dataclass
class DownstreamPrediction:
    query_id: str
    kind: str                               # "qa" | "verification"
    answer: str | None = None
    label: str | None = None
    predicted_evidence: list[SentenceId] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("qa", "verification"):
            raise ValueError(f"kind must be qa/verification, got {self.kind!r}")


class QAReader(Protocol):
    def answer(self, query_id: str, question: str, context: str) -> str: ...


class Verifier(Protocol):
    def classify(self, query_id: str, claim: str, context: str) -> str: ...


def answer_question(adapter: QAReader, query_id: str, question: str, context: str) -> str:
    """Invoke a reader and enforce the span contract. Empty context -> ""."""
    if not context.strip():
        return ""
    answer = adapter.answer(query_id, question, context)
    if answer and normalize_answer(answer) not in ("yes", "no") and answer not in context:
        raise DownstreamError(
            f"{query_id}: reader emitted a non-span answer {answer!r}"
        )
    return answer


def verify_claim(adapter: Verifier, query_id: str, claim: str, context: str) -> str:
    label = adapter.classify(query_id, claim, context)
    if label not in ("SUPPORTS", "REFUTES", "NEI"):
        raise DownstreamError(f"{query_id}: verifier emitted unknown label {label!r}")
    return label


# ---------------------------------------------------------------------------
# oracles (test doubles holding gold targets)


class OracleQAReader:
    """Returns the gold answer whenever the context makes it reachable:
    yes/no answers directly, extractive answers only when present verbatim."""

    def __init__(self, answers: dict[str, str]):
        self.answers = dict(answers)

    def answer(self, query_id: str, question: str, context: str) -> str:
        gold = self.answers.get(query_id, "")
        if normalize_answer(gold) in ("yes", "no"):
            return gold
        return gold if gold and gold in context else ""


class OracleVerifier:
    def __init__(self, labels: dict[str, str]):
        self.labels = dict(labels)

    def classify(self, query_id: str, claim: str, context: str) -> str:
        return self.labels.get(query_id, "NEI")


# ---------------------------------------------------------------------------
# deterministic lexical baselines


def _split_sentences(context: str) -> list[str]:
    return [s for s in _SENT_SPLIT_RE.split(context) if s.strip()]


class BaselineQAReader:
    """Lexical span picker.

    Yes/no questions (leading auxiliary/copular token) are answered by
    negation parity between question and context. Otherwise candidate spans
    are runs of capitalized or numeric context tokens (question tokens trimmed
    from the edges, at most 8 tokens), scored by the idf-weighted overlap
    between the span's host sentence and the question with wh-words excluded;
    earliest span wins ties. Falls back to runs of non-question tokens when
    no capitalized run exists.
    """

    def __init__(self, idf: Callable[[str], float] | None = None):
        self.idf = idf if idf is not None else (lambda _t: 1.0)

    def answer(self, query_id: str, question: str, context: str) -> str:
        q_tokens = tokenize(question)
        if not context.strip():
            return ""
        if q_tokens and q_tokens[0] in AUX_STARTERS:
            parity = (count_negations(question) + count_negations(context)) % 2
            return "yes" if parity == 0 else "no"
        q_set = set(q_tokens)
        best_score, best_pos, best_span = -1.0, 0, ""
        offset = 0
        for sentence in _split_sentences(context):
            start = context.index(sentence, offset)
            offset = start + len(sentence)
            for span_start, span_end, span_tokens in self._candidate_spans(sentence, q_set):
                score = self._sentence_score(sentence, span_tokens, q_set)
                pos = start + span_start
                if score > best_score or (score == best_score and pos < best_pos):
                    best_score, best_pos = score, pos
                    best_span = sentence[span_start:span_end]
        return best_span

    def _candidate_spans(self, sentence: str, q_set: set[str]):
        matches = list(_TOKEN_RE.finditer(sentence))
        runs = self._runs(matches, lambda m: m.group()[0].isupper() or m.group()[0].isdigit())
        if not runs:
            runs = self._runs(matches, lambda m: m.group().lower() not in q_set)
        for run in runs:
            while run and run[0].group().lower() in q_set:
                run = run[1:]
            while run and run[-1].group().lower() in q_set:
                run = run[:-1]
            run = run[:MAX_SPAN_TOKENS]
            if run:
                yield run[0].start(), run[-1].end(), {m.group().lower() for m in run}

    @staticmethod
    def _runs(matches, predicate):
        runs, current = [], []
        for m in matches:
            if predicate(m):
                current.append(m)
            elif current:
                runs.append(current)
                current = []
        if current:
            runs.append(current)
        return runs

    def _sentence_score(self, sentence: str, span_tokens: set[str], q_set: set[str]) -> float:
        host = set(tokenize(sentence)) - span_tokens
        scored = (q_set - WH_WORDS) & host
        return sum(self.idf(t) for t in scored)


class BaselineVerifier:
    """SUPPORTS when some sentence covers >= half the claim tokens with even
    negation parity, REFUTES when parity is odd, NEI otherwise (and always
    NEI on empty context)."""

    overlap_threshold = 0.5

    def __init__(self, idf: Callable[[str], float] | None = None):
        self.idf = idf if idf is not None else (lambda _t: 1.0)

    def classify(self, query_id: str, claim: str, context: str) -> str:
        claim_tokens = set(tokenize(claim))
        if not context.strip() or not claim_tokens:
            return "NEI"
        total = sum(self.idf(t) for t in claim_tokens)
        best_overlap, best_sentence = 0.0, ""
        for sentence in _split_sentences(context):
            s_tokens = set(tokenize(sentence))
            overlap = sum(self.idf(t) for t in claim_tokens & s_tokens) / total if total else 0.0
            if overlap > best_overlap:
                best_overlap, best_sentence = overlap, sentence
        if best_overlap >= self.overlap_threshold:
            parity = (count_negations(claim) + count_negations(best_sentence)) % 2
            return "SUPPORTS" if parity == 0 else "REFUTES"
        return "NEI"


# ---------------------------------------------------------------------------
# remote adapters


class _RemoteAdapter:
    def __init__(self, endpoint: str, timeout: float = 10.0,
                 session: requests.Session | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()

    def _post(self, route: str, payload: dict) -> dict:
        try:
            resp = self._session.post(f"{self.endpoint}{route}", json=payload, timeout=self.timeout)
        except requests.exceptions.ConnectTimeout as exc:
            raise ScorerTimeoutError(f"request timed out: {self.endpoint}{route}") from exc
        except requests.exceptions.ConnectionError as exc:
            raise ScorerConnectionError(f"cannot connect to {self.endpoint}{route}") from exc
        except requests.exceptions.Timeout as exc:
            raise ScorerTimeoutError(f"request timed out: {self.endpoint}{route}") from exc
        if resp.status_code != 200:
            raise ScorerProtocolError(f"{route} returned HTTP {resp.status_code}")
        try:
            return resp.json()
        except ValueError as exc:
            raise ScorerProtocolError(f"malformed response from {route}") from exc


class RemoteQAReader(_RemoteAdapter):
    def answer(self, query_id: str, question: str, context: str) -> str:
        body = self._post("/qa", {"query": question, "context": context})
        if "answer" not in body:
            raise ScorerProtocolError("/qa response missing 'answer'")
        return str(body["answer"])


class RemoteVerifier(_RemoteAdapter):
    def classify(self, query_id: str, claim: str, context: str) -> str:
        body = self._post("/verify", {"claim": claim, "context": context})
        if "label" not in body:
            raise ScorerProtocolError("/verify response missing 'label'")
        return str(body["label"])
