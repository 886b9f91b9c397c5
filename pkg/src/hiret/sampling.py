"""Training-sample construction conditioned on upstream retrieval output.

Positives always come from ground truth; negatives are drawn uniformly
without replacement from the output of the module directly upstream of the
level being trained (term-based candidates for the paragraph level, the
paragraph stage's decomposed sentences for the sentence level). Downstream
contexts combine all gold sentences with sampled distractors; contexts for
non-verifiable claims contain sampled sentences only.

All sampling is reproducible: a fixed spec and inputs give byte-identical
emissions. Per-query seeds derive from the base seed as
``seed XOR sha256(query_id)[:8]``.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

from .corpus import SentenceId
from .metrics import normalize_answer
from .scoring import LabeledPair

DEFAULT_NEG_PER_POS = {"paragraph": 2, "sentence": 4}


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class SamplingSpec:
    level: str                       # "paragraph" | "sentence"
    neg_per_pos: int = 2
    seed: int = 0
    max_neg_pool: int = 500
    # Target sentence count for non-verifiable contexts; None matches the
    # typical verifiable context size (1 gold + neg_per_pos sampled).
    nei_context_size: int | None = None

    def __post_init__(self):
        if self.level not in ("paragraph", "sentence"):
            raise SamplingError(f"level must be paragraph/sentence, got {self.level!r}")
        if self.neg_per_pos < 1:
            raise SamplingError("neg_per_pos must be >= 1")

    def for_query(self, query_id: str) -> "SamplingSpec":
        return replace(self, seed=derive_seed(self.seed, query_id))


def default_spec(level: str, seed: int = 0) -> SamplingSpec:
    return SamplingSpec(level=level, neg_per_pos=DEFAULT_NEG_PER_POS[level], seed=seed)


def derive_seed(seed: int, query_id: str) -> int:
    digest = hashlib.sha256(query_id.encode("utf-8")).digest()
    return seed ^ int.from_bytes(digest[:8], "big")


def _id_str(candidate) -> str:
    if isinstance(candidate, SentenceId):
        return f"{candidate.title}#s{candidate.sent_index}"
    if isinstance(candidate, tuple):
        return f"{candidate[0]}#p{candidate[1]}"
    return str(candidate)


def _select_negatives(
    gold: set, upstream: Sequence, n_pos: int, spec: SamplingSpec, rng: random.Random
) -> tuple[list, list[str]]:
    warnings = []
    pool = []
    seen = set()
    for cand in upstream:
        if cand not in gold and cand not in seen:
            seen.add(cand)
            pool.append(cand)
    pool = pool[: spec.max_neg_pool]
    budget = spec.neg_per_pos * max(1, n_pos)
    if len(pool) < budget:
        warnings.append("negative pool exhausted")
    return rng.sample(pool, min(budget, len(pool))), warnings


@dataclass
class SampleResult:
    pairs: list[LabeledPair]
    warnings: list[str]


def sample_retrieval_pairs(
    query_text: str,
    gold: Iterable,
    upstream: Sequence,
    spec: SamplingSpec,
    resolve_text: Callable[[object], str] = _id_str,
) -> SampleResult:
    """Emit every gold item as a positive plus sampled upstream negatives.

    Negative count is ``neg_per_pos * max(1, n_positives)``, capped by the
    available pool; with empty gold the emission is negatives-only and
    flagged (the non-verifiable-claim path needs this).
    """
    gold_set = set(gold)
    upstream = list(upstream)
    if not upstream:
        raise SamplingError("upstream candidate set is empty")
    warnings = []
    if not gold_set:
        warnings.append("empty gold set: emitting negatives only")
    rng = random.Random(spec.seed)
    negatives, more = _select_negatives(gold_set, upstream, len(gold_set), spec, rng)
    warnings.extend(more)

    pairs = [
        LabeledPair(
            query_text=query_text,
            context_text=resolve_text(g),
            label="positive",
            provenance="ground_truth",
            context_id=_id_str(g),
        )
        for g in sorted(gold_set, key=_id_str)
    ]
    pairs.extend(
        LabeledPair(
            query_text=query_text,
            context_text=resolve_text(n),
            label="negative",
            provenance="upstream_sampled",
            context_id=_id_str(n),
        )
        for n in negatives
    )
    return SampleResult(pairs=pairs, warnings=warnings)


@dataclass
class DownstreamContext:
    query_id: str
    sentences: list[tuple[SentenceId, str, bool]]   # (id, text, is_gold)
    label_or_answer: str

    def text(self) -> str:
        return " ".join(t for _, t, _ in self.sentences)

    def gold_flags(self) -> list[bool]:
        return [g for _, _, g in self.sentences]


def _doc_order(sentences: Iterable[tuple[SentenceId, str, bool]]):
    return sorted(sentences, key=lambda item: (item[0].title, item[0].sent_index))


def build_qa_context(
    query_id: str,
    gold_sents: Iterable[SentenceId],
    upstream_sents: Sequence[SentenceId],
    answer: str,
    spec: SamplingSpec,
    resolve_text: Callable[[SentenceId], str],
) -> DownstreamContext:
    """All gold sentences plus sampled distractors, in document order.

    The gold answer must be locatable in the assembled context unless it is
    a yes/no token class; a missing extractive answer is a data bug and
    raises instead of being dropped silently.
    """
    gold_set = set(gold_sents)
    rng = random.Random(spec.seed)
    distractors, _ = _select_negatives(gold_set, upstream_sents, len(gold_set), spec, rng)
    sentences = _doc_order(
        [(sid, resolve_text(sid), True) for sid in gold_set]
        + [(sid, resolve_text(sid), False) for sid in distractors]
    )
    ctx = DownstreamContext(query_id=query_id, sentences=sentences, label_or_answer=answer)
    if normalize_answer(answer) not in ("yes", "no") and answer not in ctx.text():
        raise SamplingError(
            f"{query_id}: extractive answer {answer!r} not found in assembled context"
        )
    return ctx


def build_nli_context(
    query_id: str,
    label: str,
    gold_sents: Iterable[SentenceId],
    upstream_sents: Sequence[SentenceId],
    spec: SamplingSpec,
    resolve_text: Callable[[SentenceId], str],
) -> DownstreamContext:
    """Verifiable claims get gold plus distractors; NEI gets sampled sentences
    only, sized to blend in with verifiable contexts."""
    if label not in ("SUPPORTS", "REFUTES", "NEI"):
        raise SamplingError(f"unknown label: {label!r}")
    gold_set = set(gold_sents)
    if label == "NEI" and gold_set:
        raise SamplingError("NEI claims cannot carry gold evidence")
    if label != "NEI" and not gold_set:
        raise SamplingError(f"{label} claim without gold evidence")
    rng = random.Random(spec.seed)
    if label == "NEI":
        size = spec.nei_context_size if spec.nei_context_size is not None else 1 + spec.neg_per_pos
        pool = []
        seen = set()
        for sid in upstream_sents:
            if sid not in seen:
                seen.add(sid)
                pool.append(sid)
        pool = pool[: spec.max_neg_pool]
        chosen = rng.sample(pool, min(size, len(pool)))
        sentences = _doc_order([(sid, resolve_text(sid), False) for sid in chosen])
    else:
        distractors, _ = _select_negatives(gold_set, upstream_sents, len(gold_set), spec, rng)
        sentences = _doc_order(
            [(sid, resolve_text(sid), True) for sid in gold_set]
            + [(sid, resolve_text(sid), False) for sid in distractors]
        )
    return DownstreamContext(query_id=query_id, sentences=sentences, label_or_answer=label)
