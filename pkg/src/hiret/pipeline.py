"""Pipeline orchestration: term-based candidates -> thresholded top-k
paragraph filtering -> thresholded top-k sentence filtering -> downstream
adapter, with stage masks for ablations.

Filtering is threshold-then-truncate with a strict threshold: keep score > h,
sort by score descending (ties by canonical id ascending), cut to k. Stage
outputs are nested: the sentence stage only sees sentences of paragraphs that
survived the paragraph stage (or of the initial set when that stage is
masked out). Downstream receives the selected sentences concatenated in
document order; when the selection is empty the empty context is passed
through unchanged, with no fallback.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

from .corpus import Corpus, SentenceId
from .downstream import (
    DownstreamPrediction,
    QAReader,
    Verifier,
    answer_question,
    verify_claim,
)
from .queries import Query
from .scoring import (
    ScoredCandidate,
    Scorer,
    ScorerTransportError,
    paragraph_id_str,
    sentence_id_str,
)
from .term_index import InitialCandidateSet, TermIndex, initial_candidates

PARAGRAPH_STAGE = "paragraph_level"
SENTENCE_STAGE = "sentence_level"
FEVER_EVIDENCE_CAP = 5


@dataclass(frozen=True)
class PipelineConfig:
    task: str
    k_p: int = 2
    h_p: float = 0.01
    k_s: int = 5
    h_s: float = 0.2
    stage_mask: frozenset[str] = frozenset({PARAGRAPH_STAGE, SENTENCE_STAGE})
    seed: int = 0

    def __post_init__(self):
        if self.task not in ("fever", "hotpot"):
            raise ValueError(f"task must be fever/hotpot, got {self.task!r}")
        if self.k_p < 1 or self.k_s < 1:
            raise ValueError("k_p and k_s must be >= 1")
        if not (0.0 <= self.h_p <= 1.0 and 0.0 <= self.h_s <= 1.0):
            raise ValueError("thresholds must lie in [0, 1]")
        unknown = self.stage_mask - {PARAGRAPH_STAGE, SENTENCE_STAGE}
        if unknown:
            raise ValueError(f"unknown stages: {sorted(unknown)}")

    def with_stages(self, *stages: str) -> "PipelineConfig":
        return replace(self, stage_mask=frozenset(stages))

    def paragraph_enabled(self) -> bool:
        return PARAGRAPH_STAGE in self.stage_mask

    def sentence_enabled(self) -> bool:
        return SENTENCE_STAGE in self.stage_mask


@dataclass
class PipelineModules:
    corpus: Corpus
    index: TermIndex
    paragraph_scorer: Scorer
    sentence_scorer: Scorer
    qa_reader: QAReader | None = None
    verifier: Verifier | None = None


@dataclass
class PipelineRun:
    query_id: str
    p_initial: InitialCandidateSet
    p_neural: list[ScoredCandidate] | None
    s_selected: list[ScoredCandidate] | None
    prediction: DownstreamPrediction | None
    error: str | None = None
    timings: dict[str, float] = field(default_factory=dict)

    def paragraph_set(self) -> set[tuple[str, int]]:
        """Paragraphs entering the sentence stage: P_N, or P_I when masked."""
        if self.p_neural is not None:
            return {c.id for c in self.p_neural}
        return set(self.p_initial.ids())

    def sentence_set(self) -> set[SentenceId]:
        return {c.id for c in self.s_selected} if self.s_selected else set()

    def to_dict(self, include_timings: bool = False) -> dict:
        out = {
            "query_id": self.query_id,
            "p_initial": [[t, i, src] for t, i, src in self.p_initial.paragraphs],
            "p_neural": None if self.p_neural is None else [
                [c.id[0], c.id[1], c.score] for c in self.p_neural
            ],
            "s_selected": None if self.s_selected is None else [
                [c.id.title, c.id.sent_index, c.score] for c in self.s_selected
            ],
            "prediction": None,
            "error": self.error,
        }
        if self.prediction is not None:
            out["prediction"] = {
                "kind": self.prediction.kind,
                "answer": self.prediction.answer,
                "label": self.prediction.label,
                "predicted_evidence": [sid.as_pair() for sid in self.prediction.predicted_evidence],
            }
        if include_timings:
            out["timings"] = self.timings
        return out

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_dict(include_timings), ensure_ascii=False, sort_keys=True)

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineRun":
        prediction = None
        if raw.get("prediction"):
            p = raw["prediction"]
            prediction = DownstreamPrediction(
                query_id=raw["query_id"],
                kind=p["kind"],
                answer=p.get("answer"),
                label=p.get("label"),
                predicted_evidence=[SentenceId(t, i) for t, i in p.get("predicted_evidence", [])],
            )
        return cls(
            query_id=raw["query_id"],
            p_initial=InitialCandidateSet(
                query_id=raw["query_id"],
                paragraphs=[(t, i, src) for t, i, src in raw["p_initial"]],
            ),
            p_neural=None if raw.get("p_neural") is None else [
                ScoredCandidate(id=(t, i), score=s) for t, i, s in raw["p_neural"]
            ],
            s_selected=None if raw.get("s_selected") is None else [
                ScoredCandidate(id=SentenceId(t, i), score=s) for t, i, s in raw["s_selected"]
            ],
            prediction=prediction,
            error=raw.get("error"),
            timings=raw.get("timings", {}),
        )


def canonical_sort_key(candidate_id) -> tuple:
    if isinstance(candidate_id, SentenceId):
        return (candidate_id.title, candidate_id.sent_index)
    if isinstance(candidate_id, tuple):
        return tuple(candidate_id)
    return (candidate_id,)


def filter_by_score(candidates: Sequence[ScoredCandidate], k: int, h: float) -> list[ScoredCandidate]:
    """Candidates scoring strictly above h, best first, truncated to k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not (0.0 <= h <= 1.0):
        raise ValueError("h must lie in [0, 1]")
    kept = [c for c in candidates if c.score > h]
    kept.sort(key=lambda c: (-c.score, canonical_sort_key(c.id)))
    return kept[:k]


def _paragraph_contexts(corpus: Corpus, ids: Sequence[tuple[str, int]]):
    return [
        (paragraph_id_str(title, idx), corpus.get_paragraph(title, idx).text())
        for title, idx in ids
    ]


def decompose_sentences(
    corpus: Corpus, paragraph_ids: Sequence[tuple[str, int]]
) -> list[tuple[SentenceId, str]]:
    """All non-empty sentences of the given paragraphs, in document order.
    Empty-string sentinels hold their index but are never scored."""
    out = []
    for title, idx in paragraph_ids:
        para = corpus.get_paragraph(title, idx)
        for offset, text in enumerate(para.sentences):
            if text.strip():
                out.append((SentenceId(title, para.sent_offset + offset), text))
    return out


def run_pipeline(query: Query, config: PipelineConfig, modules: PipelineModules) -> PipelineRun:
    if query.task != config.task:
        raise ValueError(
            f"{query.query_id}: query task {query.task!r} does not match config task {config.task!r}"
        )
    timings: dict[str, float] = {}

    start = time.perf_counter()
    p_initial = initial_candidates(
        modules.corpus, modules.index, query.query_id, query.text, config.task
    )
    timings["term_retrieval"] = time.perf_counter() - start

    p_neural: list[ScoredCandidate] | None = None
    pool_ids: list[tuple[str, int]] = p_initial.ids()
    if config.paragraph_enabled():
        start = time.perf_counter()
        contexts = _paragraph_contexts(modules.corpus, pool_ids)
        scored = modules.paragraph_scorer.score_batch(query.text, contexts)
        rescored = [
            ScoredCandidate(id=pid, score=c.score) for pid, c in zip(pool_ids, scored)
        ]
        p_neural = filter_by_score(rescored, config.k_p, config.h_p)
        pool_ids = [c.id for c in p_neural]
        timings["paragraph_level"] = time.perf_counter() - start

    s_selected: list[ScoredCandidate] | None = None
    if config.sentence_enabled():
        start = time.perf_counter()
        sentence_pool = decompose_sentences(modules.corpus, pool_ids)
        contexts = [(sentence_id_str(sid.title, sid.sent_index), text) for sid, text in sentence_pool]
        scored = modules.sentence_scorer.score_batch(query.text, contexts)
        rescored = [
            ScoredCandidate(id=sid, score=c.score)
            for (sid, _), c in zip(sentence_pool, scored)
        ]
        s_selected = filter_by_score(rescored, config.k_s, config.h_s)
        timings["sentence_level"] = time.perf_counter() - start

    if s_selected is not None:
        evidence_pool = sorted((c.id for c in s_selected), key=canonical_sort_key)
    else:
        evidence_pool = [sid for sid, _ in decompose_sentences(modules.corpus, sorted(pool_ids))]
    context_text = " ".join(modules.corpus.resolve_sentence(sid) for sid in evidence_pool)

    prediction: DownstreamPrediction | None = None
    error: str | None = None
    start = time.perf_counter()
    try:
        if query.task == "hotpot":
            if modules.qa_reader is None:
                raise ValueError("no QA reader configured")
            answer = answer_question(modules.qa_reader, query.query_id, query.text, context_text)
            prediction = DownstreamPrediction(
                query_id=query.query_id,
                kind="qa",
                answer=answer,
                predicted_evidence=list(evidence_pool),
            )
        else:
            if modules.verifier is None:
                raise ValueError("no verifier configured")
            label = verify_claim(modules.verifier, query.query_id, query.text, context_text)
            if s_selected is not None:
                ranked = [c.id for c in s_selected]
            else:
                ranked = list(evidence_pool)
            prediction = DownstreamPrediction(
                query_id=query.query_id,
                kind="verification",
                label=label,
                predicted_evidence=ranked[:FEVER_EVIDENCE_CAP],
            )
    except Exception as exc:  # downstream failure keeps the retrieval trace
        error = f"downstream: {exc}"
    timings["downstream"] = time.perf_counter() - start

    return PipelineRun(
        query_id=query.query_id,
        p_initial=p_initial,
        p_neural=p_neural,
        s_selected=s_selected,
        prediction=prediction,
        error=error,
        timings=timings,
    )


@dataclass
class BatchFailure:
    query_id: str
    error: str
    kind: str = "data"          # "data" | "remote"


@dataclass
class BatchResult:
    runs: list[PipelineRun]
    failures: list[BatchFailure]

    def trace_by_id(self) -> dict[str, PipelineRun]:
        return {run.query_id: run for run in self.runs}


def run_batch(
    queries: Sequence[Query],
    config: PipelineConfig,
    modules: PipelineModules,
    threads: int = 1,
) -> BatchResult:
    """Order-preserving batch execution with per-query isolation: one query's
    failure is recorded and does not abort the rest."""

    def one(query: Query):
        try:
            return run_pipeline(query, config, modules), None
        except ScorerTransportError as exc:
            return None, BatchFailure(query_id=query.query_id, error=str(exc), kind="remote")
        except Exception as exc:
            return None, BatchFailure(query_id=query.query_id, error=str(exc))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, queries))
    else:
        outcomes = [one(q) for q in queries]

    runs = [run for run, _ in outcomes if run is not None]
    failures = [fail for _, fail in outcomes if fail is not None]
    return BatchResult(runs=runs, failures=failures)


def write_runs(runs: Sequence[PipelineRun], path, include_timings: bool = False) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for run in runs:
            fh.write(run.to_json(include_timings) + "\n")


def read_runs(path) -> list[PipelineRun]:
    runs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                runs.append(PipelineRun.from_dict(json.loads(line)))
    return runs
