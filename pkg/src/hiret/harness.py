"""Experiment harness: evaluating pipeline traces, parameter sweeps with
score caching, stage ablations, and report emission.

Sweeps over filtering parameters reuse cached relevance scores across points,
since scores do not depend on k or h; each point only re-filters and
re-evaluates. Reports keep a fixed column order (sweep value, sentence-level
EM/P/R/F1, answer EM/F1, joint EM/F1/P/R, then paragraph-level and
verification columns); metrics a mode did not produce are emitted as absent
and rendered as dashes in table form.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from typing import Callable, Sequence

from .corpus import Corpus, SentenceId
from .metrics import (
    MetricsReport,
    VerificationRecord,
    fever_metrics,
    mean,
    oracle_score,
    score_qa_example,
    set_retrieval_metrics,
)
from .pipeline import (
    BatchResult,
    PipelineConfig,
    PipelineModules,
    PipelineRun,
    decompose_sentences,
    filter_by_score,
    run_batch,
)
from .queries import Query
from .sampling import SamplingSpec, sample_retrieval_pairs
from .scoring import (
    LabeledPair,
    LexicalScorer,
    ScoredCandidate,
    Scorer,
    TrainConfig,
    paragraph_id_str,
    train_logistic_scorer,
)
from .term_index import initial_candidates

SWEEPABLE = ("k_p", "h_p", "k_s", "h_s")


class CachingScorer:
    """Memoizes (query, candidate id) -> score around any deterministic scorer."""

    def __init__(self, inner: Scorer):
        self.inner = inner
        self._cache: dict[tuple[str, str], float] = {}

    def score_batch(self, query: str, contexts: Sequence[tuple[str, str]]) -> list[ScoredCandidate]:
        missing = [(cid, text) for cid, text in contexts if (query, cid) not in self._cache]
        if missing:
            for cand in self.inner.score_batch(query, missing):
                self._cache[(query, cand.id)] = cand.score
        return [ScoredCandidate(id=cid, score=self._cache[(query, cid)]) for cid, _ in contexts]


# ---------------------------------------------------------------------------
# trace evaluation


def gold_paragraphs(query: Query, corpus: Corpus | None) -> set:
    """Paragraphs containing any gold sentence; titles only without a corpus."""
    if corpus is None:
        return {sid.title for sid in query.gold_sentences()}
    out = set()
    for sid in query.gold_sentences():
        para = corpus.paragraph_of_sentence(sid)
        out.add((para.title, para.para_index))
    return out


def _paragraph_pred(run: PipelineRun, corpus: Corpus | None) -> set:
    pred = run.paragraph_set()
    if corpus is None:
        return {title for title, _ in pred}
    return pred


def evaluate_runs(
    runs: Sequence[PipelineRun],
    queries: Sequence[Query],
    corpus: Corpus | None = None,
    mode: str = "full",
) -> MetricsReport:
    """Aggregate a batch of traces against gold annotations.

    Sentence-level and joint metrics are reported absent when the traces were
    produced without the sentence stage; answer/label metrics always come
    from the recorded predictions (missing predictions score zero).
    """
    by_id = {q.query_id: q for q in queries}
    runs = [r for r in runs if r.query_id in by_id]
    task = queries[0].task if queries else "hotpot"
    report = MetricsReport(task=task, count=len(runs), mode=mode)
    if not runs:
        return report

    sentence_stage_ran = any(r.s_selected is not None for r in runs)
    if any(r.p_neural is not None for r in runs):
        report.paragraphs_selected = mean([len(r.p_neural or []) for r in runs])
    if sentence_stage_ran:
        report.sentences_selected = mean([len(r.s_selected or []) for r in runs])
    paragraph_rows = []
    for run in runs:
        query = by_id[run.query_id]
        em, p, r, f1 = set_retrieval_metrics(
            _paragraph_pred(run, corpus), gold_paragraphs(query, corpus)
        )
        paragraph_rows.append((em, p, r, f1))
    report.paragraph_em = mean([row[0] for row in paragraph_rows])
    report.paragraph_precision = mean([row[1] for row in paragraph_rows])
    report.paragraph_recall = mean([row[2] for row in paragraph_rows])
    report.paragraph_f1 = mean([row[3] for row in paragraph_rows])

    if task == "hotpot":
        per_example = []
        for run in runs:
            query = by_id[run.query_id]
            answer = run.prediction.answer if run.prediction and run.prediction.answer else ""
            scores = score_qa_example(
                run.query_id,
                answer,
                query.answer or "",
                run.sentence_set(),
                query.gold_sentences(),
            )
            per_example.append(scores)
        report.answer_em = mean([e.em_a for e in per_example])
        report.answer_f1 = mean([e.f1_a for e in per_example])
        if sentence_stage_ran:
            report.sentence_em = mean([e.em_s for e in per_example])
            report.sentence_precision = mean([e.p_s for e in per_example])
            report.sentence_recall = mean([e.r_s for e in per_example])
            report.sentence_f1 = mean([e.f1_s for e in per_example])
            report.joint_em = mean([e.em_j for e in per_example])
            report.joint_f1 = mean([e.f1_j for e in per_example])
            report.joint_precision = mean([e.p_j for e in per_example])
            report.joint_recall = mean([e.r_j for e in per_example])
        return report

    records = []
    for run in runs:
        query = by_id[run.query_id]
        pred_label = run.prediction.label if run.prediction and run.prediction.label else "NEI"
        pred_evidence = run.prediction.predicted_evidence if run.prediction else []
        records.append(
            VerificationRecord(
                query_id=run.query_id,
                gold_label=query.label or "NEI",
                gold_groups=query.evidence_groups,
                pred_label=pred_label,
                pred_evidence=list(pred_evidence),
            )
        )
    verification = fever_metrics(records)
    report.label_accuracy = verification.label_accuracy
    report.fever_score = verification.fever_score
    report.label_f1 = verification.label_f1
    if sentence_stage_ran:
        report.sentence_precision = verification.evidence_precision
        report.sentence_recall = verification.evidence_recall
        report.sentence_f1 = verification.evidence_f1
        report.oracle_sentence = oracle_score(
            records, {r.query_id: r.sentence_set() for r in runs}, "sentence"
        )
    mapper: Callable[[SentenceId], tuple[str, int]] | None = None
    if corpus is not None:
        def mapper(sid: SentenceId) -> tuple[str, int]:
            para = corpus.paragraph_of_sentence(sid)
            return (para.title, para.para_index)

    report.oracle_paragraph = oracle_score(
        records, {r.query_id: r.paragraph_set() for r in runs}, "paragraph", mapper
    )
    return report


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    base_config: PipelineConfig
    retrain_downstream: bool = False

    def __post_init__(self):
        if self.parameter not in SWEEPABLE:
            raise ValueError(f"parameter must be one of {SWEEPABLE}, got {self.parameter!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        for v in self.values:
            if self.parameter.startswith("k"):
                if int(v) < 1:
                    raise ValueError(f"{self.parameter} values must be >= 1, got {v}")
            elif not (0.0 <= float(v) <= 1.0):
                raise ValueError(f"{self.parameter} values must lie in [0, 1], got {v}")


@dataclass
class SweepRow:
    value: float | int
    report: MetricsReport
    failures: int = 0


def run_sweep(
    spec: SweepSpec,
    queries: Sequence[Query],
    modules: PipelineModules,
    threads: int = 1,
) -> list[SweepRow]:
    """One batch + evaluation per value, scores cached across points.

    A failing point is recorded in its row and does not stop the sweep.
    """
    cached = replace(
        modules,
        paragraph_scorer=CachingScorer(modules.paragraph_scorer),
        sentence_scorer=CachingScorer(modules.sentence_scorer),
    )
    rows = []
    for value in spec.values:
        value = int(value) if spec.parameter.startswith("k") else float(value)
        config = replace(spec.base_config, **{spec.parameter: value})
        result = run_batch(queries, config, cached, threads=threads)
        report = evaluate_runs(result.runs, queries, corpus=modules.corpus)
        rows.append(SweepRow(value=value, report=report, failures=len(result.failures)))
    return rows


# ---------------------------------------------------------------------------
# ablations


ABLATION_MASKS = {
    "full": frozenset({"paragraph_level", "sentence_level"}),
    "no_paragraph": frozenset({"sentence_level"}),
    "no_sentence": frozenset({"paragraph_level"}),
}


def regenerate_sentence_pairs(
    queries: Sequence[Query],
    modules: PipelineModules,
    config: PipelineConfig,
    spec: SamplingSpec,
) -> list[LabeledPair]:
    """Sentence-level training pairs with negatives drawn from the stage
    directly upstream under the given mask: the paragraph stage's survivors,
    or the term-based set itself when the paragraph stage is removed."""
    pairs: list[LabeledPair] = []
    for query in queries:
        p_initial = initial_candidates(
            modules.corpus, modules.index, query.query_id, query.text, config.task
        )
        pool_ids = p_initial.ids()
        if config.paragraph_enabled():
            contexts = [
                (paragraph_id_str(t, i), modules.corpus.get_paragraph(t, i).text())
                for t, i in pool_ids
            ]
            scored = modules.paragraph_scorer.score_batch(query.text, contexts)
            rescored = [ScoredCandidate(id=pid, score=c.score) for pid, c in zip(pool_ids, scored)]
            pool_ids = [c.id for c in filter_by_score(rescored, config.k_p, config.h_p)]
        sentence_pool = decompose_sentences(modules.corpus, pool_ids)
        if not sentence_pool:
            continue
        texts = {sid: text for sid, text in sentence_pool}
        gold = query.gold_sentences() & set(texts)
        result = sample_retrieval_pairs(
            query.text,
            gold,
            [sid for sid, _ in sentence_pool],
            spec.for_query(query.query_id),
            resolve_text=lambda sid: texts[sid],
        )
        pairs.extend(result.pairs)
    return pairs


@dataclass
class AblationResult:
    mode: str
    report: MetricsReport
    batch: BatchResult
    retrained: bool = False
    training_pairs: int = 0


def run_ablation(
    mode: str,
    config: PipelineConfig,
    queries: Sequence[Query],
    modules: PipelineModules,
    retrain_downstream: bool = False,
    sampling_spec: SamplingSpec | None = None,
    threads: int = 1,
) -> AblationResult:
    if mode not in ABLATION_MASKS:
        raise ValueError(f"mode must be one of {sorted(ABLATION_MASKS)}, got {mode!r}")
    config = replace(config, stage_mask=ABLATION_MASKS[mode])

    retrained = False
    n_pairs = 0
    if retrain_downstream and config.sentence_enabled():
        spec = sampling_spec or SamplingSpec(level="sentence", neg_per_pos=4, seed=config.seed)
        pairs = regenerate_sentence_pairs(queries, modules, config, spec)
        n_pairs = len(pairs)
        if isinstance(modules.sentence_scorer, LexicalScorer) and pairs:
            labels = {p.label for p in pairs}
            if labels == {"positive", "negative"}:
                model, _ = train_logistic_scorer(pairs, TrainConfig(seed=config.seed))
                modules = replace(modules, sentence_scorer=LexicalScorer(model))
                retrained = True

    result = run_batch(queries, config, modules, threads=threads)
    report = evaluate_runs(result.runs, queries, corpus=modules.corpus, mode=mode)
    return AblationResult(
        mode=mode, report=report, batch=result, retrained=retrained, training_pairs=n_pairs
    )


# ---------------------------------------------------------------------------
# report emission


REPORT_COLUMNS = (
    ("s_em", "sentence_em"),
    ("s_prec", "sentence_precision"),
    ("s_rec", "sentence_recall"),
    ("s_f1", "sentence_f1"),
    ("ans_em", "answer_em"),
    ("ans_f1", "answer_f1"),
    ("joint_em", "joint_em"),
    ("joint_f1", "joint_f1"),
    ("joint_prec", "joint_precision"),
    ("joint_rec", "joint_recall"),
    ("p_em", "paragraph_em"),
    ("p_prec", "paragraph_precision"),
    ("p_rec", "paragraph_recall"),
    ("p_f1", "paragraph_f1"),
    ("oracle_p", "oracle_paragraph"),
    ("oracle_s", "oracle_sentence"),
    ("label_acc", "label_accuracy"),
    ("fever_score", "fever_score"),
    ("p_selected", "paragraphs_selected"),
    ("s_selected", "sentences_selected"),
)
LABEL_F1_COLUMNS = (("lf1_s", "SUPPORTS"), ("lf1_r", "REFUTES"), ("lf1_n", "NEI"))


def _report_row(report: MetricsReport) -> dict[str, object]:
    row: dict[str, object] = {}
    for name, attr in REPORT_COLUMNS:
        row[name] = getattr(report, attr)
    for name, cls in LABEL_F1_COLUMNS:
        row[name] = report.label_f1.get(cls) if report.label_f1 else None
    row["count"] = report.count
    row["mode"] = report.mode
    return row


def _rows_from(payload) -> list[dict[str, object]]:
    if isinstance(payload, MetricsReport):
        return [_report_row(payload)]
    rows = []
    for item in payload:
        row = {"value": item.value}
        row.update(_report_row(item.report))
        row["failures"] = item.failures
        rows.append(row)
    return rows


def render_report(payload, fmt: str) -> str:
    """Render a MetricsReport or a list of SweepRows as json, csv or an
    aligned text table (absent metrics become dashes)."""
    rows = _rows_from(payload)
    columns = list(rows[0].keys())
    if fmt == "json":
        return json.dumps(rows, indent=2, sort_keys=False) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(["" if row[c] is None else _fmt_number(row[c]) for c in columns])
        return buf.getvalue()
    if fmt == "table":
        cells = [
            [("-" if row[c] is None else _fmt_number(row[c], table=True)) for c in columns]
            for row in rows
        ]
        widths = [max(len(col), *(len(r[i]) for r in cells)) for i, col in enumerate(columns)]
        lines = ["  ".join(col.ljust(widths[i]) for i, col in enumerate(columns))]
        lines.extend("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in cells)
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format: {fmt!r}")


def _fmt_number(value, table: bool = False) -> str:
    if isinstance(value, bool) or not isinstance(value, float):
        return str(value)
    if table:
        return format(value, ".4f")
    return repr(value)  # full precision so csv round-trips match json exactly


def emit_report(payload, fmt: str, path) -> None:
    text = render_report(payload, fmt)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
