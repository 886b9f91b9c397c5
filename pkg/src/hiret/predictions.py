"""Official prediction-file formats and file-level evaluation.

QA predictions use the HotpotQA layout ``{"answer": {qid: str}, "sp": {qid:
[[title, sent_index], ...]}}`` and are scored with the official evaluator's
exact arithmetic, including its treatment of missing entries (zero
contribution, joint skipped) and its supporting-fact edge cases. Verification
predictions use the FEVER layout, one JSON object per line with ``id``,
``predicted_label`` and ``predicted_evidence``.

Titles are canonicalized on load on both the prediction and the gold side, so
comparisons key on the same canonical form the corpus uses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import SentenceId
from .metrics import (
    MetricsReport,
    PerExampleScores,
    VerificationMetrics,
    VerificationRecord,
    answer_em_f1,
    fever_metrics,
    mean,
)
from .pipeline import PipelineRun
from .queries import Query, normalize_label, official_label
from .text import canonicalize_title


def _sid(pair) -> SentenceId:
    return SentenceId(canonicalize_title(str(pair[0])), int(pair[1]))


# ---------------------------------------------------------------------------
# file formats


def load_qa_predictions(path: str | Path) -> dict:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if "answer" not in payload or "sp" not in payload:
        raise ValueError(f"{path}: expected top-level 'answer' and 'sp' maps")
    return payload


def qa_predictions_from_runs(runs: Sequence[PipelineRun]) -> dict:
    answer = {}
    sp = {}
    for run in runs:
        if run.prediction is None:
            continue
        answer[run.query_id] = run.prediction.answer or ""
        sp[run.query_id] = [sid.as_pair() for sid in run.prediction.predicted_evidence]
    return {"answer": answer, "sp": sp}


def write_qa_predictions(runs: Sequence[PipelineRun], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(qa_predictions_from_runs(runs), ensure_ascii=False, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_verification_predictions(path: str | Path) -> list[dict]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def verification_predictions_from_runs(runs: Sequence[PipelineRun]) -> list[dict]:
    out = []
    for run in runs:
        label = "NEI"
        evidence: list[SentenceId] = []
        if run.prediction is not None:
            label = run.prediction.label or "NEI"
            evidence = run.prediction.predicted_evidence
        out.append(
            {
                "id": run.query_id,
                "predicted_label": official_label(label),
                "predicted_evidence": [sid.as_pair() for sid in evidence],
            }
        )
    return out


def write_verification_predictions(runs: Sequence[PipelineRun], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in verification_predictions_from_runs(runs):
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# file-level evaluation


def _official_sp_metrics(pred: set, gold: set) -> tuple[float, float, float, float]:
    """(em, prec, recall, f1) with the official evaluator's exact guards."""
    tp = len(pred & gold)
    fp = len(pred - gold)
    fn = len(gold - pred)
    prec = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * prec * recall / (prec + recall) if prec + recall > 0 else 0.0
    em = 1.0 if fp + fn == 0 else 0.0
    return em, prec, recall, f1


@dataclass
class QAFileEvaluation:
    report: MetricsReport
    per_example: list[PerExampleScores]
    warnings: list[str]


def evaluate_qa_files(predictions: dict, gold: Sequence[Query]) -> QAFileEvaluation:
    """Score a QA prediction map against gold queries, official semantics.

    Examples missing from the prediction maps contribute zero to the affected
    components and are excluded from the joint computation, exactly as the
    official evaluator does.
    """
    warnings = []
    per_example = []
    answers = predictions.get("answer", {})
    sp_map = predictions.get("sp", {})
    for query in gold:
        qid = query.query_id
        scores = PerExampleScores(query_id=qid)
        can_joint = True
        if qid not in answers:
            warnings.append(f"missing answer {qid}")
            can_joint = False
        else:
            em, f1, p, r = answer_em_f1(str(answers[qid]), query.answer or "")
            scores.em_a, scores.f1_a, scores.p_a, scores.r_a = em, f1, p, r
        if qid not in sp_map:
            warnings.append(f"missing sp fact {qid}")
            can_joint = False
        else:
            pred_sp = {_sid(pair) for pair in sp_map[qid]}
            em, p, r, f1 = _official_sp_metrics(pred_sp, query.gold_sentences())
            scores.em_s, scores.p_s, scores.r_s, scores.f1_s = em, p, r, f1
        if can_joint:
            p_j = scores.p_a * scores.p_s
            r_j = scores.r_a * scores.r_s
            scores.p_j, scores.r_j = p_j, r_j
            scores.f1_j = 2 * p_j * r_j / (p_j + r_j) if p_j + r_j > 0 else 0.0
            scores.em_j = scores.em_a * scores.em_s
        per_example.append(scores)

    report = MetricsReport(task="hotpot", count=len(per_example))
    report.answer_em = mean([e.em_a for e in per_example])
    report.answer_f1 = mean([e.f1_a for e in per_example])
    report.sentence_em = mean([e.em_s for e in per_example])
    report.sentence_precision = mean([e.p_s for e in per_example])
    report.sentence_recall = mean([e.r_s for e in per_example])
    report.sentence_f1 = mean([e.f1_s for e in per_example])
    report.joint_em = mean([e.em_j for e in per_example])
    report.joint_f1 = mean([e.f1_j for e in per_example])
    report.joint_precision = mean([e.p_j for e in per_example])
    report.joint_recall = mean([e.r_j for e in per_example])
    return QAFileEvaluation(report=report, per_example=per_example, warnings=warnings)


def evaluate_verification_files(
    predictions: Sequence[dict],
    gold: Sequence[Query],
    max_evidence: int = 5,
    evidence_mode: str = "any_group",
) -> tuple[VerificationMetrics, list[str]]:
    """Score FEVER-format predictions against gold queries by id."""
    warnings = []
    by_id = {str(p["id"]): p for p in predictions}
    records = []
    for query in gold:
        pred = by_id.get(query.query_id)
        if pred is None:
            warnings.append(f"missing prediction {query.query_id}")
            pred = {"predicted_label": "NOT ENOUGH INFO", "predicted_evidence": []}
        evidence = [_sid(pair) for pair in pred.get("predicted_evidence", [])]
        if len(evidence) > max_evidence:
            warnings.append(
                f"{query.query_id}: {len(evidence)} predicted sentences, truncating to {max_evidence}"
            )
        records.append(
            VerificationRecord(
                query_id=query.query_id,
                gold_label=query.label or "NEI",
                gold_groups=query.evidence_groups,
                pred_label=normalize_label(str(pred["predicted_label"])),
                pred_evidence=evidence,
            )
        )
    return fever_metrics(records, max_evidence=max_evidence, evidence_mode=evidence_mode), warnings
