"""Joint retrieval-and-comprehension metrics.

Answer metrics follow the official HotpotQA evaluator: normalization is
lowercase, punctuation removal, article removal, whitespace collapse (in that
order), EM/F1 over normalized token bags, and the rule that a yes/no/noanswer
mismatch on either side zeroes F1/P/R. Joint metrics are per-example
products, p_j = p_a * p_s and r_j = r_a * r_s, with F1 recomputed from the
joint P/R; aggregates are arithmetic means over examples, never products of
means.

Verification metrics follow the official FEVER scorer: one point when the
label is correct and some complete gold evidence group is contained in the
predicted evidence, capped at 5 sentences; NEI needs only the label.
Evidence precision counts predicted sentences inside the union of gold
sentences (non-NEI claims only, empty predictions scoring 1), evidence recall
is the complete-group indicator. A documented switch restores the stricter
all-facts reading of the containment condition.
"""

from __future__ import annotations

import re
import string
from collections import Counter
from dataclasses import dataclass, fields
from typing import Callable, Iterable, Mapping, Sequence

from .corpus import SentenceId

_ARTICLE_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)
_SPECIAL_ANSWERS = ("yes", "no", "noanswer")

LabelKind = str  # "SUPPORTS" | "REFUTES" | "NEI"


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation, strip articles, collapse whitespace."""
    lowered = text.lower()
    no_punct = lowered.translate(_PUNCT_TABLE)
    no_articles = _ARTICLE_RE.sub(" ", no_punct)
    return " ".join(no_articles.split())


def answer_em_f1(pred: str, gold: str) -> tuple[float, float, float, float]:
    """(em, f1, precision, recall) for a span prediction against one gold answer."""
    npred, ngold = normalize_answer(pred), normalize_answer(gold)
    em = 1.0 if npred == ngold else 0.0
    # Official rule: yes/no/noanswer on either side only ever matches exactly.
    if (npred in _SPECIAL_ANSWERS or ngold in _SPECIAL_ANSWERS) and npred != ngold:
        return em, 0.0, 0.0, 0.0
    pred_tokens, gold_tokens = npred.split(), ngold.split()
    common = Counter(pred_tokens) & Counter(gold_tokens)
    n_same = sum(common.values())
    if n_same == 0:
        return em, 0.0, 0.0, 0.0
    precision = n_same / len(pred_tokens)
    recall = n_same / len(gold_tokens)
    f1 = 2 * precision * recall / (precision + recall)
    return em, f1, precision, recall


def set_retrieval_metrics(pred: Iterable, gold: Iterable) -> tuple[float, float, float, float]:
    """(em, precision, recall, f1) between two ID sets.

    Empty prediction scores precision 0 against non-empty gold (not NaN);
    when both sides are empty every component is 1.
    """
    pred_set, gold_set = set(pred), set(gold)
    if not pred_set and not gold_set:
        return 1.0, 1.0, 1.0, 1.0
    tp = len(pred_set & gold_set)
    precision = tp / len(pred_set) if pred_set else 0.0
    recall = tp / len(gold_set) if gold_set else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    em = 1.0 if pred_set == gold_set else 0.0
    return em, precision, recall, f1


def joint_from_components(
    em_a: float, p_a: float, r_a: float, em_s: float, p_s: float, r_s: float
) -> tuple[float, float, float, float]:
    """(em_j, f1_j, p_j, r_j) per-example products with harmonic joint F1."""
    p_j = p_a * p_s
    r_j = r_a * r_s
    f1_j = 2 * p_j * r_j / (p_j + r_j) if p_j + r_j > 0 else 0.0
    em_j = em_a * em_s
    return em_j, f1_j, p_j, r_j


@dataclass
class PerExampleScores:
    query_id: str
    em_a: float = 0.0
    f1_a: float = 0.0
    p_a: float = 0.0
    r_a: float = 0.0
    em_s: float = 0.0
    f1_s: float = 0.0
    p_s: float = 0.0
    r_s: float = 0.0
    em_j: float = 0.0
    f1_j: float = 0.0
    p_j: float = 0.0
    r_j: float = 0.0
    label_correct: bool = False
    evidence_complete: bool = False


def score_qa_example(
    query_id: str,
    pred_answer: str,
    gold_answer: str,
    pred_support: Iterable,
    gold_support: Iterable,
) -> PerExampleScores:
    em_a, f1_a, p_a, r_a = answer_em_f1(pred_answer, gold_answer)
    em_s, p_s, r_s, f1_s = set_retrieval_metrics(pred_support, gold_support)
    em_j, f1_j, p_j, r_j = joint_from_components(em_a, p_a, r_a, em_s, p_s, r_s)
    return PerExampleScores(
        query_id=query_id,
        em_a=em_a, f1_a=f1_a, p_a=p_a, r_a=r_a,
        em_s=em_s, f1_s=f1_s, p_s=p_s, r_s=r_s,
        em_j=em_j, f1_j=f1_j, p_j=p_j, r_j=r_j,
    )


def mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


# ---------------------------------------------------------------------------
# verification (FEVER-style) scoring


@dataclass
class VerificationRecord:
    query_id: str
    gold_label: LabelKind
    gold_groups: list[list[SentenceId]]
    pred_label: LabelKind
    pred_evidence: list[SentenceId]


def _complete_group_contained(
    groups: list[list[SentenceId]], predicted: Sequence[SentenceId], mode: str
) -> bool:
    """Vacuously true with no groups (the NEI case has no gold facts)."""
    if not groups:
        return True
    pred = list(predicted)
    if mode == "any_group":
        return any(all(sid in pred for sid in group) for group in groups)
    if mode == "all_facts":
        return all(sid in pred for group in groups for sid in group)
    raise ValueError(f"unknown evidence mode: {mode!r}")


@dataclass
class VerificationMetrics:
    label_accuracy: float
    fever_score: float
    evidence_precision: float
    evidence_recall: float
    evidence_f1: float
    label_f1: dict[str, float]              # per class: SUPPORTS / REFUTES / NEI
    per_example: list[PerExampleScores]


def fever_metrics(
    records: Sequence[VerificationRecord],
    max_evidence: int = 5,
    evidence_mode: str = "any_group",
) -> VerificationMetrics:
    if not records:
        raise ValueError("no records to score")
    correct = 0
    strict = 0
    prec_sum, prec_hits = 0.0, 0.0
    rec_sum, rec_hits = 0.0, 0.0
    per_example = []
    for rec in records:
        for label in (rec.gold_label, rec.pred_label):
            if label not in ("SUPPORTS", "REFUTES", "NEI"):
                raise ValueError(f"unknown label: {label!r}")
        predicted = list(rec.pred_evidence)[:max_evidence]
        label_ok = rec.pred_label == rec.gold_label
        groups = rec.gold_groups if rec.gold_label != "NEI" else []
        complete = _complete_group_contained(groups, predicted, evidence_mode)
        if label_ok:
            correct += 1
            if complete:
                strict += 1
        if rec.gold_label != "NEI":
            gold_union = {sid for group in rec.gold_groups for sid in group}
            hits = sum(1 for sid in predicted if sid in gold_union)
            prec_sum += hits / len(predicted) if predicted else 1.0
            prec_hits += 1.0
            rec_sum += 1.0 if complete else 0.0
            rec_hits += 1.0
        per_example.append(
            PerExampleScores(
                query_id=rec.query_id,
                label_correct=label_ok,
                evidence_complete=complete,
            )
        )
    precision = prec_sum / prec_hits if prec_hits > 0 else 1.0
    recall = rec_sum / rec_hits if rec_hits > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return VerificationMetrics(
        label_accuracy=correct / len(records),
        fever_score=strict / len(records),
        evidence_precision=precision,
        evidence_recall=recall,
        evidence_f1=f1,
        label_f1=label_wise_f1(records),
        per_example=per_example,
    )


def label_wise_f1(records: Sequence[VerificationRecord]) -> dict[str, float]:
    out = {}
    for cls in ("SUPPORTS", "REFUTES", "NEI"):
        tp = sum(1 for r in records if r.pred_label == cls and r.gold_label == cls)
        n_pred = sum(1 for r in records if r.pred_label == cls)
        n_gold = sum(1 for r in records if r.gold_label == cls)
        p = tp / n_pred if n_pred else 0.0
        r = tp / n_gold if n_gold else 0.0
        out[cls] = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return out


def oracle_score(
    records: Sequence[VerificationRecord],
    stage_sets: Mapping[str, set],
    level: str,
    sentence_to_paragraph: Callable[[SentenceId], tuple[str, int]] | None = None,
) -> float:
    """Upper bound of the verification score at a retrieval stage: the fraction
    of claims that are NEI or have some complete gold group inside the stage's
    retrieved set.

    ``level`` is "sentence" (sets of SentenceId) or "paragraph" (sets of
    (title, para_index); gold sentences are mapped through
    ``sentence_to_paragraph`` when given, else compared by title only).
    """
    if level not in ("sentence", "paragraph"):
        raise ValueError(f"unknown stage level: {level!r}")
    hits = 0
    for rec in records:
        if rec.gold_label == "NEI" or not rec.gold_groups:
            hits += 1
            continue
        retrieved = stage_sets.get(rec.query_id, set())
        if level == "sentence":
            contained = any(
                all(sid in retrieved for sid in group) for group in rec.gold_groups
            )
        elif sentence_to_paragraph is not None:
            contained = any(
                all(sentence_to_paragraph(sid) in retrieved for sid in group)
                for group in rec.gold_groups
            )
        else:
            titles = {key[0] if isinstance(key, tuple) else key for key in retrieved}
            contained = any(
                all(sid.title in titles for sid in group) for group in rec.gold_groups
            )
        if contained:
            hits += 1
    return hits / len(records) if records else 0.0


# ---------------------------------------------------------------------------
# aggregation


_QA_FIELDS = ("em_a", "f1_a", "p_a", "r_a", "em_s", "f1_s", "p_s", "r_s",
              "em_j", "f1_j", "p_j", "r_j")


@dataclass
class MetricsReport:
    task: str
    count: int
    mode: str = "full"
    # answer
    answer_em: float | None = None
    answer_f1: float | None = None
    # paragraph-level retrieval
    paragraph_em: float | None = None
    paragraph_precision: float | None = None
    paragraph_recall: float | None = None
    paragraph_f1: float | None = None
    # sentence-level retrieval
    sentence_em: float | None = None
    sentence_precision: float | None = None
    sentence_recall: float | None = None
    sentence_f1: float | None = None
    # joint
    joint_em: float | None = None
    joint_f1: float | None = None
    joint_precision: float | None = None
    joint_recall: float | None = None
    # verification
    label_accuracy: float | None = None
    fever_score: float | None = None
    label_f1: dict[str, float] | None = None
    oracle_paragraph: float | None = None
    oracle_sentence: float | None = None
    # mean per-query stage output sizes
    paragraphs_selected: float | None = None
    sentences_selected: float | None = None

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            out[f.name] = getattr(self, f.name)
        return out


def aggregate_qa(per_example: Sequence[PerExampleScores], task: str = "hotpot") -> MetricsReport:
    report = MetricsReport(task=task, count=len(per_example))
    if not per_example:
        return report
    agg = {name: mean([getattr(e, name) for e in per_example]) for name in _QA_FIELDS}
    report.answer_em = agg["em_a"]
    report.answer_f1 = agg["f1_a"]
    report.sentence_em = agg["em_s"]
    report.sentence_precision = agg["p_s"]
    report.sentence_recall = agg["r_s"]
    report.sentence_f1 = agg["f1_s"]
    report.joint_em = agg["em_j"]
    report.joint_f1 = agg["f1_j"]
    report.joint_precision = agg["p_j"]
    report.joint_recall = agg["r_j"]
    return report


# ---------------------------------------------------------------------------
# answer-type breakdown


def breakdown_report(
    correctness: Mapping[str, bool], tags: Mapping[str, str]
) -> tuple[list[tuple[str, int, int, float]], list[str]]:
    """Per-tag (tag, total, correct, accuracy) rows plus warnings for tags
    naming unknown query ids. Untagged examples fall under "untagged"."""
    warnings = [f"tag file references unknown query_id: {qid}" for qid in tags if qid not in correctness]
    by_tag: dict[str, list[bool]] = {}
    for qid, ok in correctness.items():
        tag = tags.get(qid, "untagged")
        by_tag.setdefault(tag, []).append(ok)
    rows = []
    for tag in sorted(by_tag):
        outcomes = by_tag[tag]
        n_correct = sum(outcomes)
        rows.append((tag, len(outcomes), n_correct, n_correct / len(outcomes)))
    return rows, warnings
