"""Task-tagged input queries with gold annotations, plus dataset file loaders."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import SentenceId
from .text import canonicalize_title

LABELS = ("SUPPORTS", "REFUTES", "NEI")
_OFFICIAL_NEI = "NOT ENOUGH INFO"


def normalize_label(label: str) -> str:
    up = label.strip().upper()
    if up == _OFFICIAL_NEI:
        return "NEI"
    if up in LABELS:
        return up
    raise ValueError(f"unknown verification label: {label!r}")


def official_label(label: str) -> str:
    return _OFFICIAL_NEI if label == "NEI" else label


@dataclass
class Query:
    query_id: str
    text: str
    task: str                                   # "fever" | "hotpot"
    answer: str | None = None                   # hotpot gold answer
    label: str | None = None                    # fever gold label
    evidence_groups: list[list[SentenceId]] = field(default_factory=list)

    def __post_init__(self):
        if self.task not in ("fever", "hotpot"):
            raise ValueError(f"task must be 'fever' or 'hotpot', got {self.task!r}")
        if self.label is not None:
            self.label = normalize_label(self.label)

    def gold_sentences(self) -> set[SentenceId]:
        return {sid for group in self.evidence_groups for sid in group}


def _sid(title: str, index: int) -> SentenceId:
    return SentenceId(canonicalize_title(title), int(index))


def load_hotpot_queries(path: str | Path) -> list[Query]:
    """Official HotpotQA dev/train JSON: a list of examples with ``_id``,
    ``question``, ``answer`` and ``supporting_facts`` [[title, sent_index]]."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    queries = []
    for ex in data:
        facts = [_sid(t, i) for t, i in ex.get("supporting_facts", [])]
        queries.append(
            Query(
                query_id=str(ex["_id"]),
                text=ex["question"],
                task="hotpot",
                answer=ex.get("answer"),
                evidence_groups=[facts] if facts else [],
            )
        )
    return queries


def load_fever_queries(path: str | Path) -> list[Query]:
    """Official FEVER JSONL: ``id``, ``claim``, ``label`` and ``evidence`` as
    groups of [annotation_id, evidence_id, page, sent_index]. NEI groups
    (null pages) carry no resolvable evidence and are dropped."""
    queries = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            ex = json.loads(line)
            groups = []
            for group in ex.get("evidence", []):
                sids = [_sid(e[2], e[3]) for e in group if e[2] is not None and e[3] is not None]
                if sids:
                    groups.append(sids)
            queries.append(
                Query(
                    query_id=str(ex["id"]),
                    text=ex["claim"],
                    task="fever",
                    label=ex.get("label"),
                    evidence_groups=groups,
                )
            )
    return queries


def load_plain_queries(path: str | Path) -> list[Query]:
    """Normalized JSONL: {"id", "text", "task", "answer"?, "label"?,
    "evidence": [[[title, sent_index], ...], ...]}."""
    queries = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            ex = json.loads(line)
            groups = [[_sid(t, i) for t, i in group] for group in ex.get("evidence", [])]
            queries.append(
                Query(
                    query_id=str(ex["id"]),
                    text=ex["text"],
                    task=ex["task"],
                    answer=ex.get("answer"),
                    label=ex.get("label"),
                    evidence_groups=groups,
                )
            )
    return queries


def load_queries(path: str | Path, fmt: str = "auto") -> list[Query]:
    if fmt == "hotpot":
        return load_hotpot_queries(path)
    if fmt == "fever":
        return load_fever_queries(path)
    if fmt == "jsonl":
        return load_plain_queries(path)
    if fmt != "auto":
        raise ValueError(f"unknown query format: {fmt!r}")
    text = Path(path).read_text(encoding="utf-8").lstrip()
    if text.startswith("["):
        return load_hotpot_queries(path)
    first = json.loads(text.splitlines()[0])
    if "claim" in first:
        return load_fever_queries(path)
    return load_plain_queries(path)


def dump_plain_queries(queries: list[Query], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for q in queries:
            rec = {
                "id": q.query_id,
                "text": q.text,
                "task": q.task,
                "evidence": [[sid.as_pair() for sid in group] for group in q.evidence_groups],
            }
            if q.answer is not None:
                rec["answer"] = q.answer
            if q.label is not None:
                rec["label"] = q.label
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
