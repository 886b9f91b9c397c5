"""Deterministic synthetic corpora and query sets for desk-scale experiments.

Every generated document carries a unique signature token (``zq017``) so
TF-IDF behaviour is predictable, and the link graph is returned in a manifest
so ingestion can be checked against ground truth.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus, SentenceId, ingest_corpus
from .queries import Query

_FIRST = [
    "Abberton", "Brindle", "Calder", "Dunmore", "Eastvale", "Farrow", "Glenside",
    "Harwick", "Ivydale", "Juniper", "Kestrel", "Larkfield", "Medlow", "Norcott",
    "Oakhurst", "Pembry", "Quarrill", "Rushmere", "Selwick", "Thornby",
]
_SECOND = [
    "Institute", "Falls", "Crossing", "Abbey", "Junction", "Heath", "Observatory",
    "Quay", "Commons", "Ridge",
]
_NOUNS = [
    "river", "festival", "observatory", "railway", "orchestra", "glacier",
    "museum", "harbor", "cathedral", "archive",
]
_ADJS = [
    "historic", "coastal", "alpine", "celebrated", "remote", "bustling",
    "ancient", "modern", "quiet", "renowned",
]
_PLACES = [
    "the northern valley", "the old quarter", "the eastern plateau",
    "the lake district", "the southern coast",
]


@dataclass
class SynthFixture:
    doc_records: list[dict]
    manifest: dict
    hotpot_queries: list[Query]
    fever_queries: list[Query]
    corpus: Corpus | None = field(default=None, repr=False)

    def signature(self, title: str) -> str:
        return self.manifest["signatures"][title]


def generate_fixture(
    n_docs: int = 200,
    n_queries: int = 30,
    seed: int = 7,
) -> SynthFixture:
    if n_docs > len(_FIRST) * len(_SECOND):
        raise ValueError(f"at most {len(_FIRST) * len(_SECOND)} distinct titles available")
    rng = random.Random(seed)

    titles = []
    for i in range(n_docs):
        titles.append(f"{_FIRST[i % len(_FIRST)]} {_SECOND[i // len(_FIRST)]}")

    signatures = {titles[i]: f"zq{i:03d}" for i in range(n_docs)}
    links: dict[str, list[str]] = {}
    doc_records = []
    nouns = {}
    adjs = {}
    for i, title in enumerate(titles):
        noun = _NOUNS[i % len(_NOUNS)]
        adj = _ADJS[(i * 3) % len(_ADJS)]
        nouns[title], adjs[title] = noun, adj
        targets = sorted({titles[(i + 1) % n_docs], titles[(i * 3 + 7) % n_docs]} - {title})
        links[title] = targets

        lead = [
            f"{title} is a {adj} {noun} known for {signatures[title]}.",
            f"It attracts visitors from {rng.choice(_PLACES)} every year.",
        ]
        if targets:
            lead.append(f"It lies near {targets[0]} on the main road.")
        paragraphs = [{"sentences": lead, "links": targets}]
        if rng.random() < 0.5:
            extra = [
                f"The {noun} was restored in {1900 + (i % 90)}.",
                f"Local guides describe it as {rng.choice(_ADJS)} and {rng.choice(_ADJS)}.",
            ]
            paragraphs.append({"sentences": extra, "links": []})
        doc_records.append({"title": title, "paragraphs": paragraphs})

    hotpot_queries = []
    fever_queries = []
    for j in range(n_queries):
        a = rng.randrange(n_docs)
        title_a = titles[a]
        title_b = links[title_a][0] if links[title_a] else titles[(a + 1) % n_docs]
        question = (
            f"Which {nouns[title_a]} known for {signatures[title_a]} lies near {title_b}?"
        )
        gold = [SentenceId(title_a, 0)]
        if links[title_a]:
            gold.append(SentenceId(title_a, 2))
        hotpot_queries.append(
            Query(
                query_id=f"hq{j:03d}",
                text=question,
                task="hotpot",
                answer=title_a,
                evidence_groups=[gold],
            )
        )

        kind = j % 3
        c = (j * 5 + 3) % n_docs
        title_c = titles[c]
        if kind == 0:
            claim = f"{title_c} is a {adjs[title_c]} {nouns[title_c]} known for {signatures[title_c]}."
            fever_queries.append(
                Query(
                    query_id=f"fq{j:03d}", text=claim, task="fever",
                    label="SUPPORTS", evidence_groups=[[SentenceId(title_c, 0)]],
                )
            )
        elif kind == 1:
            claim = f"{title_c} is not a {adjs[title_c]} {nouns[title_c]} known for {signatures[title_c]}."
            fever_queries.append(
                Query(
                    query_id=f"fq{j:03d}", text=claim, task="fever",
                    label="REFUTES", evidence_groups=[[SentenceId(title_c, 0)]],
                )
            )
        else:
            other = _NOUNS[(c + 4) % len(_NOUNS)]
            claim = f"{title_c} is famous as a {other} of {rng.choice(_PLACES)}."
            fever_queries.append(
                Query(query_id=f"fq{j:03d}", text=claim, task="fever", label="NEI")
            )

    manifest = {"links": links, "signatures": signatures, "titles": titles}
    return SynthFixture(
        doc_records=doc_records,
        manifest=manifest,
        hotpot_queries=hotpot_queries,
        fever_queries=fever_queries,
    )


def write_fixture(fixture: SynthFixture, out_dir: str | Path) -> dict[str, Path]:
    """Write source jsonl, manifest, and build the corpus store. Returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    source = out_dir / "synth_source.jsonl"
    with source.open("w", encoding="utf-8") as fh:
        for rec in fixture.doc_records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    manifest_path = out_dir / "synth_manifest.json"
    manifest_path.write_text(
        json.dumps(fixture.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    store = out_dir / "synth_corpus.store"
    fixture.corpus = ingest_corpus(source, "plain_jsonl", store)
    return {"source": source, "manifest": manifest_path, "store": store}
