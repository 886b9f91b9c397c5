"""Term-based candidate generation: TF-IDF ranking, title keyword matching,
one-hop hyperlink expansion, and their union into the initial candidate set.

Weighting is ltn: tf' = 1 + ln(tf), idf = ln(N / df), score = sum over the
distinct query terms of tf' * idf. No length normalization, no stemming, no
stopword removal. Ties are broken by canonical title ascending, then
paragraph index ascending, everywhere.
"""

from __future__ import annotations

import json
import math
import pickle
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import Corpus
from .text import canonicalize_title, contains_subsequence, tokenize

KEYWORD_MATCH_CAP = 10
DEFAULT_TOP_N = 5

# Unit keys: document granularity -> canonical title (str);
# paragraph granularity -> (canonical title, para_index).
UnitKey = str | tuple[str, int]


@dataclass
class TermIndex:
    granularity: str
    unit_keys: list[UnitKey]            # position = internal unit id, sorted ascending
    vocabulary: dict[str, int]
    postings: list[list[tuple[int, int]]]   # term id -> [(unit id, tf)], sorted by unit id
    unit_lengths: list[int]
    idf: list[float]

    @property
    def doc_count(self) -> int:
        return len(self.unit_keys)

    @property
    def vocab_size(self) -> int:
        return len(self.vocabulary)

    def save(self, path: str | Path) -> None:
        """Binary index plus a JSON sidecar manifest at ``<path>.manifest.json``."""
        path = Path(path)
        with path.open("wb") as fh:
            pickle.dump(self, fh, protocol=4)
        manifest = {
            "granularity": self.granularity,
            "doc_count": self.doc_count,
            "vocab_size": self.vocab_size,
            "weighting": "ltn",
        }
        Path(str(path) + ".manifest.json").write_text(
            json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "TermIndex":
        with Path(path).open("rb") as fh:
            index = pickle.load(fh)
        if not isinstance(index, cls):
            raise ValueError(f"{path}: not a term index file")
        return index

    def score_units(self, query: str, restrict: set[UnitKey] | None = None) -> dict[UnitKey, float]:
        """ltn scores for every unit sharing a query term (zero-score units omitted
        unless they are in ``restrict``, which forces an entry for each member)."""
        scores: dict[int, float] = {}
        for term in sorted(set(tokenize(query))):
            tid = self.vocabulary.get(term)
            if tid is None:
                continue
            weight = self.idf[tid]
            if weight == 0.0:
                continue
            for unit, tf in self.postings[tid]:
                scores[unit] = scores.get(unit, 0.0) + (1.0 + math.log(tf)) * weight
        out = {self.unit_keys[unit]: s for unit, s in scores.items()}
        if restrict is not None:
            out = {k: out.get(k, 0.0) for k in restrict}
        return out


def build_index(corpus: Corpus, granularity: str = "document") -> TermIndex:
    if granularity not in ("document", "paragraph"):
        raise ValueError(f"granularity must be 'document' or 'paragraph', got {granularity!r}")
    if corpus.doc_count == 0:
        raise ValueError("cannot index an empty corpus")

    units: dict[UnitKey, list[str]] = {}
    if granularity == "document":
        for title in corpus.titles():
            tokens: list[str] = []
            for para in corpus.document(title):
                tokens.extend(tokenize(para.text()))
            units[title] = tokens
    else:
        for para in corpus.iter_paragraphs():
            units[(para.title, para.para_index)] = tokenize(para.text())

    unit_keys = sorted(units)
    key_to_id = {k: i for i, k in enumerate(unit_keys)}

    vocabulary: dict[str, int] = {}
    counts: list[dict[int, int]] = []
    unit_lengths = [0] * len(unit_keys)
    for key, tokens in units.items():
        uid = key_to_id[key]
        unit_lengths[uid] = len(tokens)
        for tok in tokens:
            tid = vocabulary.get(tok)
            if tid is None:
                tid = vocabulary[tok] = len(vocabulary)
                counts.append({})
            counts[tid][uid] = counts[tid].get(uid, 0) + 1

    n = len(unit_keys)
    postings = [sorted(c.items()) for c in counts]
    idf = [math.log(n / len(c)) for c in counts]
    return TermIndex(
        granularity=granularity,
        unit_keys=unit_keys,
        vocabulary=vocabulary,
        postings=postings,
        unit_lengths=unit_lengths,
        idf=idf,
    )


def tfidf_rank(index: TermIndex, query: str, top_n: int) -> list[tuple[UnitKey, float]]:
    """Top-n units by ltn score, positive scores only.

    Ordering: score descending, then unit key ascending. A unit sharing no
    query term scores exactly 0 and is never returned.
    """
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    scores = index.score_units(query)
    ranked = sorted(
        ((key, s) for key, s in scores.items() if s > 0.0),
        key=lambda item: (-item[1], item[0]),
    )
    return ranked[:top_n]


def keyword_match(corpus: Corpus, query: str) -> list[str]:
    """Corpus titles occurring verbatim in the query, longest match first.

    A title matches when its canonical token sequence occurs contiguously in
    the query's token sequence (case-insensitive, punctuation stripped by
    tokenization). Matched titles whose token sequence is a strict contiguous
    sub-run of another matched title's are dropped; the survivors are ranked
    by token length descending (title ascending on ties) and capped at 10.
    """
    query_tokens = tokenize(canonicalize_title(query))
    matched: list[tuple[str, tuple[str, ...]]] = []
    for title in corpus.titles():
        title_tokens = tuple(tokenize(title))
        if title_tokens and contains_subsequence(query_tokens, list(title_tokens)):
            matched.append((title, title_tokens))

    survivors = []
    for title, toks in matched:
        absorbed = any(
            len(toks) < len(other_toks) and contains_subsequence(list(other_toks), list(toks))
            for _, other_toks in matched
        )
        if not absorbed:
            survivors.append((title, toks))
    survivors.sort(key=lambda item: (-len(item[1]), item[0]))
    return [title for title, _ in survivors[:KEYWORD_MATCH_CAP]]


def hyperlink_expand(
    corpus: Corpus,
    index: TermIndex,
    seed_paragraphs: Sequence[tuple[str, int]],
    query: str,
    top_n: int = DEFAULT_TOP_N,
) -> list[tuple[str, int]]:
    """One hop over hyperlinks: rank the link targets of the seed paragraphs by
    TF-IDF against the query and expand the top-n documents to paragraphs.

    Targets already present in the seed (by title) are excluded; zero-score
    targets are still eligible, ranked after positive ones.
    """
    if index.granularity != "document":
        raise ValueError("hyperlink expansion requires a document-granularity index")
    seed_titles = {title for title, _ in seed_paragraphs}
    targets: set[str] = set()
    for title, para_index in seed_paragraphs:
        targets.update(corpus.get_paragraph(title, para_index).hyperlinks)
    targets = {t for t in targets if t not in seed_titles and t in corpus}
    if not targets:
        return []
    scores = index.score_units(query, restrict=set(targets))
    ranked = sorted(targets, key=lambda t: (-scores[t], t))[:top_n]
    out: list[tuple[str, int]] = []
    for title in ranked:
        out.extend((title, p.para_index) for p in corpus.document(title))
    return out


@dataclass
class InitialCandidateSet:
    """P_I: the ordered, duplicate-free term-based candidate paragraphs."""

    query_id: str
    paragraphs: list[tuple[str, int, str]]  # (title, para_index, source tag)

    @property
    def size(self) -> int:
        return len(self.paragraphs)

    def ids(self) -> list[tuple[str, int]]:
        return [(t, i) for t, i, _ in self.paragraphs]

    def titles(self) -> set[str]:
        return {t for t, _, _ in self.paragraphs}


def initial_candidates(
    corpus: Corpus,
    index: TermIndex,
    query_id: str,
    query_text: str,
    task: str,
    top_n: int = DEFAULT_TOP_N,
) -> InitialCandidateSet:
    """Combine keyword matches with the TF-IDF top-n, expanded to paragraphs;
    in hotpot mode additionally merge one round of hyperlink expansion.

    Source tag priority on duplicates: keyword > tfidf > hyperlink.
    """
    if task not in ("fever", "hotpot"):
        raise ValueError(f"task must be 'fever' or 'hotpot', got {task!r}")
    if index.granularity != "document":
        raise ValueError("initial candidate generation requires a document-granularity index")

    paragraphs: list[tuple[str, int, str]] = []
    seen: set[tuple[str, int]] = set()

    def add_document(title: str, source: str) -> None:
        for para in corpus.document(title):
            key = (title, para.para_index)
            if key not in seen:
                seen.add(key)
                paragraphs.append((title, para.para_index, source))

    for title in keyword_match(corpus, query_text):
        add_document(title, "keyword")
    for title, _score in tfidf_rank(index, query_text, top_n):
        add_document(title, "tfidf")

    if task == "hotpot":
        expanded = hyperlink_expand(corpus, index, [(t, i) for t, i, _ in paragraphs], query_text, top_n)
        for title, para_index in expanded:
            key = (title, para_index)
            if key not in seen:
                seen.add(key)
                paragraphs.append((title, para_index, "hyperlink"))

    return InitialCandidateSet(query_id=query_id, paragraphs=paragraphs)
