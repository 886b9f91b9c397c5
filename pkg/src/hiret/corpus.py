"""Normalized, immutable corpus of documents -> paragraphs -> sentences.

Three ingestion formats are supported:

* ``fever_wiki``   one JSON object per line with ``id`` (title), ``text`` and
  ``lines`` (numbered, tab-delimited sentence lines). Single paragraph per
  document, no hyperlink metadata.
* ``hotpot_wiki``  one JSON object per line with ``title``, ``text`` (list of
  paragraphs, each a list of sentences) and ``links`` (anchor target titles
  per paragraph).
* ``plain_jsonl``  ``{"title", "paragraphs": [{"sentences": [...], "links": [...]}]}``,
  the store's own normalized format.

The persistent store is a single append-only file (length-prefixed JSON
records) with an in-memory title -> offset map rebuilt on open. After build
the store is read-only and safe to share across concurrent readers.

Sentence indices are document level: paragraph ``p`` of a document owns
indices ``[p.sent_offset, p.sent_offset + len(p.sentences))``. Empty source
sentences are stored as empty-string sentinels so indices stay aligned with
the raw source (gold evidence indices refer to raw line numbers).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator

from .text import canonicalize_title

_MAGIC = b"HRCS1\n"
_LEN = struct.Struct(">I")


class CorpusError(Exception):
    """Malformed input during ingestion."""


class NotFoundError(KeyError):
    """Lookup of an unknown title, paragraph index or sentence index."""

    def __init__(self, kind: str, key):
        super().__init__(f"unknown {kind}: {key!r}")
        self.kind = kind
        self.key = key


@dataclass(frozen=True)
class SentenceId:
    title: str
    sent_index: int

    def as_pair(self) -> list:
        return [self.title, self.sent_index]


@dataclass(frozen=True)
class ParagraphRecord:
    title: str
    para_index: int
    sentences: tuple[str, ...]
    hyperlinks: frozenset[str]
    sent_offset: int = 0

    def text(self) -> str:
        """Paragraph content with empty sentinels skipped."""
        return " ".join(s for s in self.sentences if s)

    def sentence_ids(self) -> list[SentenceId]:
        return [
            SentenceId(self.title, self.sent_offset + i)
            for i in range(len(self.sentences))
        ]


@dataclass
class _Document:
    title: str
    paragraphs: list[ParagraphRecord]


def _normalize_doc(title: str, raw_paragraphs: list[dict], where: str) -> _Document:
    """Build a document from [{"sentences": [...], "links": [...]}] dicts.

    Paragraphs whose sentences are all empty are dropped; surviving paragraphs
    are renumbered densely and given document-level sentence offsets.
    """
    canon = canonicalize_title(title)
    if not canon:
        raise CorpusError(f"{where}: empty title")
    paragraphs = []
    offset = 0
    for raw in raw_paragraphs:
        sentences = tuple(str(s) for s in raw.get("sentences", []))
        if not any(s.strip() for s in sentences):
            continue
        links = frozenset(
            canonicalize_title(link)
            for link in raw.get("links", [])
            if canonicalize_title(link) and canonicalize_title(link) != canon
        )
        paragraphs.append(
            ParagraphRecord(
                title=canon,
                para_index=len(paragraphs),
                sentences=sentences,
                hyperlinks=links,
                sent_offset=offset,
            )
        )
        offset += len(sentences)
    return _Document(title=canon, paragraphs=paragraphs)


def _parse_fever_lines(lines_field: str, where: str) -> list[str]:
    """FEVER ``lines``: "<idx>\\t<sentence>[\\t<anchor>...]" per newline.

    Gaps and empty sentences become empty-string sentinels so stored indices
    match the raw line numbering.
    """
    sentences: dict[int, str] = {}
    if not lines_field:
        return []
    for raw_line in lines_field.split("\n"):
        if not raw_line:
            continue
        parts = raw_line.split("\t")
        try:
            idx = int(parts[0])
        except ValueError as exc:
            raise CorpusError(f"{where}: sentence line has non-integer index: {raw_line[:60]!r}") from exc
        if idx < 0:
            raise CorpusError(f"{where}: negative sentence index {idx}")
        sentences[idx] = parts[1] if len(parts) > 1 else ""
    if not sentences:
        return []
    top = max(sentences)
    return [sentences.get(i, "") for i in range(top + 1)]


def _iter_source_docs(path: Path, fmt: str) -> Iterator[_Document]:
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            where = f"{path.name}:{lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{where}: invalid JSON ({exc.msg})") from exc
            if fmt == "fever_wiki":
                if "id" not in obj:
                    raise CorpusError(f"{where}: missing 'id' field")
                sentences = _parse_fever_lines(obj.get("lines", ""), where)
                raw = [{"sentences": sentences, "links": []}] if sentences else []
                yield _normalize_doc(obj["id"], raw, where)
            elif fmt == "hotpot_wiki":
                if "title" not in obj:
                    raise CorpusError(f"{where}: missing 'title' field")
                text = obj.get("text", [])
                links = obj.get("links", [])
                raw = []
                for i, para in enumerate(text):
                    para_links = links[i] if i < len(links) else []
                    raw.append({"sentences": para, "links": para_links})
                yield _normalize_doc(obj["title"], raw, where)
            elif fmt == "plain_jsonl":
                if "title" not in obj:
                    raise CorpusError(f"{where}: missing 'title' field")
                yield _normalize_doc(obj["title"], obj.get("paragraphs", []), where)
            else:
                raise ValueError(f"unknown corpus format: {fmt!r}")


def ingest_corpus(
    sources: Iterable[str | Path] | str | Path,
    fmt: str,
    out_path: str | Path,
    jsonl_path: str | Path | None = None,
) -> "Corpus":
    """Ingest source files into a persistent store and return an open handle.

    A normalized ``plain_jsonl`` copy is always written next to the binary
    store (default: ``<out_path>.jsonl``). Duplicate canonical titles across
    all sources are an error.
    """
    if isinstance(sources, (str, Path)):
        sources = [sources]
    out_path = Path(out_path)
    jsonl_path = Path(jsonl_path) if jsonl_path is not None else out_path.with_suffix(out_path.suffix + ".jsonl")

    seen: set[str] = set()
    with out_path.open("wb") as store, jsonl_path.open("w", encoding="utf-8") as mirror:
        store.write(_MAGIC)
        for src in sources:
            src = Path(src)
            if not src.exists():
                raise FileNotFoundError(src)
            for doc in _iter_source_docs(src, fmt):
                if doc.title in seen:
                    raise CorpusError(f"duplicate title: {doc.title!r}")
                seen.add(doc.title)
                record = {
                    "title": doc.title,
                    "paragraphs": [
                        {"sentences": list(p.sentences), "links": sorted(p.hyperlinks)}
                        for p in doc.paragraphs
                    ],
                }
                payload = json.dumps(record, ensure_ascii=False, sort_keys=True).encode("utf-8")
                store.write(_LEN.pack(len(payload)))
                store.write(payload)
                mirror.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
    return Corpus.open(out_path)


@dataclass
class Corpus:
    """Read-only handle over a built store."""

    path: Path
    doc_count: int
    paragraph_count: int
    sentence_count: int
    _offsets: dict[str, int] = field(repr=False, default_factory=dict)

    @classmethod
    def open(cls, path: str | Path) -> "Corpus":
        path = Path(path)
        offsets: dict[str, int] = {}
        n_para = 0
        n_sent = 0
        with path.open("rb") as fh:
            magic = fh.read(len(_MAGIC))
            if magic != _MAGIC:
                raise CorpusError(f"{path}: not a corpus store")
            while True:
                pos = fh.tell()
                head = fh.read(_LEN.size)
                if not head:
                    break
                (length,) = _LEN.unpack(head)
                payload = fh.read(length)
                record = json.loads(payload.decode("utf-8"))
                title = record["title"]
                if title in offsets:
                    raise CorpusError(f"{path}: duplicate title {title!r}")
                offsets[title] = pos
                for para in record["paragraphs"]:
                    n_para += 1
                    n_sent += len(para["sentences"])
        corpus = cls(
            path=path,
            doc_count=len(offsets),
            paragraph_count=n_para,
            sentence_count=n_sent,
            _offsets=offsets,
        )
        corpus._read_doc = lru_cache(maxsize=4096)(corpus._read_doc)  # type: ignore[method-assign]
        return corpus

    def _read_doc(self, canon: str) -> _Document:
        offset = self._offsets[canon]
        with self.path.open("rb") as fh:
            fh.seek(offset)
            (length,) = _LEN.unpack(fh.read(_LEN.size))
            record = json.loads(fh.read(length).decode("utf-8"))
        paragraphs = []
        sent_offset = 0
        for i, para in enumerate(record["paragraphs"]):
            paragraphs.append(
                ParagraphRecord(
                    title=canon,
                    para_index=i,
                    sentences=tuple(para["sentences"]),
                    hyperlinks=frozenset(para["links"]),
                    sent_offset=sent_offset,
                )
            )
            sent_offset += len(para["sentences"])
        return _Document(title=canon, paragraphs=paragraphs)

    def titles(self) -> list[str]:
        return list(self._offsets)

    def __contains__(self, title: str) -> bool:
        return canonicalize_title(title) in self._offsets

    def document(self, title: str) -> list[ParagraphRecord]:
        canon = canonicalize_title(title)
        if canon not in self._offsets:
            raise NotFoundError("title", title)
        return self._read_doc(canon).paragraphs

    def get_paragraph(self, title: str, para_index: int) -> ParagraphRecord:
        paragraphs = self.document(title)
        if para_index < 0 or para_index >= len(paragraphs):
            raise NotFoundError("paragraph index", (title, para_index))
        return paragraphs[para_index]

    def resolve_sentence(self, sid: SentenceId) -> str:
        if sid.sent_index < 0:
            raise ValueError(f"sentence index must be non-negative, got {sid.sent_index}")
        paragraphs = self.document(sid.title)
        for para in paragraphs:
            if para.sent_offset <= sid.sent_index < para.sent_offset + len(para.sentences):
                return para.sentences[sid.sent_index - para.sent_offset]
        raise NotFoundError("sentence index", (sid.title, sid.sent_index))

    def paragraph_of_sentence(self, sid: SentenceId) -> ParagraphRecord:
        paragraphs = self.document(sid.title)
        for para in paragraphs:
            if para.sent_offset <= sid.sent_index < para.sent_offset + len(para.sentences):
                return para
        raise NotFoundError("sentence index", (sid.title, sid.sent_index))

    def iter_paragraphs(self) -> Iterator[ParagraphRecord]:
        for title in self._offsets:
            yield from self._read_doc(title).paragraphs

    @property
    def counts(self) -> dict[str, int]:
        return {
            "documents": self.doc_count,
            "paragraphs": self.paragraph_count,
            "sentences": self.sentence_count,
        }
