"""Hierarchical evidence retrieval: term-based candidate generation,
thresholded paragraph- and sentence-level relevance filtering, upstream-
conditioned training sampling, downstream QA/verification adapters, and a
joint evaluation and ablation harness."""

from .corpus import Corpus, ParagraphRecord, SentenceId, ingest_corpus
from .pipeline import PipelineConfig, PipelineModules, run_batch, run_pipeline
from .queries import Query, load_queries
from .scoring import LexicalScorer, RemoteScorer, TableScorer, connect_remote_scorer
from .term_index import TermIndex, build_index, initial_candidates

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "LexicalScorer",
    "ParagraphRecord",
    "PipelineConfig",
    "PipelineModules",
    "Query",
    "RemoteScorer",
    "SentenceId",
    "TableScorer",
    "TermIndex",
    "__version__",
    "build_index",
    "connect_remote_scorer",
    "ingest_corpus",
    "initial_candidates",
    "load_queries",
    "run_batch",
    "run_pipeline",
]
