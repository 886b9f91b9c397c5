"""Transformer-backed relevance scorer service speaking the hiret wire
protocol, plus a training entry point for the pair classifier."""

from .config import ScorerServiceConfig
from .model import PairScorer, ScorerBackend, build_tokenizer, load_backend
from .service import create_app
from .training import TrainHyper, train

__version__ = "0.1.0"

__all__ = [
    "PairScorer",
    "ScorerBackend",
    "ScorerServiceConfig",
    "TrainHyper",
    "__version__",
    "build_tokenizer",
    "create_app",
    "load_backend",
    "train",
]
