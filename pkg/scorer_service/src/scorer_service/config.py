"""Service configuration."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

MIN_SEQ_LEN = 16
MAX_REQUEST_CONTEXTS = 512


@dataclass
class ScorerServiceConfig:
    model: str = "mini"          # "mini", a checkpoint directory, or a hub id
    max_seq_len: int = 128
    batch_size: int = 32
    device: str = "cpu"
    port: int = 8000

    def __post_init__(self):
        if self.max_seq_len < MIN_SEQ_LEN:
            raise ValueError(f"max_seq_len must be >= {MIN_SEQ_LEN}, got {self.max_seq_len}")
        if not (0 < self.port < 65536):
            raise ValueError(f"invalid port: {self.port}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    @classmethod
    def load(cls, path: str | Path) -> "ScorerServiceConfig":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.__dict__, indent=2) + "\n", encoding="utf-8")
