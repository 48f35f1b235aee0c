"""Dataclass configs shared by the generator, trainer and pipeline."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any


@dataclass
class Hyperparams:
    hidden: int = 64  # 256 in the original setup
    embedding: int = 64  # 300 in the original setup
    graph_layers: int = 3
    recurrent_layers: int = 1
    heads: int = 4
    learning_rate: float = 2e-3  # 2e-4 in the original setup
    clip_norm: float | None = 1.0  # global gradient-norm clip; None disables
    epochs: int = 30
    seed: int = 0
    traversal: str = "dfs"
    # architecture switches for ablations
    use_attention: bool = True
    use_skip: bool = True
    use_graph_encoder: bool = True

    def __post_init__(self) -> None:
        if self.hidden % 2:
            raise ValueError("hidden size must be even (split across directions)")
        if self.hidden % self.heads:
            raise ValueError("heads must divide the hidden size")
        if self.recurrent_layers != 1:
            raise ValueError("only single-layer recurrent cells are implemented")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")
        if self.traversal not in ("dfs", "bfs", "random"):
            raise ValueError(f"unknown traversal {self.traversal!r}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Hyperparams:
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass
class GenerationConfig:
    kb_constraint: bool = True
    attach_type: bool = True
    max_vertices: int = 8

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> GenerationConfig:
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


ABLATIONS: dict[str, dict[str, bool]] = {
    "full": {},
    "no-attention": {"use_attention": False},
    "no-skip": {"use_skip": False},
    "no-graph-encoder": {"use_graph_encoder": False},
    "no-kb-constraint": {"kb_constraint": False},
}


def load_config(path: str | Path) -> tuple[Hyperparams, GenerationConfig, dict[str, Any]]:
    """Read a JSON config holding hyperparameters and mode flags in one flat map."""
    raw = json.loads(Path(path).read_text())
    return Hyperparams.from_dict(raw), GenerationConfig.from_dict(raw), raw
