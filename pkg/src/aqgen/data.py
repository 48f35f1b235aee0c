"""Dataset records and their JSON-lines representation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .graph import AQG, QueryGraph, abstract
from .grounding import LinkingResults
from .kb import Term, format_term, parse_object
from .model import Mention, preprocess


@dataclass
class DatasetRecord:
    id: str
    question: str
    mentions: list[Mention]
    linking: LinkingResults
    gold_query: QueryGraph
    gold_answers: frozenset[Term] = field(default_factory=frozenset)

    @property
    def gold_aqg(self) -> AQG:
        return abstract(self.gold_query)

    @property
    def level(self) -> int:
        return len(self.gold_query.edges)

    def tokens(self) -> list[str]:
        return preprocess(self.question, self.mentions)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "question": self.question,
            "mentions": [m.to_dict() for m in self.mentions],
            "linking": self.linking.to_dict(),
            "gold_query": self.gold_query.to_dict(),
            "gold_answers": answers_to_json(self.gold_answers),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> DatasetRecord:
        return cls(
            id=str(d["id"]),
            question=d["question"],
            mentions=[Mention(m["start"], m["end"], m["kind"]) for m in d.get("mentions", [])],
            linking=LinkingResults.from_dict(d.get("linking", {})),
            gold_query=QueryGraph.from_dict(d["gold_query"]),
            gold_answers=answers_from_json(d.get("gold_answers", [])),
        )


def answers_to_json(answers: Iterable[Term]) -> list[str | float]:
    return sorted(answers, key=lambda a: (isinstance(a, str), format_term(a)))


def answers_from_json(items: Iterable[Any]) -> frozenset[Term]:
    return frozenset(float(x) if isinstance(x, (int, float)) else parse_object(str(x)) for x in items)


def write_jsonl(records: Iterable[DatasetRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[DatasetRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    out.append(DatasetRecord.from_dict(json.loads(line)))
                except (KeyError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out
