"""Sample records and their line-delimited persistence.

Every pipeline stage reads and writes the same schema so any stage can be
resumed from disk.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field


@dataclass
class VerificationRecord:
    votes_cast: int
    winning_count: int
    agreement_ratio: float


@dataclass
class Sample:
    id: str
    input: str
    output: str
    provenance: str  # initial | harder | easier
    verification: VerificationRecord
    parent_id: str | None = None
    source_passage_ids: list[str] = field(default_factory=list)

    def to_dict(self):
        return {
            "id": self.id,
            "input": self.input,
            "output": self.output,
            "provenance": self.provenance,
            "parent_id": self.parent_id,
            "source_passage_ids": list(self.source_passage_ids),
            "verification": {
                "votes_cast": self.verification.votes_cast,
                "winning_count": self.verification.winning_count,
                "agreement_ratio": self.verification.agreement_ratio,
            },
        }

    @classmethod
    def from_dict(cls, data):
        ver = data["verification"]
        return cls(
            id=data["id"],
            input=data["input"],
            output=data["output"],
            provenance=data["provenance"],
            parent_id=data.get("parent_id"),
            source_passage_ids=list(data.get("source_passage_ids", [])),
            verification=VerificationRecord(
                votes_cast=ver["votes_cast"],
                winning_count=ver["winning_count"],
                agreement_ratio=ver["agreement_ratio"],
            ),
        )


_WS_RE = re.compile(r"\s+")


def normalized_input(text):
    """Lowercased, whitespace-collapsed form used for exact-match dedup."""
    return _WS_RE.sub(" ", text.strip().lower())


def write_samples(samples, path):
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(json.dumps(sample.to_dict(), sort_keys=True,
                                ensure_ascii=False) + "\n")


def read_samples(path):
    samples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                samples.append(Sample.from_dict(json.loads(line)))
    return samples
