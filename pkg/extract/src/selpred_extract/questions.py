"""Question pools and the deterministic sampling plan.

A pool is a JSONL file of objects with ``id`` and ``question`` fields plus an
optional ``reference`` answer used for judging. Sampling sorts ids by the
SHA-256 of "<seed>:question:<id>" and takes the first n, so the chosen set
depends only on (pool ids, seed) and is shared across models, never on file
order or library versions.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class Question:
    id: str
    question: str
    reference: str = ""


def load_questions(path: str | Path) -> list[Question]:
    questions = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            for field in ("id", "question"):
                if not isinstance(obj.get(field), str) or not obj[field]:
                    raise ValueError(f"line {line_no}: {field} must be a non-empty string")
            if obj["id"] in seen:
                raise ValueError(f"line {line_no}: duplicate question id {obj['id']!r}")
            seen.add(obj["id"])
            questions.append(
                Question(id=obj["id"], question=obj["question"], reference=obj.get("reference", ""))
            )
    if not questions:
        raise ValueError(f"no questions in {path}")
    return questions


def sample_questions(pool: list[Question], n: int, seed: int) -> list[Question]:
    if n > len(pool):
        raise ValueError(f"asked for {n} questions but the pool holds {len(pool)}")
    keyed = sorted(
        pool,
        key=lambda q: (
            hashlib.sha256(f"{seed}:question:{q.id}".encode("utf-8")).hexdigest(),
            q.id,
        ),
    )
    return keyed[:n]
