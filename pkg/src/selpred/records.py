"""Record schema, JSONL ingestion/validation, and deterministic stratified splitting.

A record file holds one JSON object per line (UTF-8). Hidden-state keys are
``"layer_<i>"`` strings in the file and integer layer indices in memory. All
returned structures are immutable after ingestion and safe to share across
threads.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SPLIT_NAMES = ("train", "calibration", "test")
SPLIT_FRACTIONS = (0.70, 0.15, 0.15)
MIN_SPLIT_SIZE = 20


class RecordError(ValueError):
    """A record violates the schema or one of its invariants."""


@dataclass(frozen=True)
class GenerationRecord:
    """One question's full evidence for a single (dataset, model) pair.

    ``answer_token_logprobs`` are natural-log probabilities of the generated
    answer tokens (each <= 0). ``samples`` holds the K high-temperature
    completions. Exactly one of ``cluster_ids`` / ``entailment_pairs`` must be
    present; when both are, ``cluster_ids`` is authoritative. ``hidden_states``
    maps layer index to the feature vector at the last prompt token.
    """

    id: str
    dataset: str
    model: str
    question: str
    answer: str
    answer_token_logprobs: tuple[float, ...]
    samples: tuple[str, ...]
    correct: bool
    cluster_ids: tuple[int, ...] | None = None
    entailment_pairs: np.ndarray | None = None
    hidden_states: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def hallucinated(self) -> bool:
        return not self.correct

    @property
    def num_samples(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class SplitAssignment:
    id: str
    split: str


@dataclass(frozen=True)
class ValidationReport:
    """Count of valid records plus (line number, violated invariant) pairs."""

    count: int
    errors: list[tuple[int, str]]

    @property
    def ok(self) -> bool:
        return not self.errors


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _parse_layer_key(key: str) -> int:
    if not key.startswith("layer_"):
        raise RecordError(f"hidden_states key {key!r} must look like 'layer_<i>'")
    try:
        idx = int(key[len("layer_"):])
    except ValueError:
        raise RecordError(f"hidden_states key {key!r} has a non-integer index") from None
    if idx < 0:
        raise RecordError(f"hidden_states layer index {idx} must be >= 0")
    return idx


def parse_record(obj: dict) -> GenerationRecord:
    """Build a GenerationRecord from a decoded JSON object, checking all invariants.

    Raises RecordError with a message naming the violated invariant.
    """
    if not isinstance(obj, dict):
        raise RecordError("record must be a JSON object")

    for name in ("id", "dataset", "model", "question", "answer"):
        value = obj.get(name)
        if not isinstance(value, str):
            raise RecordError(f"{name} must be a string")
    if not obj["id"]:
        raise RecordError("id must be non-empty")

    logprobs = obj.get("answer_token_logprobs")
    if not isinstance(logprobs, list) or not logprobs:
        raise RecordError("answer_token_logprobs must be a non-empty list")
    for lp in logprobs:
        if not isinstance(lp, (int, float)) or isinstance(lp, bool):
            raise RecordError("logprob must be a real number")
        if lp > 0:
            raise RecordError("logprob must be <= 0")

    samples = obj.get("samples")
    if not isinstance(samples, list) or not samples:
        raise RecordError("samples must be a non-empty list")
    if not all(isinstance(s, str) for s in samples):
        raise RecordError("samples must be strings")
    k = len(samples)

    correct = obj.get("correct")
    if not isinstance(correct, bool):
        raise RecordError("correct must be a boolean")

    cluster_ids = obj.get("cluster_ids")
    pairs = obj.get("entailment_pairs")
    if cluster_ids is None and pairs is None:
        raise RecordError("one of cluster_ids / entailment_pairs must be present")

    parsed_clusters: tuple[int, ...] | None = None
    if cluster_ids is not None:
        if not isinstance(cluster_ids, list):
            raise RecordError("cluster_ids must be a list")
        if len(cluster_ids) != k:
            raise RecordError("cluster_ids length != K")
        for c in cluster_ids:
            if not isinstance(c, int) or isinstance(c, bool) or c < 0:
                raise RecordError("cluster_ids entries must be non-negative integers")
        num_clusters = max(cluster_ids) + 1
        if set(cluster_ids) != set(range(num_clusters)):
            raise RecordError("cluster_ids values must form a contiguous range 0..C-1")
        parsed_clusters = tuple(cluster_ids)

    parsed_pairs: np.ndarray | None = None
    if pairs is not None:
        if not isinstance(pairs, list) or len(pairs) != k:
            raise RecordError("entailment_pairs must be a KxK matrix")
        for row in pairs:
            if not isinstance(row, list) or len(row) != k:
                raise RecordError("entailment_pairs must be a KxK matrix")
            if not all(isinstance(v, bool) for v in row):
                raise RecordError("entailment_pairs entries must be booleans")
        mat = np.array(pairs, dtype=bool)
        if not mat.diagonal().all():
            raise RecordError("entailment_pairs diagonal must be all true")
        parsed_pairs = _readonly(mat)

    hidden = obj.get("hidden_states")
    if hidden is None:
        hidden = {}
    if not isinstance(hidden, dict):
        raise RecordError("hidden_states must be an object")
    parsed_hidden: dict[int, np.ndarray] = {}
    dim: int | None = None
    for key in sorted(hidden):
        idx = _parse_layer_key(key)
        vec = hidden[key]
        if not isinstance(vec, list) or not vec:
            raise RecordError(f"hidden_states[{key}] must be a non-empty list of reals")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vec):
            raise RecordError(f"hidden_states[{key}] must contain only reals")
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise RecordError("hidden_states feature dimension differs across layers")
        parsed_hidden[idx] = _readonly(np.array(vec, dtype=float))

    return GenerationRecord(
        id=obj["id"],
        dataset=obj["dataset"],
        model=obj["model"],
        question=obj["question"],
        answer=obj["answer"],
        answer_token_logprobs=tuple(float(lp) for lp in logprobs),
        samples=tuple(samples),
        correct=correct,
        cluster_ids=parsed_clusters,
        entailment_pairs=parsed_pairs,
        hidden_states=parsed_hidden,
    )


def record_to_json(record: GenerationRecord) -> dict:
    """Inverse of parse_record; field names match the file schema bit-exactly."""
    obj: dict = {
        "id": record.id,
        "dataset": record.dataset,
        "model": record.model,
        "question": record.question,
        "answer": record.answer,
        "answer_token_logprobs": list(record.answer_token_logprobs),
        "samples": list(record.samples),
        "correct": record.correct,
    }
    if record.cluster_ids is not None:
        obj["cluster_ids"] = list(record.cluster_ids)
    if record.entailment_pairs is not None:
        obj["entailment_pairs"] = [[bool(v) for v in row] for row in record.entailment_pairs]
    obj["hidden_states"] = {
        f"layer_{i}": [float(v) for v in record.hidden_states[i]]
        for i in sorted(record.hidden_states)
    }
    return obj


def write_records(records: list[GenerationRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record_to_json(record), sort_keys=True))
            fh.write("\n")


def _check_file_consistency(
    record: GenerationRecord,
    seen_ids: set[str],
    layer_sig: list[tuple[tuple[int, ...], int] | None],
) -> str | None:
    """Cross-record invariants: unique ids, shared layer set and dimension."""
    if record.id in seen_ids:
        return f"duplicate id {record.id!r}"
    seen_ids.add(record.id)
    layers = tuple(sorted(record.hidden_states))
    dim = len(next(iter(record.hidden_states.values()))) if record.hidden_states else 0
    if layer_sig[0] is None:
        layer_sig[0] = (layers, dim)
        return None
    if (layers, dim) != layer_sig[0]:
        return "hidden_states layer set / dimension differs from rest of file"
    return None


def validate_records(path: str | Path) -> ValidationReport:
    """Validate a JSONL record file without dropping data.

    Returns the number of valid records and one (line number, message) entry
    per invalid line. An unreadable file raises OSError.
    """
    count = 0
    errors: list[tuple[int, str]] = []
    seen_ids: set[str] = set()
    layer_sig: list[tuple[tuple[int, ...], int] | None] = [None]
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                errors.append((line_no, "blank line"))
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append((line_no, f"malformed JSON: {exc.msg}"))
                continue
            try:
                record = parse_record(obj)
            except RecordError as exc:
                errors.append((line_no, str(exc)))
                continue
            cross = _check_file_consistency(record, seen_ids, layer_sig)
            if cross is not None:
                errors.append((line_no, cross))
                continue
            count += 1
    return ValidationReport(count=count, errors=errors)


def load_records(path: str | Path) -> list[GenerationRecord]:
    """Read a record file, raising RecordError on the first invalid line."""
    records: list[GenerationRecord] = []
    seen_ids: set[str] = set()
    layer_sig: list[tuple[tuple[int, ...], int] | None] = [None]
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                raise RecordError(f"line {line_no}: blank line")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordError(f"line {line_no}: malformed JSON: {exc.msg}") from None
            try:
                record = parse_record(obj)
            except RecordError as exc:
                raise RecordError(f"line {line_no}: {exc}") from None
            cross = _check_file_consistency(record, seen_ids, layer_sig)
            if cross is not None:
                raise RecordError(f"line {line_no}: {cross}")
            records.append(record)
    return records


def deterministic_order(keys: list[str], seed: int, salt: str) -> list[int]:
    """Indices of ``keys`` in a seeded pseudo-random order.

    The shuffle sorts by SHA-256 of ``"<seed>:<salt>:<key>"``, so it depends
    only on (key set, seed, salt) — never on input order, interpreter, or
    library version. This rule is part of the file-format contract and must
    not change.
    """
    digests = [
        hashlib.sha256(f"{seed}:{salt}:{key}".encode("utf-8")).hexdigest()
        for key in keys
    ]
    return sorted(range(len(keys)), key=lambda i: (digests[i], keys[i]))


def largest_remainder(total: int, quotas: list[float]) -> list[int]:
    """Integer allocation of ``total`` by quota, largest fractional part first.

    Ties on the fractional part go to the earlier quota. Each allocation is
    within 1 of its quota.
    """
    floors = [int(np.floor(q)) for q in quotas]
    leftover = total - sum(floors)
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - floors[i]), i))
    for i in order[:leftover]:
        floors[i] += 1
    return floors


def split_records(records: list[GenerationRecord], seed: int) -> list[SplitAssignment]:
    """Deterministic stratified 70:15:15 split on the correctness label.

    A pure function of (sorted ids, labels, seed): split totals are fixed by
    largest-remainder rounding of the 70:15:15 quotas, then the hallucinated
    stratum is allocated to each split by largest remainder against that
    split's exact stratified count, so every split's hallucination count is
    within one record of exact stratification. Within each stratum, membership
    follows the seeded hash order of ids.
    """
    if len(records) < MIN_SPLIT_SIZE:
        raise ValueError(f"need at least {MIN_SPLIT_SIZE} records to split, got {len(records)}")
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise ValueError("record ids must be unique")

    n = len(records)
    totals = largest_remainder(n, [f * n for f in SPLIT_FRACTIONS])

    halluc_ids = sorted(r.id for r in records if r.hallucinated)
    correct_ids = sorted(r.id for r in records if not r.hallucinated)
    n_halluc = len(halluc_ids)
    halluc_counts = largest_remainder(n_halluc, [t * n_halluc / n for t in totals])
    correct_counts = [t - h for t, h in zip(totals, halluc_counts)]

    assignments: dict[str, str] = {}
    for stratum_ids, counts, salt in (
        (halluc_ids, halluc_counts, "hallucinated"),
        (correct_ids, correct_counts, "correct"),
    ):
        order = deterministic_order(stratum_ids, seed, salt)
        cursor = 0
        for split, count in zip(SPLIT_NAMES, counts):
            for i in order[cursor:cursor + count]:
                assignments[stratum_ids[i]] = split
            cursor += count

    return [SplitAssignment(id=r.id, split=assignments[r.id]) for r in records]


def write_splits(assignments: list[SplitAssignment], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "split"])
        for a in assignments:
            writer.writerow([a.id, a.split])


def read_splits(path: str | Path) -> dict[str, str]:
    splits: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["id", "split"]:
            raise ValueError(f"split file must have header id,split, got {reader.fieldnames}")
        for row in reader:
            if row["split"] not in SPLIT_NAMES:
                raise ValueError(f"unknown split {row['split']!r}")
            splits[row["id"]] = row["split"]
    return splits
