"""End-to-end record extraction: generate, score entailment, judge, emit JSONL.

The emitted file follows the record schema of the evaluation toolkit exactly
(one JSON object per line, ``layer_<i>`` hidden-state keys) and is intended to
pass its validator with zero errors. Records whose generation fails twice or
whose judge call fails are excluded and logged, never silently dropped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .entailment import entailment_matrix
from .generation import CausalGenerator
from .judge import JudgeError
from .questions import Question, sample_questions

NUM_SAMPLES = 10
ANSWER_TEMPERATURE = 0.1
SAMPLE_TEMPERATURE = 1.0


@dataclass(frozen=True)
class ExtractionResult:
    records_path: Path
    exclusions_path: Path
    n_written: int
    n_excluded: int


def build_record(
    question: Question,
    generator: CausalGenerator,
    scorer,
    judge,
    *,
    dataset: str,
    model: str,
    seed: int,
    k: int = NUM_SAMPLES,
    answer_temperature: float = ANSWER_TEMPERATURE,
    sample_temperature: float = SAMPLE_TEMPERATURE,
) -> dict:
    """One schema-shaped record dict for one question; raises on failure."""
    answer, logprobs = generator.answer(question.question, seed, temperature=answer_temperature)
    samples = generator.samples(question.question, k, seed, temperature=sample_temperature)
    hidden = generator.prompt_hidden_states(question.question)
    correct = judge.judge(question.id, question.question, answer, question.reference)
    return {
        "id": question.id,
        "dataset": dataset,
        "model": model,
        "question": question.question,
        "answer": answer,
        "answer_token_logprobs": logprobs,
        "samples": samples,
        "entailment_pairs": entailment_matrix(samples, scorer),
        "hidden_states": {f"layer_{i}": vec for i, vec in sorted(hidden.items())},
        "correct": correct,
    }


def extract_records(
    generator: CausalGenerator,
    pool: list[Question],
    scorer,
    judge,
    *,
    dataset: str,
    model: str,
    n: int,
    seed: int,
    out_dir: str | Path,
    k: int = NUM_SAMPLES,
    answer_temperature: float = ANSWER_TEMPERATURE,
    sample_temperature: float = SAMPLE_TEMPERATURE,
) -> ExtractionResult:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records_path = out_dir / "records.jsonl"
    exclusions_path = out_dir / "exclusions.jsonl"

    chosen = sample_questions(pool, n, seed)
    n_written = 0
    n_excluded = 0
    with open(records_path, "w", encoding="utf-8", newline="\n") as records_fh, open(
        exclusions_path, "w", encoding="utf-8", newline="\n"
    ) as exclusions_fh:
        for question in chosen:
            record = None
            exclusion = None
            for attempt in (1, 2):  # one retry for generation failures
                try:
                    record = build_record(
                        question,
                        generator,
                        scorer,
                        judge,
                        dataset=dataset,
                        model=model,
                        seed=seed,
                        k=k,
                        answer_temperature=answer_temperature,
                        sample_temperature=sample_temperature,
                    )
                    break
                except JudgeError as exc:
                    exclusion = {"id": question.id, "reason": "judge", "detail": str(exc)}
                    break
                except Exception as exc:  # generation failure: retry once
                    exclusion = {
                        "id": question.id,
                        "reason": "generation",
                        "detail": f"attempt {attempt}: {exc}",
                    }
            if record is not None:
                records_fh.write(json.dumps(record, sort_keys=True) + "\n")
                n_written += 1
            else:
                exclusions_fh.write(json.dumps(exclusion, sort_keys=True) + "\n")
                n_excluded += 1
    return ExtractionResult(
        records_path=records_path,
        exclusions_path=exclusions_path,
        n_written=n_written,
        n_excluded=n_excluded,
    )
