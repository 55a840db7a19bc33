"""CLI: produce a record file from a causal LM, an NLI model, and a judge.

    selpred-extract --model <hf id or path> --dataset <questions.jsonl> \
        --n 1000 --seed 0 --out <dir> \
        (--judge-endpoint <url> | --labels-from <labels.json>) \
        [--nli-model <hf id or path>]

Without ``--nli-model`` entailment falls back to normalized exact match,
which is only sensible for short-form answers.
"""

from __future__ import annotations

import argparse
import json
import sys

from .entailment import ExactMatchScorer, HfNliScorer, entailment_index_from_config
from .generation import CausalGenerator
from .judge import FileLabels, HttpJudge
from .pipeline import extract_records
from .questions import load_questions


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="selpred-extract", description=__doc__)
    parser.add_argument("--model", required=True, help="causal LM: Hugging Face id or local path")
    parser.add_argument("--dataset", required=True, help="question pool JSONL path")
    parser.add_argument("--n", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--judge-endpoint", default=None, help="LLM-as-judge HTTP endpoint")
    parser.add_argument("--labels-from", default=None, help="offline labels JSON (id -> bool)")
    parser.add_argument("--nli-model", default=None, help="NLI model for entailment")
    parser.add_argument("--max-new-tokens", type=int, default=32)
    parser.add_argument("--k", type=int, default=10, help="high-temperature samples per question")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if (args.judge_endpoint is None) == (args.labels_from is None):
        print(
            json.dumps({"error": "usage", "message": "pass exactly one of --judge-endpoint / --labels-from"}),
            file=sys.stderr,
        )
        return 1
    try:
        from transformers import (
            AutoModelForCausalLM,
            AutoModelForSequenceClassification,
            AutoTokenizer,
        )

        model = AutoModelForCausalLM.from_pretrained(args.model)
        tokenizer = AutoTokenizer.from_pretrained(args.model)
        generator = CausalGenerator(model, tokenizer, max_new_tokens=args.max_new_tokens)

        if args.nli_model:
            nli_model = AutoModelForSequenceClassification.from_pretrained(args.nli_model)
            nli_tokenizer = AutoTokenizer.from_pretrained(args.nli_model)
            scorer = HfNliScorer(
                nli_model, nli_tokenizer, entailment_index_from_config(nli_model.config)
            )
        else:
            scorer = ExactMatchScorer()

        judge = HttpJudge(args.judge_endpoint) if args.judge_endpoint else FileLabels(args.labels_from)
        pool = load_questions(args.dataset)
        result = extract_records(
            generator,
            pool,
            scorer,
            judge,
            dataset=args.dataset,
            model=args.model,
            n=args.n,
            seed=args.seed,
            out_dir=args.out,
            k=args.k,
        )
    except (OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    print(
        f"wrote {result.records_path} ({result.n_written} records, "
        f"{result.n_excluded} excluded -> {result.exclusions_path})"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
