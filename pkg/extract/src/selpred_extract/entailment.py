"""Pairwise entailment over sampled completions.

The matrix entry (i, j) answers "does sample i entail sample j". Textually
identical samples (after whitespace normalization) entail each other without
a model call, which also makes the diagonal unconditionally true.
"""

from __future__ import annotations

import torch


def _normalize(text: str) -> str:
    return " ".join(text.split()).strip().lower()


class ExactMatchScorer:
    """Entailment by normalized string equality; offline fallback and test double."""

    def entails(self, premise: str, hypothesis: str) -> bool:
        return _normalize(premise) == _normalize(hypothesis)


class HfNliScorer:
    """NLI classification via a Hugging Face sequence-classification model.

    Entailment holds iff the argmax class equals ``entailment_index``.
    """

    def __init__(self, model, tokenizer, entailment_index: int):
        self.model = model.eval()
        self.tokenizer = tokenizer
        self.entailment_index = entailment_index

    @torch.no_grad()
    def entails(self, premise: str, hypothesis: str) -> bool:
        encoded = self.tokenizer(premise, hypothesis, return_tensors="pt", truncation=True)
        logits = self.model(**encoded).logits[0]
        return int(torch.argmax(logits)) == self.entailment_index


def entailment_index_from_config(config) -> int:
    """Locate the entailment class in a model config's label map (default 2)."""
    for label, index in getattr(config, "label2id", {}).items():
        if "entail" in label.lower():
            return int(index)
    return 2


def entailment_matrix(samples: list[str], scorer) -> list[list[bool]]:
    k = len(samples)
    normalized = [_normalize(s) for s in samples]
    matrix = [[False] * k for _ in range(k)]
    for i in range(k):
        for j in range(k):
            if normalized[i] == normalized[j]:
                matrix[i][j] = True
            else:
                matrix[i][j] = bool(scorer.entails(samples[i], samples[j]))
    return matrix
