"""Seeded synthetic record sets with planted structure.

The generator plants the confidently-wrong regime: a configurable fraction of
examples whose samples all mutually entail (semantic entropy exactly 0) but
that still hallucinate at their own rate, while hidden features carry a
correctness signal at exactly one layer. Token log-probs are drawn so mean
NLL correlates only weakly with hallucination, mirroring its role as the
weakest baseline. Sample strings are placeholders, not language.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .records import GenerationRecord, _readonly

NUM_SAMPLES = 10  # K high-temperature completions per record

# mean-NLL shift for hallucinated examples; keeps rank correlation near 0.2
NLL_SHIFT = 0.45
NLL_SCALE = 0.8


@dataclass(frozen=True)
class SynthConfig:
    n: int = 2000
    base_accuracy: float = 0.6
    zero_entropy_fraction: float = 0.4
    zero_entropy_hallucination_rate: float = 0.25
    pc_signal_strength: float = 2.0
    feature_dim: int = 16
    num_layers: int = 4
    seed: int = 0

    def validate(self) -> None:
        for name in ("base_accuracy", "zero_entropy_fraction", "zero_entropy_hallucination_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.n < 20:
            raise ValueError(f"n must be >= 20, got {self.n}")
        if self.pc_signal_strength < 0:
            raise ValueError("pc_signal_strength must be >= 0")
        if self.feature_dim < 1 or self.num_layers < 1:
            raise ValueError("feature_dim and num_layers must be >= 1")


def informative_layer(config: SynthConfig) -> int:
    """The one layer whose features carry the correctness signal."""
    return config.seed % config.num_layers


def config_from_json(path: str | Path) -> SynthConfig:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    unknown = set(obj) - set(SynthConfig.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown synth config keys: {sorted(unknown)}")
    return SynthConfig(**obj)


def _block_matrix(block_sizes: list[int]) -> np.ndarray:
    k = sum(block_sizes)
    pairs = np.zeros((k, k), dtype=bool)
    start = 0
    for size in block_sizes:
        pairs[start:start + size, start:start + size] = True
        start += size
    return pairs


def _draw_block_sizes(rng: np.random.Generator, correct: bool) -> list[int]:
    """Cluster sizes for a non-degenerate record; hallucinations disperse more."""
    if correct:
        num_clusters = int(rng.integers(2, 5))
    else:
        num_clusters = int(rng.integers(3, NUM_SAMPLES + 1))
    cuts = np.sort(rng.choice(NUM_SAMPLES - 1, size=num_clusters - 1, replace=False)) + 1
    edges = np.concatenate([[0], cuts, [NUM_SAMPLES]])
    return np.diff(edges).tolist()


def generate(config: SynthConfig) -> list[GenerationRecord]:
    """Seeded record generation; same config yields byte-identical files."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    signal_layer = informative_layer(config)
    direction = rng.standard_normal(config.feature_dim)
    direction /= np.linalg.norm(direction)

    records = []
    for i in range(config.n):
        zero_entropy = bool(rng.random() < config.zero_entropy_fraction)
        if zero_entropy:
            p_correct = 1.0 - config.zero_entropy_hallucination_rate
        else:
            p_correct = config.base_accuracy
        correct = bool(rng.random() < p_correct)

        if zero_entropy:
            block_sizes = [NUM_SAMPLES]
        else:
            block_sizes = _draw_block_sizes(rng, correct)
        pairs = _block_matrix(block_sizes)
        samples = []
        for block_id, size in enumerate(block_sizes):
            samples.extend([f"candidate {block_id}"] * size)

        hidden: dict[int, np.ndarray] = {}
        shift = (-1.0 if correct else 1.0) * config.pc_signal_strength / 2.0
        for layer in range(config.num_layers):
            vec = rng.standard_normal(config.feature_dim)
            if layer == signal_layer:
                vec = vec + shift * direction
            hidden[layer] = _readonly(vec)

        mean_nll = max(
            rng.normal(loc=1.0 + (0.0 if correct else NLL_SHIFT), scale=NLL_SCALE), 0.02
        )
        num_tokens = int(rng.integers(5, 31))
        weights = rng.random(num_tokens) + 0.2
        logprobs = -mean_nll * num_tokens * weights / weights.sum()

        records.append(
            GenerationRecord(
                id=f"synth-{i:06d}",
                dataset="synthetic",
                model="synthetic",
                question=f"question {i}",
                answer=f"answer {i}",
                answer_token_logprobs=tuple(float(lp) for lp in logprobs),
                samples=tuple(samples),
                correct=correct,
                entailment_pairs=_readonly(pairs),
                hidden_states=hidden,
            )
        )
    return records
