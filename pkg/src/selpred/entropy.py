"""Entropy-based risk scores: sequence NLL, entailment clustering, semantic entropy.

Natural logarithm throughout, so semantic entropy is bounded by ln K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .records import GenerationRecord


@dataclass(frozen=True)
class ClusterAssignment:
    """Cluster index per sample; cluster ids are contiguous 0..num_clusters-1."""

    cluster_of: tuple[int, ...]
    num_clusters: int

    def sizes(self) -> list[int]:
        counts = [0] * self.num_clusters
        for c in self.cluster_of:
            counts[c] += 1
        return counts


@dataclass(frozen=True)
class EntropyScore:
    kind: str  # "nll" or "semantic_entropy"
    value: float


def sequence_nll(answer_token_logprobs) -> EntropyScore:
    """Mean negative log-likelihood of the generated answer tokens."""
    logprobs = np.asarray(answer_token_logprobs, dtype=float)
    if logprobs.size == 0:
        raise ValueError("answer_token_logprobs must be non-empty")
    if np.any(logprobs > 0):
        raise ValueError("logprobs must be <= 0")
    return EntropyScore(kind="nll", value=float(-logprobs.mean()))


def cluster_by_entailment(entailment_pairs) -> ClusterAssignment:
    """Greedy left-to-right clustering by mutual entailment.

    Sample i joins the first existing cluster whose representative r (the
    cluster's first member) satisfies pairs[i, r] and pairs[r, i]; otherwise it
    opens a new cluster. When mutual entailment is not transitive the result
    depends on sample order; the order used is the sample order in the record.
    """
    pairs = np.asarray(entailment_pairs, dtype=bool)
    if pairs.ndim != 2 or pairs.shape[0] != pairs.shape[1]:
        raise ValueError(f"entailment_pairs must be square, got shape {pairs.shape}")
    k = pairs.shape[0]
    if k == 0:
        raise ValueError("entailment_pairs must be non-empty")
    if not pairs.diagonal().all():
        raise ValueError("entailment_pairs diagonal must be all true")

    representatives: list[int] = []
    cluster_of = [0] * k
    for i in range(k):
        for cluster_idx, r in enumerate(representatives):
            if pairs[i, r] and pairs[r, i]:
                cluster_of[i] = cluster_idx
                break
        else:
            cluster_of[i] = len(representatives)
            representatives.append(i)
    return ClusterAssignment(cluster_of=tuple(cluster_of), num_clusters=len(representatives))


def semantic_entropy(assignment: ClusterAssignment) -> EntropyScore:
    """Entropy of the cluster-assignment distribution, -sum p_c ln p_c."""
    k = len(assignment.cluster_of)
    if k == 0:
        raise ValueError("assignment must cover at least one sample")
    value = 0.0
    for size in assignment.sizes():
        if size == 0:
            raise ValueError("clusters must be non-empty")
        p = size / k
        value -= p * math.log(p)
    # -0.0 from the one-cluster case
    return EntropyScore(kind="semantic_entropy", value=value + 0.0)


def assignment_from_record(record: GenerationRecord) -> ClusterAssignment:
    """Cluster assignment for one record; precomputed cluster_ids win over pairs."""
    if record.cluster_ids is not None:
        return ClusterAssignment(
            cluster_of=record.cluster_ids,
            num_clusters=max(record.cluster_ids) + 1,
        )
    if record.entailment_pairs is not None:
        return cluster_by_entailment(record.entailment_pairs)
    raise ValueError(f"record {record.id!r} carries neither cluster_ids nor entailment_pairs")


def record_semantic_entropy(record: GenerationRecord) -> float:
    return semantic_entropy(assignment_from_record(record)).value


def binarize_se_targets(values) -> tuple[list[int], float]:
    """Binarize semantic-entropy values at the median of the given values.

    Label 1 iff value is strictly above the median (ties binarize to 0).
    Call this on training-split values only.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("values must be non-empty")
    threshold = float(np.median(arr))
    labels = [int(v > threshold) for v in arr]
    return labels, threshold
