import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selpred.entropy import (
    ClusterAssignment,
    binarize_se_targets,
    cluster_by_entailment,
    semantic_entropy,
    sequence_nll,
)


class TestSequenceNll:
    def test_single_certain_token(self):
        assert sequence_nll([-0.0]).value == 0.0

    def test_uniform_binary_tokens(self):
        score = sequence_nll([math.log(0.5), math.log(0.5)])
        assert score.kind == "nll"
        assert score.value == pytest.approx(math.log(2), abs=1e-15)

    def test_matches_direct_summation(self):
        rng = np.random.default_rng(0)
        logprobs = -rng.exponential(1.0, size=50)
        expected = -sum(logprobs.tolist()) / 50
        assert sequence_nll(logprobs).value == pytest.approx(expected, abs=1e-12)

    def test_translation_covariance(self):
        rng = np.random.default_rng(1)
        logprobs = -rng.exponential(1.0, size=20)
        shift = 0.75  # scale all probabilities by e^{-shift}
        assert sequence_nll(logprobs - shift).value == pytest.approx(
            sequence_nll(logprobs).value + shift, abs=1e-12
        )

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            sequence_nll([])

    def test_positive_logprob_raises(self):
        with pytest.raises(ValueError):
            sequence_nll([0.3])


def block_matrix(sizes):
    k = sum(sizes)
    pairs = np.zeros((k, k), dtype=bool)
    start = 0
    for size in sizes:
        pairs[start:start + size, start:start + size] = True
        start += size
    return pairs


class TestClusterByEntailment:
    def test_all_mutual(self):
        assignment = cluster_by_entailment(np.ones((10, 10), dtype=bool))
        assert assignment.num_clusters == 1
        assert assignment.cluster_of == (0,) * 10

    def test_identity_only(self):
        assignment = cluster_by_entailment(np.eye(10, dtype=bool))
        assert assignment.num_clusters == 10
        assert assignment.cluster_of == tuple(range(10))

    def test_two_blocks(self):
        assignment = cluster_by_entailment(block_matrix([5, 5]))
        assert assignment.cluster_of == (0,) * 5 + (1,) * 5

    def test_one_way_entailment_not_enough(self):
        pairs = np.eye(3, dtype=bool)
        pairs[1, 0] = True  # 1 entails 0 but not back
        assignment = cluster_by_entailment(pairs)
        assert assignment.num_clusters == 3

    def test_non_transitive_uses_first_representative(self):
        # 1 and 2 each mutually entail 0, but not each other: the greedy pass
        # puts both with representative 0
        pairs = np.eye(3, dtype=bool)
        for i in (1, 2):
            pairs[0, i] = pairs[i, 0] = True
        assignment = cluster_by_entailment(pairs)
        assert assignment.cluster_of == (0, 0, 0)

    def test_non_square_raises(self):
        with pytest.raises(ValueError):
            cluster_by_entailment(np.ones((2, 3), dtype=bool))

    def test_false_diagonal_raises(self):
        pairs = np.ones((3, 3), dtype=bool)
        pairs[1, 1] = False
        with pytest.raises(ValueError):
            cluster_by_entailment(pairs)

    @given(
        st.lists(st.integers(min_value=0, max_value=4), min_size=1, max_size=12),
        st.randoms(use_true_random=False),
    )
    def test_recovers_equivalence_classes(self, raw_labels, rnd):
        # arbitrary partition, arbitrary sample order: mutual entailment that
        # is an equivalence relation is recovered exactly
        labels = list(raw_labels)
        rnd.shuffle(labels)
        k = len(labels)
        pairs = np.array([[labels[i] == labels[j] for j in range(k)] for i in range(k)])
        assignment = cluster_by_entailment(pairs)
        groups = {}
        for i, c in enumerate(assignment.cluster_of):
            groups.setdefault(c, set()).add(i)
        expected = {}
        for i, lab in enumerate(labels):
            expected.setdefault(lab, set()).add(i)
        assert set(map(frozenset, groups.values())) == set(map(frozenset, expected.values()))


class TestSemanticEntropy:
    def test_single_cluster_is_zero(self):
        assignment = ClusterAssignment(cluster_of=(0,) * 7, num_clusters=1)
        assert semantic_entropy(assignment).value == 0.0

    def test_uniform_two_clusters(self):
        assignment = cluster_by_entailment(block_matrix([5, 5]))
        assert semantic_entropy(assignment).value == pytest.approx(math.log(2), abs=1e-15)

    def test_sizes_7_2_1(self):
        assignment = cluster_by_entailment(block_matrix([7, 2, 1]))
        expected = -(0.7 * math.log(0.7) + 0.2 * math.log(0.2) + 0.1 * math.log(0.1))
        assert semantic_entropy(assignment).value == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.8018, abs=5e-5)

    @settings(max_examples=200)
    @given(st.lists(st.integers(min_value=1, max_value=6), min_size=1, max_size=8))
    def test_bounds_and_equality_cases(self, sizes):
        k = sum(sizes)
        value = semantic_entropy(cluster_by_entailment(block_matrix(sizes))).value
        assert 0.0 <= value <= math.log(k) + 1e-12
        if len(sizes) == 1:
            assert value == 0.0
        if all(s == 1 for s in sizes) and k > 1:
            assert value == pytest.approx(math.log(k), abs=1e-12)

    @given(st.lists(st.integers(min_value=1, max_value=5), min_size=2, max_size=6))
    def test_invariant_to_cluster_order(self, sizes):
        forward = semantic_entropy(cluster_by_entailment(block_matrix(sizes))).value
        backward = semantic_entropy(cluster_by_entailment(block_matrix(sizes[::-1]))).value
        assert forward == pytest.approx(backward, abs=1e-12)


class TestBinarizeSeTargets:
    def test_symmetric(self):
        labels, threshold = binarize_se_targets([0.0, 0.0, 1.0, 1.0])
        assert threshold == 0.5
        assert labels == [0, 0, 1, 1]

    def test_all_equal_is_all_zero(self):
        labels, threshold = binarize_se_targets([0.3] * 9)
        assert threshold == pytest.approx(0.3)
        assert labels == [0] * 9

    def test_odd_count_splits_exactly(self):
        rng = np.random.default_rng(2)
        values = rng.permutation(101).astype(float)
        labels, threshold = binarize_se_targets(values)
        assert sum(labels) == 50
        assert sum(1 for v in values if v > threshold) == 50

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            binarize_se_targets([])
