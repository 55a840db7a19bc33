import pytest
import torch
from transformers import BertConfig, BertForSequenceClassification, BertTokenizer

from selpred_extract.entailment import (
    ExactMatchScorer,
    HfNliScorer,
    entailment_index_from_config,
    entailment_matrix,
)


class RefusingScorer:
    """Fails the test if the model path is consulted at all."""

    def entails(self, premise, hypothesis):
        raise AssertionError("model should not be called for identical strings")


def test_identical_samples_all_true_without_model_calls():
    samples = ["the answer", "the  answer", "The Answer"] * 2
    matrix = entailment_matrix(samples, RefusingScorer())
    assert all(all(row) for row in matrix)


def test_diagonal_always_true_and_shape():
    class NeverEntails:
        def entails(self, premise, hypothesis):
            return False

    samples = [f"answer {i}" for i in range(5)]
    matrix = entailment_matrix(samples, NeverEntails())
    assert len(matrix) == 5 and all(len(row) == 5 for row in matrix)
    for i in range(5):
        for j in range(5):
            assert matrix[i][j] is (i == j)


def test_exact_match_scorer_normalizes():
    scorer = ExactMatchScorer()
    assert scorer.entails(" Paris ", "paris")
    assert not scorer.entails("Paris", "London")


@pytest.fixture(scope="module")
def tiny_nli(tmp_path_factory):
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "the", "answer", "item", "a", "b", "c"]
    vocab_path = tmp_path_factory.mktemp("nli") / "vocab.txt"
    vocab_path.write_text("\n".join(vocab))
    tokenizer = BertTokenizer(vocab_file=str(vocab_path))
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=16,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=32,
        num_labels=3,
        id2label={0: "CONTRADICTION", 1: "NEUTRAL", 2: "ENTAILMENT"},
        label2id={"CONTRADICTION": 0, "NEUTRAL": 1, "ENTAILMENT": 2},
    )
    torch.manual_seed(7)
    model = BertForSequenceClassification(config)
    return model, tokenizer


def test_hf_scorer_argmax_classification(tiny_nli):
    model, tokenizer = tiny_nli
    scorer = HfNliScorer(model, tokenizer, entailment_index_from_config(model.config))
    # random weights give arbitrary but deterministic verdicts
    first = scorer.entails("the answer a", "the answer b")
    again = scorer.entails("the answer a", "the answer b")
    assert first == again
    matrix = entailment_matrix(["a b", "b c", "a b"], scorer)
    assert matrix[0][2] and matrix[2][0]  # identical strings short-circuit


def test_entailment_index_fallback():
    class Config:
        label2id = {"good": 0, "bad": 1}

    assert entailment_index_from_config(Config()) == 2

    class MnliConfig:
        label2id = {"contradiction": 0, "neutral": 1, "entailment": 2}

    assert entailment_index_from_config(MnliConfig()) == 2
