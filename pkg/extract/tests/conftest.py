import json

import pytest
import torch
from transformers import GPT2Config, GPT2LMHeadModel

from selpred_extract.generation import ByteTokenizer, CausalGenerator
from selpred_extract.questions import Question


@pytest.fixture(scope="session")
def tiny_generator():
    """Randomly initialized byte-level GPT-2; small enough for fast CPU tests."""
    tokenizer = ByteTokenizer()
    config = GPT2Config(
        vocab_size=tokenizer.vocab_size,
        n_positions=256,
        n_embd=32,
        n_layer=2,
        n_head=2,
        bos_token_id=tokenizer.bos_token_id,
        eos_token_id=tokenizer.eos_token_id,
    )
    torch.manual_seed(1234)
    model = GPT2LMHeadModel(config)
    return CausalGenerator(model, tokenizer, max_new_tokens=12)


@pytest.fixture()
def question_pool():
    return [
        Question(id=f"q{i}", question=f"what is item {i}?", reference=f"item {i}")
        for i in range(8)
    ]


@pytest.fixture()
def labels_file(tmp_path, question_pool):
    path = tmp_path / "labels.json"
    path.write_text(json.dumps({q.id: i % 2 == 0 for i, q in enumerate(question_pool)}))
    return path
