import json

import pytest

from selpred_extract.questions import Question, load_questions, sample_questions


def write_pool(path, items):
    with open(path, "w") as fh:
        for item in items:
            fh.write(json.dumps(item) + "\n")


class TestLoadQuestions:
    def test_loads_fields(self, tmp_path):
        path = tmp_path / "pool.jsonl"
        write_pool(path, [
            {"id": "a", "question": "what?", "reference": "that"},
            {"id": "b", "question": "who?"},
        ])
        pool = load_questions(path)
        assert pool[0] == Question(id="a", question="what?", reference="that")
        assert pool[1].reference == ""

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "pool.jsonl"
        write_pool(path, [{"id": "a", "question": "x?"}, {"id": "a", "question": "y?"}])
        with pytest.raises(ValueError, match="duplicate"):
            load_questions(path)

    def test_empty_pool_rejected(self, tmp_path):
        path = tmp_path / "pool.jsonl"
        path.write_text("")
        with pytest.raises(ValueError, match="no questions"):
            load_questions(path)


class TestSampling:
    def test_same_seed_same_plan(self, question_pool):
        assert sample_questions(question_pool, 4, seed=5) == sample_questions(
            question_pool, 4, seed=5
        )

    def test_different_seed_different_plan(self, question_pool):
        a = [q.id for q in sample_questions(question_pool, 4, seed=1)]
        b = [q.id for q in sample_questions(question_pool, 4, seed=2)]
        assert a != b

    def test_plan_independent_of_pool_order(self, question_pool):
        forward = sample_questions(question_pool, 5, seed=3)
        backward = sample_questions(list(reversed(question_pool)), 5, seed=3)
        assert forward == backward

    def test_oversampling_rejected(self, question_pool):
        with pytest.raises(ValueError, match="pool holds"):
            sample_questions(question_pool, 99, seed=0)
