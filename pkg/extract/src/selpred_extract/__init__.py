"""Record extraction adapter for the selective-prediction evaluation toolkit."""

from .entailment import ExactMatchScorer, HfNliScorer, entailment_matrix
from .generation import ByteTokenizer, CausalGenerator
from .judge import FileLabels, HttpJudge, JudgeError, render_judge_prompt
from .pipeline import ExtractionResult, build_record, extract_records
from .questions import Question, load_questions, sample_questions

__all__ = [
    "ByteTokenizer",
    "CausalGenerator",
    "ExactMatchScorer",
    "ExtractionResult",
    "FileLabels",
    "HfNliScorer",
    "HttpJudge",
    "JudgeError",
    "Question",
    "build_record",
    "entailment_matrix",
    "extract_records",
    "load_questions",
    "render_judge_prompt",
    "sample_questions",
]

__version__ = "0.1.0"
