"""Correctness labelling: LLM-as-judge over HTTP, or offline labels from a file.

The judge endpoint receives ``POST {"prompt": <rendered template>, "version":
<int>}`` and must return JSON with a ``verdict`` field whose stripped,
lowercased value is exactly "yes" or "no". Anything else is a judge failure
and the record is excluded. The prompt template lives in ``judge_prompt.txt``
next to this module and is versioned by its header line.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import requests

JUDGE_PROMPT_VERSION = 1


class JudgeError(Exception):
    """The judge could not produce a usable verdict for a record."""


def judge_prompt_template() -> str:
    text = resources.files("selpred_extract").joinpath("judge_prompt.txt").read_text("utf-8")
    header, _, body = text.partition("\n")
    assert f"v{JUDGE_PROMPT_VERSION}" in header, "template version drifted from code"
    return body


def render_judge_prompt(question: str, answer: str, reference: str = "") -> str:
    return judge_prompt_template().format(
        question=question, answer=answer, reference=reference or "(none provided)"
    )


def parse_verdict(raw: str) -> bool:
    verdict = raw.strip().lower()
    if verdict == "yes":
        return True
    if verdict == "no":
        return False
    raise JudgeError(f"verdict must be yes/no, got {raw!r}")


class HttpJudge:
    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def judge(self, record_id: str, question: str, answer: str, reference: str = "") -> bool:
        payload = {
            "prompt": render_judge_prompt(question, answer, reference),
            "version": JUDGE_PROMPT_VERSION,
        }
        try:
            response = requests.post(self.endpoint, json=payload, timeout=self.timeout)
            response.raise_for_status()
            body = response.json()
        except (requests.RequestException, ValueError) as exc:
            raise JudgeError(f"judge endpoint failed: {exc}") from exc
        if "verdict" not in body:
            raise JudgeError(f"judge response missing 'verdict': {body!r}")
        return parse_verdict(str(body["verdict"]))


class FileLabels:
    """Offline labels: a JSON object mapping record id to a boolean."""

    def __init__(self, path: str | Path):
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(obj, dict) or not all(isinstance(v, bool) for v in obj.values()):
            raise ValueError("labels file must map record ids to booleans")
        self.labels: dict[str, bool] = obj

    def judge(self, record_id: str, question: str, answer: str, reference: str = "") -> bool:
        if record_id not in self.labels:
            raise JudgeError(f"no offline label for {record_id!r}")
        return self.labels[record_id]
