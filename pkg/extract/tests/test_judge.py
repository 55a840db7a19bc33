import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from selpred_extract.judge import (
    JUDGE_PROMPT_VERSION,
    FileLabels,
    HttpJudge,
    JudgeError,
    parse_verdict,
    render_judge_prompt,
)


class TestPromptTemplate:
    def test_render_fills_fields(self):
        prompt = render_judge_prompt("What is 2+2?", "4", "four")
        assert "What is 2+2?" in prompt
        assert "Proposed answer: 4" in prompt
        assert "Reference answer: four" in prompt

    def test_missing_reference_noted(self):
        assert "(none provided)" in render_judge_prompt("q", "a")


class TestParseVerdict:
    def test_strict_yes_no(self):
        assert parse_verdict(" Yes\n") is True
        assert parse_verdict("no") is False

    @pytest.mark.parametrize("raw", ["maybe", "yes!", "", "correct"])
    def test_anything_else_fails(self, raw):
        with pytest.raises(JudgeError):
            parse_verdict(raw)


class _Handler(BaseHTTPRequestHandler):
    responses = []

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        assert payload["version"] == JUDGE_PROMPT_VERSION
        type(self).requests.append(payload)
        status, body = type(self).responses.pop(0)
        data = json.dumps(body).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture()
def judge_server():
    _Handler.responses = []
    _Handler.requests = []
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}", _Handler
    server.shutdown()


class TestHttpJudge:
    def test_yes_and_no_verdicts(self, judge_server):
        endpoint, handler = judge_server
        handler.responses = [(200, {"verdict": "yes"}), (200, {"verdict": "No"})]
        judge = HttpJudge(endpoint)
        assert judge.judge("q1", "question?", "answer", "ref") is True
        assert judge.judge("q2", "question?", "answer", "ref") is False
        assert "question?" in handler.requests[0]["prompt"]

    def test_garbage_verdict_is_judge_error(self, judge_server):
        endpoint, handler = judge_server
        handler.responses = [(200, {"verdict": "possibly"})]
        with pytest.raises(JudgeError, match="yes/no"):
            HttpJudge(endpoint).judge("q", "?", "a")

    def test_http_error_is_judge_error(self, judge_server):
        endpoint, handler = judge_server
        handler.responses = [(500, {"oops": 1})]
        with pytest.raises(JudgeError, match="endpoint failed"):
            HttpJudge(endpoint).judge("q", "?", "a")

    def test_missing_verdict_field(self, judge_server):
        endpoint, handler = judge_server
        handler.responses = [(200, {"label": "yes"})]
        with pytest.raises(JudgeError, match="missing"):
            HttpJudge(endpoint).judge("q", "?", "a")


class TestFileLabels:
    def test_lookup(self, tmp_path):
        path = tmp_path / "labels.json"
        path.write_text('{"q1": true, "q2": false}')
        labels = FileLabels(path)
        assert labels.judge("q1", "?", "a") is True
        assert labels.judge("q2", "?", "a") is False

    def test_missing_id_fails(self, tmp_path):
        path = tmp_path / "labels.json"
        path.write_text('{"q1": true}')
        with pytest.raises(JudgeError, match="no offline label"):
            FileLabels(path).judge("q9", "?", "a")

    def test_non_boolean_rejected(self, tmp_path):
        path = tmp_path / "labels.json"
        path.write_text('{"q1": "yes"}')
        with pytest.raises(ValueError):
            FileLabels(path)
