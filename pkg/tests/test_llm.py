import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest
import requests

from analex.errors import DataError, ExternalServiceError, UsageError
from analex.llm import (
    ZERO_COT_TRIGGER,
    LlmEndpointConfig,
    PromptExample,
    PromptItem,
    PromptKind,
    PromptSpec,
    TokenBucket,
    Verdict,
    build_prompt,
    bundled_cot_exemplars,
    item_from_quad,
    make_spec,
    parse_verdict,
    query_llm,
    read_prompts,
    run_quads,
    write_prompts,
)
from analex.quadgen import AnalogyLabel, PairRef, Quadruple

GOLDEN_DIR = Path(__file__).parent / "goldens"

QUESTION = PromptItem(
    statute1="Section 4(a): a permit is required to operate a food stall in a public square.",
    context1="Lee operated a food stall in Harbor Square without a permit.",
    hypothesis1="Lee violated section 4(a).",
    statute2="Section 9: every rental agreement must state the deposit amount.",
    context2="",
    hypothesis2="The agreement between Kim and Pat states the deposit amount.",
    quad_id="s1:q1|s2:q2",
)

EXEMPLAR_A = PromptExample(
    statute1="A vendor must post prices for every item offered for sale.",
    context1="Rowan offered apples for sale with no prices posted.",
    hypothesis1="Rowan failed to follow the posting rule.",
    statute2="Drivers must stop at a red signal.",
    context2="Sam drove through the intersection while the signal was red.",
    hypothesis2="Sam failed to stop as required.",
    answer=AnalogyLabel.ANALOGY,
    reasoning=(
        "Statute 1 requires posted prices and the premise says none were posted, "
        "so Hypothesis 1 follows. Statute 2 requires stopping at red and the "
        "premise says Sam did not stop, so Hypothesis 2 follows. Both cases "
        "relate to their statutes the same way."
    ),
)

EXEMPLAR_B = PromptExample(
    statute1="Library books may be borrowed for up to three weeks.",
    context1="Noor returned a borrowed book after two weeks.",
    hypothesis1="Noor kept the book longer than allowed.",
    statute2="A gym membership may be frozen once per year.",
    context2="Casey froze a membership twice in one year.",
    hypothesis2="Casey exceeded the freeze allowance.",
    answer=AnalogyLabel.NOT_ANALOGY,
)


def golden(name: str) -> str:
    return (GOLDEN_DIR / name).read_text(encoding="utf-8")


class TestPromptGoldens:
    def test_zero_shot(self):
        spec = make_spec(PromptKind.ZERO_SHOT)
        assert build_prompt(spec, QUESTION) == golden("prompt_zero_shot.txt")

    def test_zero_cot(self):
        spec = make_spec(PromptKind.ZERO_COT)
        assert build_prompt(spec, QUESTION) == golden("prompt_zero_cot.txt")

    def test_few_shot(self):
        spec = make_spec(PromptKind.FEW_SHOT, (EXEMPLAR_A, EXEMPLAR_B))
        assert build_prompt(spec, QUESTION) == golden("prompt_few_shot.txt")

    def test_cot(self):
        spec = make_spec(PromptKind.COT, (EXEMPLAR_A,))
        assert build_prompt(spec, QUESTION) == golden("prompt_cot.txt")

    def test_zero_cot_ends_with_trigger(self):
        prompt = build_prompt(make_spec(PromptKind.ZERO_COT), QUESTION)
        assert prompt.endswith("A:\n" + ZERO_COT_TRIGGER)


class TestSpecValidation:
    def test_zero_shot_rejects_exemplars(self):
        with pytest.raises(UsageError):
            PromptSpec(kind=PromptKind.ZERO_SHOT, exemplars=(EXEMPLAR_B,))

    def test_few_shot_needs_an_exemplar(self):
        with pytest.raises(UsageError):
            make_spec(PromptKind.FEW_SHOT)

    def test_cot_exemplars_need_reasoning(self):
        with pytest.raises(UsageError):
            PromptSpec(kind=PromptKind.COT, exemplars=(EXEMPLAR_B,))

    def test_exemplar_question_overlap_rejected(self):
        shared = PromptExample(
            statute1="s", context1="c", hypothesis1="h",
            statute2="s", context2="c", hypothesis2="h",
            quad_id=QUESTION.quad_id, answer=AnalogyLabel.ANALOGY,
        )
        spec = PromptSpec(kind=PromptKind.FEW_SHOT, exemplars=(shared,))
        with pytest.raises(UsageError, match="share quad_id"):
            build_prompt(spec, QUESTION)

    def test_unknown_kind_token(self):
        with pytest.raises(UsageError):
            PromptKind.from_token("one-shot")


class TestBundledExemplars:
    def test_six_balanced_solved_walkthroughs(self):
        exemplars = bundled_cot_exemplars()
        assert len(exemplars) == 6
        answers = [e.answer for e in exemplars]
        assert answers.count(AnalogyLabel.ANALOGY) == 3
        assert answers.count(AnalogyLabel.NOT_ANALOGY) == 3
        assert all(e.reasoning for e in exemplars)

    def test_default_cot_prompt_uses_all_six(self):
        prompt = build_prompt(make_spec(PromptKind.COT), QUESTION)
        assert prompt.count("Question: Is Statute 1 to Case 1 as Statute 2 is to Case 2?") == 7
        assert prompt.count("Therefore, the answer is") == 6
        assert prompt.endswith("A:")


class TestItemFromQuad:
    def test_texts_come_from_the_corpus(self, toy_corpus):
        cases = toy_corpus.split_cases("train")[:2]
        quad = Quadruple(first=PairRef.for_case(cases[0]), second=PairRef.for_case(cases[1]))
        item = item_from_quad(toy_corpus, quad)
        assert item.statute1 == toy_corpus.statute(cases[0].statute_id).text
        assert item.hypothesis2 == cases[1].hypothesis
        assert item.context1 == cases[0].context
        assert item.quad_id == quad.quad_id


class TestParseVerdict:
    @pytest.mark.parametrize(
        "completion,expected",
        [
            ("Yes", Verdict.YES),
            ("No.", Verdict.NO),
            ("  **Yes**, the relation matches.", Verdict.YES),
            ("The premises differ. Therefore, the answer is no.", Verdict.NO),
            ("No. On reflection the answer is yes.", Verdict.YES),
            ("The relation holds in one case only: no", Verdict.NO),
            ("THE ANSWER IS: YES", Verdict.YES),
            ("the answer is yes. the answer is no.", Verdict.NO),
            ("yes no yes no", Verdict.YES),
            ("Yesterday the outcome was unknowable.", Verdict.ABSTAIN),
            ("I cannot tell.", Verdict.ABSTAIN),
            ("", Verdict.ABSTAIN),
        ],
    )
    def test_priority_table(self, completion, expected):
        assert parse_verdict(completion) is expected

    def test_verdicts_map_to_analogy_labels(self):
        assert Verdict.YES.to_analogy() is AnalogyLabel.ANALOGY
        assert Verdict.NO.to_analogy() is AnalogyLabel.NOT_ANALOGY
        assert Verdict.ABSTAIN.to_analogy() is None


class FakeClock:
    def __init__(self):
        self.t = 0.0

    def __call__(self):
        return self.t


class TestTokenBucket:
    def test_paces_after_the_first_token(self):
        clock = FakeClock()
        slept = []

        def fake_sleep(dt):
            slept.append(dt)
            clock.t += dt

        bucket = TokenBucket(2.0, clock=clock, sleep=fake_sleep)
        bucket.acquire()
        assert slept == []
        bucket.acquire()
        bucket.acquire()
        assert slept == [pytest.approx(0.5), pytest.approx(0.5)]

    def test_idle_time_refills_without_sleeping(self):
        clock = FakeClock()
        slept = []
        bucket = TokenBucket(2.0, clock=clock, sleep=lambda dt: slept.append(dt))
        bucket.acquire()
        clock.t += 10.0
        bucket.acquire()
        assert slept == []

    def test_bad_parameters_rejected(self):
        with pytest.raises(UsageError):
            TokenBucket(0.0)
        with pytest.raises(UsageError):
            TokenBucket(1.0, capacity=0.5)


class FakeResponse:
    def __init__(self, status=200, payload=None, text=None):
        self.status_code = status
        self._payload = payload
        self.text = text if text is not None else json.dumps(payload)

    def json(self):
        if self._payload is None:
            raise ValueError("not json")
        return self._payload


class FakeSession:
    """Replays a script of responses or exceptions, recording each call."""

    def __init__(self, script):
        self.script = list(script)
        self.calls = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append({"url": url, "body": json, "headers": headers, "timeout": timeout})
        action = self.script.pop(0)
        if isinstance(action, Exception):
            raise action
        return action


def config(**overrides) -> LlmEndpointConfig:
    base = dict(url="http://test.invalid/v1", model="toy-model")
    base.update(overrides)
    return LlmEndpointConfig(**base)


class TestQueryLlm:
    def test_completions_adapter_round_trip(self):
        session = FakeSession([FakeResponse(200, {"completion": "Yes"})])
        out = query_llm(config(), "P", session=session)
        assert out == "Yes"
        call = session.calls[0]
        assert call["body"] == {
            "model": "toy-model", "prompt": "P", "temperature": 0.0, "max_tokens": 512,
        }
        assert call["headers"] == {}
        assert call["timeout"] == 60.0

    def test_chat_adapter_round_trip(self):
        session = FakeSession(
            [FakeResponse(200, {"choices": [{"message": {"content": "No"}}]})]
        )
        out = query_llm(config(adapter="openai-chat"), "P", session=session)
        assert out == "No"
        body = session.calls[0]["body"]
        assert body["messages"] == [{"role": "user", "content": "P"}]
        assert "prompt" not in body

    def test_429_and_5xx_are_retried_with_backoff(self):
        ok = FakeResponse(200, {"completion": "done"})
        session = FakeSession([FakeResponse(429, {}), FakeResponse(503, {}), ok])
        slept = []
        out = query_llm(config(), "P", session=session, sleep=slept.append)
        assert out == "done"
        assert len(session.calls) == 3
        assert slept == [pytest.approx(0.5), pytest.approx(1.0)]

    def test_transport_errors_are_retried(self):
        ok = FakeResponse(200, {"completion": "done"})
        session = FakeSession([requests.ConnectionError("boom"), ok])
        out = query_llm(config(), "P", session=session, sleep=lambda dt: None)
        assert out == "done"
        assert len(session.calls) == 2

    def test_other_http_errors_fail_immediately(self):
        session = FakeSession([FakeResponse(404, {"error": "nope"})])
        with pytest.raises(ExternalServiceError, match="HTTP 404"):
            query_llm(config(), "P", session=session)
        assert len(session.calls) == 1

    def test_non_json_success_body_fails(self):
        session = FakeSession([FakeResponse(200, payload=None, text="<html>")])
        with pytest.raises(ExternalServiceError, match="not JSON"):
            query_llm(config(), "P", session=session)

    def test_missing_completion_field_fails(self):
        session = FakeSession([FakeResponse(200, {"text": "x"})])
        with pytest.raises(ExternalServiceError, match="lacks a completion"):
            query_llm(config(), "P", session=session)

    def test_gives_up_after_the_retry_budget(self):
        session = FakeSession([FakeResponse(429, {})] * 3)
        with pytest.raises(ExternalServiceError, match="giving up after 3 attempts"):
            query_llm(config(max_retries=2), "P", session=session, sleep=lambda dt: None)
        assert len(session.calls) == 3

    def test_missing_key_variable_fails_before_any_request(self, monkeypatch):
        monkeypatch.delenv("ANALEX_TEST_KEY", raising=False)
        session = FakeSession([])
        with pytest.raises(UsageError, match="ANALEX_TEST_KEY"):
            query_llm(config(api_key_env="ANALEX_TEST_KEY"), "P", session=session)
        assert session.calls == []

    def test_key_is_sent_but_never_logged(self, monkeypatch, tmp_path):
        monkeypatch.setenv("ANALEX_TEST_KEY", "sk-secret-123")
        session = FakeSession([FakeResponse(200, {"completion": "Yes"})])
        log_path = tmp_path / "wire.jsonl"
        query_llm(
            config(api_key_env="ANALEX_TEST_KEY"), "P", session=session, log_path=log_path
        )
        assert session.calls[0]["headers"] == {"Authorization": "Bearer sk-secret-123"}
        logged = log_path.read_text()
        assert "sk-secret-123" not in logged
        events = [json.loads(line) for line in logged.splitlines()]
        assert [e["direction"] for e in events] == ["request", "response"]
        assert all("ts" in e for e in events)

    def test_unknown_adapter_rejected(self):
        with pytest.raises(UsageError):
            config(adapter="grpc")

    def test_negative_retries_rejected(self):
        with pytest.raises(UsageError):
            config(max_retries=-1)


class RecordingHandler(BaseHTTPRequestHandler):
    recorded = []

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        type(self).recorded.append((self.path, self.headers.get("Authorization"), body))
        payload = json.dumps({"completion": "the answer is yes"}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


class TestAgainstLocalServer:
    def test_real_http_round_trip(self, monkeypatch):
        monkeypatch.setenv("ANALEX_TEST_KEY", "sk-local-1")
        RecordingHandler.recorded = []
        server = ThreadingHTTPServer(("127.0.0.1", 0), RecordingHandler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            url = f"http://127.0.0.1:{server.server_port}/v1/completions"
            out = query_llm(
                config(url=url, api_key_env="ANALEX_TEST_KEY", timeout=10.0), "P"
            )
        finally:
            server.shutdown()
            thread.join()
        assert out == "the answer is yes"
        path, auth, body = RecordingHandler.recorded[0]
        assert path == "/v1/completions"
        assert auth == "Bearer sk-local-1"
        assert body["prompt"] == "P"


class PromptKeyedSession:
    """Answers each request from a prompt-to-completion table."""

    def __init__(self, table):
        self.table = table

    def post(self, url, json=None, headers=None, timeout=None):
        prompt = json["prompt"]
        return FakeResponse(200, {"completion": self.table[prompt]})


class TestRunQuads:
    def test_only_decided_verdicts_are_written(self, tmp_path):
        session = PromptKeyedSession(
            {
                "P1": "Yes, clearly.",
                "P2": "Therefore, the answer is No.",
                "P3": "Cannot tell.",
            }
        )
        out_path = tmp_path / "preds.jsonl"
        counts = run_quads(
            config(),
            [("q1", "P1"), ("q2", "P2"), ("q3", "P3")],
            out_path=out_path,
            session=session,
        )
        assert counts == {"sent": 3, "yes": 1, "no": 1, "abstained": 1}
        rows = [json.loads(line) for line in out_path.read_text().splitlines()]
        assert rows == [{"quad_id": "q1", "label": 1}, {"quad_id": "q2", "label": 0}]

    def test_rate_limit_bucket_paces_the_calls(self, tmp_path):
        clock = FakeClock()
        slept = []

        def fake_sleep(dt):
            slept.append(dt)
            clock.t += dt

        bucket = TokenBucket(2.0, clock=clock, sleep=fake_sleep)
        session = PromptKeyedSession({"P1": "Yes", "P2": "No", "P3": "Yes"})
        run_quads(
            config(),
            [("q1", "P1"), ("q2", "P2"), ("q3", "P3")],
            out_path=tmp_path / "preds.jsonl",
            session=session,
            bucket=bucket,
        )
        assert len(slept) == 2


class TestPromptFiles:
    def test_round_trip(self, tmp_path):
        prompts = [("a:b|c:d", "line one\nline two"), ("e:f|g:h", "solo")]
        path = tmp_path / "prompts.jsonl"
        write_prompts(path, prompts)
        assert read_prompts(path) == prompts

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "prompts.jsonl"
        path.write_text('{"quad_id": "x"}\n')
        with pytest.raises(DataError):
            read_prompts(path)
