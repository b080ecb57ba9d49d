"""Prompt construction, completion-endpoint access, and verdict parsing
for analogy questions posed to a language model.

Prompt text is a stable external format: goldens elsewhere pin it byte
for byte, so any change here is a format break, not a refactor.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable

import requests

from analex import jsonl
from analex.corpus import Corpus
from analex.errors import DataError, ExternalServiceError, UsageError
from analex.quadgen import AnalogyLabel, Quadruple

ZERO_COT_TRIGGER = "Let's think step by step"


class PromptKind(Enum):
    ZERO_SHOT = "zero-shot"
    FEW_SHOT = "few-shot"
    COT = "cot"
    ZERO_COT = "zero-cot"

    @classmethod
    def from_token(cls, token: str) -> "PromptKind":
        for kind in cls:
            if kind.value == token:
                return kind
        raise UsageError(f"unknown prompt kind {token!r}")


@dataclass(frozen=True)
class PromptItem:
    """The texts of one analogy question: two statutes, each with a case
    split into premise context and hypothesis."""

    statute1: str
    context1: str
    hypothesis1: str
    statute2: str
    context2: str
    hypothesis2: str
    quad_id: str | None = None


@dataclass(frozen=True)
class PromptExample(PromptItem):
    """A solved item used as an in-context exemplar."""

    answer: AnalogyLabel = AnalogyLabel.ANALOGY
    reasoning: str | None = None


@dataclass(frozen=True)
class PromptSpec:
    kind: PromptKind
    exemplars: tuple[PromptExample, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind in (PromptKind.ZERO_SHOT, PromptKind.ZERO_COT):
            if self.exemplars:
                raise UsageError(f"{self.kind.value} prompts take no exemplars")
            return
        if not self.exemplars:
            raise UsageError(f"{self.kind.value} prompts need at least one exemplar")
        if self.kind is PromptKind.COT:
            for exemplar in self.exemplars:
                if not exemplar.reasoning:
                    raise UsageError("chain-of-thought exemplars need a reasoning string")


def item_from_quad(corpus: Corpus, quad: Quadruple) -> PromptItem:
    c1 = corpus.case(quad.first.case_id)
    c2 = corpus.case(quad.second.case_id)
    return PromptItem(
        statute1=corpus.statute(quad.first.statute_id).text,
        context1=c1.context,
        hypothesis1=c1.hypothesis,
        statute2=corpus.statute(quad.second.statute_id).text,
        context2=c2.context,
        hypothesis2=c2.hypothesis,
        quad_id=quad.quad_id,
    )


def _case_line(number: int, context: str, hypothesis: str) -> str:
    parts = []
    if context:
        parts.append(f"Premise: {context}")
    parts.append(f"Hypothesis {number}: {hypothesis}")
    return f"Case {number}: " + " ".join(parts)


def _question_block(item: PromptItem) -> str:
    return "\n".join(
        [
            f"Statute 1: {item.statute1}",
            _case_line(1, item.context1, item.hypothesis1),
            f"Statute 2: {item.statute2}",
            _case_line(2, item.context2, item.hypothesis2),
            "Question: Is Statute 1 to Case 1 as Statute 2 is to Case 2?",
        ]
    )


def _answer_word(label: AnalogyLabel) -> str:
    return "Yes" if label is AnalogyLabel.ANALOGY else "No"


def _exemplar_block(exemplar: PromptExample, with_reasoning: bool) -> str:
    if with_reasoning:
        answer = f"A: {exemplar.reasoning} Therefore, the answer is {_answer_word(exemplar.answer)}."
    else:
        answer = f"A: {_answer_word(exemplar.answer)}"
    return _question_block(exemplar) + "\n" + answer


def build_prompt(spec: PromptSpec, item: PromptItem) -> str:
    """Render the full prompt string for one item.

    Exemplar blocks precede the unanswered question block, separated by
    blank lines; the zero-cot variant appends its trigger phrase after
    the final answer cue.
    """
    if item.quad_id is not None:
        for exemplar in spec.exemplars:
            if exemplar.quad_id == item.quad_id:
                raise UsageError(f"exemplar and question share quad_id {item.quad_id!r}")
    blocks = [
        _exemplar_block(exemplar, with_reasoning=spec.kind is PromptKind.COT)
        for exemplar in spec.exemplars
    ]
    blocks.append(_question_block(item) + "\nA:")
    prompt = "\n\n".join(blocks)
    if spec.kind is PromptKind.ZERO_COT:
        prompt += "\n" + ZERO_COT_TRIGGER
    return prompt


def bundled_cot_exemplars() -> tuple[PromptExample, ...]:
    """The six solved walkthrough exemplars shipped with the package."""
    raw = resources.files("analex.data").joinpath("cot_exemplars.json").read_text("utf-8")
    records = json.loads(raw)
    exemplars = []
    for record in records:
        exemplars.append(
            PromptExample(
                statute1=record["statute1"],
                context1=record["context1"],
                hypothesis1=record["hypothesis1"],
                statute2=record["statute2"],
                context2=record["context2"],
                hypothesis2=record["hypothesis2"],
                answer=(
                    AnalogyLabel.ANALOGY if record["answer"] == "yes" else AnalogyLabel.NOT_ANALOGY
                ),
                reasoning=record["reasoning"],
            )
        )
    if len(exemplars) != 6:
        raise DataError(f"expected 6 bundled exemplars, found {len(exemplars)}")
    return tuple(exemplars)


def make_spec(kind: PromptKind, exemplars: tuple[PromptExample, ...] | None = None) -> PromptSpec:
    """PromptSpec for a kind, defaulting cot to the bundled exemplars."""
    if kind is PromptKind.COT and exemplars is None:
        exemplars = bundled_cot_exemplars()
    return PromptSpec(kind=kind, exemplars=exemplars or ())


class Verdict(Enum):
    YES = "yes"
    NO = "no"
    ABSTAIN = "abstain"

    def to_analogy(self) -> AnalogyLabel | None:
        if self is Verdict.YES:
            return AnalogyLabel.ANALOGY
        if self is Verdict.NO:
            return AnalogyLabel.NOT_ANALOGY
        return None


_ANSWER_IS = re.compile(r"the answer is[:\s]+(yes|no)\b", re.IGNORECASE)
_LEADING = re.compile(r"^\W*(yes|no)\b", re.IGNORECASE)
_STANDALONE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)


def parse_verdict(completion: str) -> Verdict:
    """Extract yes/no from a model completion.

    Priority: the last "the answer is yes/no" wins over a leading
    yes/no token, which wins over the last standalone yes/no anywhere;
    anything else is an abstention.
    """
    hits = _ANSWER_IS.findall(completion)
    if hits:
        return Verdict(hits[-1].lower())
    lead = _LEADING.match(completion)
    if lead:
        return Verdict(lead.group(1).lower())
    hits = _STANDALONE.findall(completion)
    if hits:
        return Verdict(hits[-1].lower())
    return Verdict.ABSTAIN


ADAPTERS = ("completions", "openai-chat")


@dataclass(frozen=True)
class LlmEndpointConfig:
    url: str
    model: str
    adapter: str = "completions"
    temperature: float = 0.0
    max_tokens: int = 512
    api_key_env: str | None = None
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 0.5
    requests_per_minute: float | None = None

    def __post_init__(self):
        if self.adapter not in ADAPTERS:
            raise UsageError(f"unknown endpoint adapter {self.adapter!r}")
        if self.max_retries < 0 or self.timeout <= 0:
            raise UsageError("retries must be >= 0 and timeout positive")


def _resolve_key(config: LlmEndpointConfig) -> str | None:
    # Resolved before any socket is opened so a missing credential fails
    # fast as a usage problem, not mid-run as a transport one.
    if config.api_key_env is None:
        return None
    key = os.environ.get(config.api_key_env)
    if not key:
        raise UsageError(f"environment variable {config.api_key_env} is not set")
    return key


def _request_body(config: LlmEndpointConfig, prompt: str) -> dict:
    if config.adapter == "completions":
        return {
            "model": config.model,
            "prompt": prompt,
            "temperature": config.temperature,
            "max_tokens": config.max_tokens,
        }
    return {
        "model": config.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    }


def _extract_completion(config: LlmEndpointConfig, payload: dict) -> str:
    try:
        if config.adapter == "completions":
            return str(payload["completion"])
        return str(payload["choices"][0]["message"]["content"])
    except (KeyError, IndexError, TypeError):
        raise ExternalServiceError(
            f"endpoint response lacks a completion for adapter {config.adapter!r}"
        ) from None


class TokenBucket:
    """Steady-rate limiter: capacity tokens, refilled at rate per second.

    Clock and sleep are injectable so tests never wait on wall time.
    """

    def __init__(
        self,
        rate_per_second: float,
        capacity: float = 1.0,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if rate_per_second <= 0 or capacity < 1:
            raise UsageError("rate must be positive and capacity at least 1")
        self.rate = rate_per_second
        self.capacity = capacity
        self.tokens = capacity
        self.clock = clock
        self.sleep = sleep
        self.last = clock()

    def _refill(self):
        now = self.clock()
        self.tokens = min(self.capacity, self.tokens + (now - self.last) * self.rate)
        self.last = now

    def acquire(self):
        self._refill()
        if self.tokens < 1.0:
            self.sleep((1.0 - self.tokens) / self.rate)
            self._refill()
            self.tokens = max(self.tokens, 1.0)  # sleeping bought the token
        self.tokens -= 1.0


def _log_event(log_path: Path | None, event: dict) -> None:
    if log_path is None:
        return
    event = {"ts": datetime.now(timezone.utc).isoformat(), **event}
    with open(log_path, "a", encoding="utf-8") as handle:
        handle.write(json.dumps(event, ensure_ascii=False) + "\n")


def query_llm(
    config: LlmEndpointConfig,
    prompt: str,
    *,
    session: requests.Session | None = None,
    log_path: str | Path | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """One prompt in, one completion string out.

    Retries transport failures, 429, and 5xx with exponential backoff;
    other HTTP errors and malformed payloads fail immediately. The log
    (when enabled) records bodies and statuses, never credentials.
    """
    key = _resolve_key(config)
    session = session or requests
    log_path = Path(log_path) if log_path is not None else None
    body = _request_body(config, prompt)
    headers = {"Authorization": f"Bearer {key}"} if key else {}
    last_error = None
    for attempt in range(config.max_retries + 1):
        if attempt:
            sleep(config.backoff_base * 2 ** (attempt - 1))
        _log_event(log_path, {"direction": "request", "url": config.url, "body": body})
        try:
            response = session.post(
                config.url, json=body, headers=headers, timeout=config.timeout
            )
        except requests.RequestException as exc:
            last_error = f"transport failure: {exc}"
            _log_event(log_path, {"direction": "error", "error": last_error})
            continue
        _log_event(
            log_path,
            {"direction": "response", "status": response.status_code, "body": response.text},
        )
        if response.status_code == 429 or response.status_code >= 500:
            last_error = f"endpoint returned HTTP {response.status_code}"
            continue
        if response.status_code != 200:
            raise ExternalServiceError(f"endpoint returned HTTP {response.status_code}")
        try:
            payload = response.json()
        except ValueError:
            raise ExternalServiceError("endpoint response is not JSON") from None
        return _extract_completion(config, payload)
    raise ExternalServiceError(f"giving up after {config.max_retries + 1} attempts: {last_error}")


def run_quads(
    config: LlmEndpointConfig,
    prompts: Iterable[tuple[str, str]],
    *,
    out_path: str | Path,
    log_path: str | Path | None = None,
    session: requests.Session | None = None,
    sleep: Callable[[float], None] = time.sleep,
    bucket: TokenBucket | None = None,
) -> dict[str, int]:
    """Send (quad_id, prompt) pairs, parse verdicts, and write a
    predictions file of the decided ones.

    Returns counts: sent, yes, no, abstained. Abstentions are left out
    of the predictions file so downstream voting sees them as missing.
    """
    if bucket is None and config.requests_per_minute:
        bucket = TokenBucket(config.requests_per_minute / 60.0, sleep=sleep)
    counts = {"sent": 0, "yes": 0, "no": 0, "abstained": 0}
    rows = []
    for quad_id, prompt in prompts:
        if bucket is not None:
            bucket.acquire()
        completion = query_llm(
            config, prompt, session=session, log_path=log_path, sleep=sleep
        )
        counts["sent"] += 1
        verdict = parse_verdict(completion)
        if verdict is Verdict.ABSTAIN:
            counts["abstained"] += 1
            continue
        counts[verdict.value] += 1
        label = verdict.to_analogy()
        rows.append({"quad_id": quad_id, "label": label.to_int()})
    jsonl.write_records(out_path, rows)
    return counts


def write_prompts(path: str | Path, prompts: Iterable[tuple[str, str]]) -> None:
    jsonl.write_records(path, ({"quad_id": qid, "prompt": text} for qid, text in prompts))


def read_prompts(path: str | Path) -> list[tuple[str, str]]:
    out = []
    for lineno, record in jsonl.read_records(path):
        jsonl.require_fields(record, ("quad_id", "prompt"), path=str(path), line=lineno)
        out.append((str(record["quad_id"]), str(record["prompt"])))
    return out
