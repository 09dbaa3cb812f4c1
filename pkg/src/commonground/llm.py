"""Chat-completion backend: HTTP client, response parsing, prompt catalog,
and the LLM-backed object matcher.

All prompts instruct the model to think first and then emit a line starting
with ``Final answer:`` followed by a JSON value; :func:`extract_final_answer`
recovers that value no matter what prose surrounds it. Responses are cached
content-addressed so recorded dialogues replay without a live endpoint.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Sequence

import httpx

from .errors import BackendError, ExtractionError
from .language import DeterministicMatcher, MatchResult

FINAL_ANSWER_MARKER = "final answer"


@dataclass(frozen=True)
class ChatMessage:
    role: str
    text: str


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        if not self.messages:
            raise ValueError("chat request needs at least one message")
        if self.temperature != 0.0:
            raise ValueError("temperature is pinned to 0 for reproducibility")

    def body(self) -> dict:
        body = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.text} for m in self.messages],
            "temperature": self.temperature,
        }
        if self.seed is not None:
            body["seed"] = self.seed
        return body

    def cache_key(self) -> str:
        canonical = json.dumps(self.body(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: str = "stop"


@dataclass
class LlmSettings:
    endpoint: str = "http://localhost:8000/v1"
    api_key: str = ""
    model: str = "local-model"
    timeout_s: float = 30.0
    retries: int = 2
    cache_dir: Optional[Path] = None
    seed: Optional[int] = 0

    @classmethod
    def from_env(cls, **overrides) -> "LlmSettings":
        env = os.environ
        settings = cls(
            endpoint=env.get("COMMONGROUND_LLM_ENDPOINT", cls.endpoint),
            api_key=env.get("COMMONGROUND_LLM_API_KEY", ""),
            model=env.get("COMMONGROUND_LLM_MODEL", cls.model),
            timeout_s=float(env.get("COMMONGROUND_LLM_TIMEOUT", cls.timeout_s)),
            retries=int(env.get("COMMONGROUND_LLM_RETRIES", cls.retries)),
            cache_dir=(
                Path(env["COMMONGROUND_LLM_CACHE"])
                if "COMMONGROUND_LLM_CACHE" in env
                else None
            ),
        )
        for key, value in overrides.items():
            if value is not None:
                setattr(settings, key, value)
        return settings


class ChatClient:
    """Minimal client for an OpenAI-compatible /chat/completions endpoint.

    Transport failures are retried up to the configured budget; HTTP errors
    and malformed bodies are not retried. Every exchange is appended to
    ``log`` so sessions can splice it into transcripts.
    """

    def __init__(self, settings: LlmSettings, transport: Optional[httpx.BaseTransport] = None):
        self.settings = settings
        self._client = httpx.Client(
            transport=transport, timeout=settings.timeout_s
        )
        self.log: list[dict] = []

    def complete(self, request: ChatRequest) -> ChatResponse:
        cached = self._cache_read(request)
        if cached is not None:
            self.log.append({"request": request.body(), "response": cached.text, "cached": True})
            return cached
        response = self._post_with_retries(request)
        self._cache_write(request, response)
        self.log.append({"request": request.body(), "response": response.text, "cached": False})
        return response

    def _post_with_retries(self, request: ChatRequest) -> ChatResponse:
        url = self.settings.endpoint.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.settings.api_key:
            headers["Authorization"] = f"Bearer {self.settings.api_key}"
        last_exc: Optional[Exception] = None
        for attempt in range(self.settings.retries + 1):
            try:
                raw = self._client.post(url, json=request.body(), headers=headers)
            except httpx.TimeoutException as exc:
                last_exc = exc
                time.sleep(min(0.05 * (attempt + 1), 0.5))
                continue
            except httpx.HTTPError as exc:
                last_exc = exc
                time.sleep(min(0.05 * (attempt + 1), 0.5))
                continue
            if raw.status_code < 200 or raw.status_code >= 300:
                raise BackendError("http_status", f"endpoint returned {raw.status_code}")
            return self._parse_body(raw)
        raise BackendError("transport", f"endpoint unreachable after retries: {last_exc}")

    @staticmethod
    def _parse_body(raw: httpx.Response) -> ChatResponse:
        try:
            body = raw.json()
            choice = body["choices"][0]
            text = choice["message"]["content"]
            finish = choice.get("finish_reason", "stop")
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError("malformed_body", f"unexpected response body: {exc}") from exc
        if not isinstance(text, str) or not text:
            raise BackendError("malformed_body", "empty completion text")
        return ChatResponse(text=text, finish_reason=finish)

    # --- cache ------------------------------------------------------------

    def _cache_path(self, request: ChatRequest) -> Optional[Path]:
        if self.settings.cache_dir is None:
            return None
        return Path(self.settings.cache_dir) / f"{request.cache_key()}.json"

    def _cache_read(self, request: ChatRequest) -> Optional[ChatResponse]:
        path = self._cache_path(request)
        if path is None or not path.is_file():
            return None
        data = json.loads(path.read_text())
        return ChatResponse(text=data["text"], finish_reason=data.get("finish_reason", "stop"))

    def _cache_write(self, request: ChatRequest, response: ChatResponse) -> None:
        path = self._cache_path(request)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(
            json.dumps({"text": response.text, "finish_reason": response.finish_reason})
        )
        tmp.replace(path)


def chat_complete(client: ChatClient, request: ChatRequest) -> ChatResponse:
    return client.complete(request)


def extract_final_answer(text: str) -> Any:
    """Parse the first balanced JSON value after the last ``Final answer:``
    marker. Raises :class:`ExtractionError` if the marker is missing or no
    JSON value follows it."""
    lowered = text.lower()
    pos = lowered.rfind(FINAL_ANSWER_MARKER)
    if pos == -1:
        raise ExtractionError("no 'Final answer' marker in response")
    start = pos + len(FINAL_ANSWER_MARKER)
    if start < len(text) and text[start] == ":":
        start += 1
    decoder = json.JSONDecoder()
    i = start
    starts = set('{["-0123456789tfn')
    while i < len(text):
        if text[i] in starts:
            try:
                value, _ = decoder.raw_decode(text, i)
                return value
            except ValueError:
                if text[i] in "{[":
                    # a broken container swallows the rest of the response;
                    # salvaging scalars from inside it would misparse
                    raise ExtractionError(
                        "unbalanced JSON container after the final-answer marker"
                    )
                i += 1
                continue
        i += 1
    raise ExtractionError("no balanced JSON value after the final-answer marker")


def load_prompt(name: str) -> str:
    return (resources.files("commonground") / "prompts" / f"{name}.txt").read_text()


def _fill(template: str, **slots: str) -> str:
    out = template
    for key, value in slots.items():
        out = out.replace("{" + key + "}", value)
    return out


def _ask(client: ChatClient, prompt: str, retry_nudge: Optional[str] = None) -> Any:
    request = ChatRequest(
        model=client.settings.model,
        messages=(ChatMessage("user", prompt),),
        seed=client.settings.seed,
    )
    response = client.complete(request)
    try:
        return extract_final_answer(response.text)
    except ExtractionError:
        nudge = retry_nudge or (
            "Your previous reply had no parsable 'Final answer:' line. "
            "Answer again and end with 'Final answer:' followed by JSON."
        )
        retry = ChatRequest(
            model=client.settings.model,
            messages=(
                ChatMessage("user", prompt),
                ChatMessage("assistant", response.text),
                ChatMessage("user", nudge),
            ),
            seed=client.settings.seed,
        )
        second = client.complete(retry)
        try:
            return extract_final_answer(second.text)
        except ExtractionError as exc:
            raise BackendError("extraction", str(exc)) from exc


class LlmMatcher:
    """Object matcher backed by the chat endpoint.

    The model only decides whether the phrase belongs to the candidate list;
    when it says yes, the deterministic ranking picks which candidate, so the
    selected symbol stays stable across runs.
    """

    name = "llm"

    def __init__(self, client: ChatClient):
        self.client = client
        self._det = DeterministicMatcher()
        self._template = load_prompt("object_match")

    def match_object(self, phrase: str, candidates: Sequence[str], lexicon) -> MatchResult:
        if not candidates:
            return MatchResult(None, 0.0, 0)
        prompt = _fill(
            self._template,
            object_mentioned=json.dumps([phrase]),
            odb_list=json.dumps(list(candidates)),
        )
        answer = _ask(self.client, prompt)
        if not isinstance(answer, dict) or "yes" not in answer or "no" not in answer:
            raise BackendError("extraction", f"unexpected matcher answer: {answer!r}")
        if not answer["yes"]:
            return MatchResult(None, 0.0, len(candidates))
        ranked = self._det.match_object(phrase, candidates, lexicon)
        if ranked.matched is not None:
            return MatchResult(ranked.matched, 1.0, len(candidates))
        # model says yes but token overlap is empty: take the stable first
        return MatchResult(sorted(candidates)[0], 1.0, len(candidates))


class LlmQueryParser:
    """Query extraction through the chat endpoint, mirroring the
    deterministic grammar's output shape."""

    def __init__(self, client: ChatClient):
        self.client = client
        self._template = load_prompt("query_extract")

    def parse(self, text: str):
        from .language import ObjectPhrase, ParsedQuery
        from .errors import UnparseableQueryError

        answer = _ask(self.client, _fill(self._template, query=text))
        if not isinstance(answer, dict) or not answer.get("action"):
            raise UnparseableQueryError(f"no action found in {text!r}")
        obj = answer.get("object")
        phrase = None
        if isinstance(obj, dict) and obj.get("noun"):
            phrase = ObjectPhrase(
                noun=str(obj["noun"]),
                adjectives=tuple(str(a) for a in obj.get("adjectives", ())),
            )
        return ParsedQuery(str(answer["action"]), phrase, raw=text)


def paraphrase(client: ChatClient, explanation) -> str:
    """One-sentence first-person paraphrase of a rendered explanation."""
    template = load_prompt("paraphrase")
    answer = _ask(client, _fill(template, sentence=explanation.rendered))
    if isinstance(answer, str) and answer.strip():
        return answer.strip()
    raise BackendError("extraction", f"paraphrase answer was not text: {answer!r}")
