import json

import httpx
import pytest

from commonground.errors import BackendError, ExtractionError
from commonground.language import DeterministicMatcher
from commonground.lexicon import Lexicon
from commonground.llm import (
    ChatClient,
    ChatMessage,
    ChatRequest,
    LlmMatcher,
    LlmSettings,
    extract_final_answer,
)

FIG5_STYLE_ANSWER = (
    'Thought: The object is "blue-ish vase". A possible match is '
    '"vase_dark_blue". I will assign "blue-ish vase" in the "yes" category.\n'
    'Final answer: {"no": [], "yes": ["blue-ish vase"]}'
)


def _completion_body(text):
    return {
        "choices": [{"message": {"role": "assistant", "content": text}, "finish_reason": "stop"}]
    }


def _client(handler, retries=2, cache_dir=None):
    settings = LlmSettings(
        endpoint="http://llm.test/v1", model="test-model", retries=retries,
        cache_dir=cache_dir, timeout_s=1.0,
    )
    return ChatClient(settings, transport=httpx.MockTransport(handler))


def _request(text="hello"):
    return ChatRequest(model="test-model", messages=(ChatMessage("user", text),))


class TestChatComplete:
    def test_ok_roundtrip(self):
        def handler(request):
            assert request.url.path.endswith("/chat/completions")
            body = json.loads(request.content)
            assert body["temperature"] == 0
            return httpx.Response(200, json=_completion_body("Final answer: true"))

        response = _client(handler).complete(_request())
        assert "Final answer" in response.text

    def test_retries_then_succeeds(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            if calls["n"] < 3:
                raise httpx.ConnectError("down", request=request)
            return httpx.Response(200, json=_completion_body("ok"))

        response = _client(handler, retries=2).complete(_request())
        assert response.text == "ok"
        assert calls["n"] == 3

    def test_transport_failure_after_budget(self):
        def handler(request):
            raise httpx.ConnectTimeout("down", request=request)

        with pytest.raises(BackendError) as err:
            _client(handler, retries=1).complete(_request())
        assert err.value.category == "transport"

    def test_http_error_is_not_retried(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(500, json={"error": "boom"})

        with pytest.raises(BackendError) as err:
            _client(handler).complete(_request())
        assert err.value.category == "http_status"
        assert calls["n"] == 1

    def test_malformed_body(self):
        def handler(request):
            return httpx.Response(200, json={"choices": []})

        with pytest.raises(BackendError) as err:
            _client(handler).complete(_request())
        assert err.value.category == "malformed_body"

    def test_empty_content_is_malformed(self):
        def handler(request):
            return httpx.Response(200, json=_completion_body(""))

        with pytest.raises(BackendError):
            _client(handler).complete(_request())

    def test_cache_replays_without_transport(self, tmp_path):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(200, json=_completion_body("cached answer"))

        client = _client(handler, cache_dir=tmp_path)
        first = client.complete(_request("same"))
        second = client.complete(_request("same"))
        assert first.text == second.text == "cached answer"
        assert calls["n"] == 1
        assert client.log[-1]["cached"] is True

    def test_temperature_is_pinned(self):
        with pytest.raises(ValueError):
            ChatRequest(model="m", messages=(ChatMessage("user", "x"),), temperature=0.7)
        with pytest.raises(ValueError):
            ChatRequest(model="m", messages=())


class TestExtractFinalAnswer:
    def test_object_payload(self):
        value = extract_final_answer(FIG5_STYLE_ANSWER)
        assert value == {"no": [], "yes": ["blue-ish vase"]}

    def test_marker_absent(self):
        with pytest.raises(ExtractionError):
            extract_final_answer("Thought: I am still thinking.")

    def test_trailing_prose_after_json(self):
        text = 'Final answer: {"yes": ["x"], "no": []} and that is my answer.'
        assert extract_final_answer(text) == {"yes": ["x"], "no": []}

    def test_nested_braces(self):
        text = 'Final answer: {"a": {"b": [1, {"c": 2}]}} trailing'
        assert extract_final_answer(text) == {"a": {"b": [1, {"c": 2}]}}

    def test_last_marker_wins(self):
        text = (
            'Final answer: {"yes": []}\nOn reflection...\n'
            'Final answer: {"yes": ["better"]}'
        )
        assert extract_final_answer(text) == {"yes": ["better"]}

    def test_scalar_answers(self):
        assert extract_final_answer("Final answer: true") is True
        assert extract_final_answer('Final answer: "a sentence"') == "a sentence"
        assert extract_final_answer("final answer: 42") == 42

    def test_unbalanced_json_is_extraction_error(self):
        with pytest.raises(ExtractionError):
            extract_final_answer('Final answer: {"yes": [')


class TestLlmMatcher:
    def test_parses_canned_answer_to_same_decision_as_det(self):
        def handler(request):
            return httpx.Response(200, json=_completion_body(FIG5_STYLE_ANSWER))

        lexicon = Lexicon()
        candidates = ["vase_dark_blue", "yellow_banana"]
        llm_result = LlmMatcher(_client(handler)).match_object(
            "blueish vase", candidates, lexicon
        )
        det_result = DeterministicMatcher().match_object(
            "blueish vase", candidates, lexicon
        )
        assert llm_result.matched == det_result.matched == "vase_dark_blue"

    def test_no_answer_means_no_match(self):
        def handler(request):
            return httpx.Response(
                200, json=_completion_body('Final answer: {"no": ["pineapple"], "yes": []}')
            )

        result = LlmMatcher(_client(handler)).match_object(
            "pineapple", ["mug_green"], Lexicon()
        )
        assert result.matched is None

    def test_reprompts_once_on_missing_marker(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            if calls["n"] == 1:
                return httpx.Response(200, json=_completion_body("no marker here"))
            return httpx.Response(
                200, json=_completion_body('Final answer: {"no": [], "yes": ["mug"]}')
            )

        result = LlmMatcher(_client(handler)).match_object("mug", ["mug_green"], Lexicon())
        assert result.matched == "mug_green"
        assert calls["n"] == 2

    def test_extraction_failure_after_retry_is_backend_error(self):
        def handler(request):
            return httpx.Response(200, json=_completion_body("never a marker"))

        with pytest.raises(BackendError) as err:
            LlmMatcher(_client(handler)).match_object("mug", ["mug_green"], Lexicon())
        assert err.value.category == "extraction"
