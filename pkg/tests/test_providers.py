"""Provider layer: mock determinism, conversion/refinement flows, judges,
retry budget, and credential hygiene."""

import pytest

from conftest import make_png
from f2m import prompts
from f2m.mermaid import Tier
from f2m.providers import (ConvertRequest, InvalidOutput, JudgeRequest,
                           MalformedJudgeOutput, MockProvider, ProviderConfig,
                           ProviderUnreachable, RefineRequest,
                           UnsupportedImageType, config_for_model,
                           convert_image, get_client, judge_structural,
                           judge_symbolic, provider_name_for_model,
                           refine_code, request_digest)

PNG = make_png((1, 2, 3))


def mock_cfg(tmp_path, retries=0) -> ProviderConfig:
    return ProviderConfig("mock", "mock", base_url=str(tmp_path),
                          max_retries=retries)


class TestMockProvider:
    def test_digest_is_stable_and_content_keyed(self):
        a = request_digest(ConvertRequest(PNG, "image/png"))
        b = request_digest(ConvertRequest(PNG, "image/png"))
        c = request_digest(ConvertRequest(make_png((9, 9, 9)), "image/png"))
        assert a == b and a != c
        assert request_digest(RefineRequest("x", "y")) != request_digest(
            JudgeRequest("x\x00y"))

    def test_fixture_replay(self, tmp_path):
        mock = MockProvider(tmp_path)
        req = ConvertRequest(PNG, "image/png")
        mock.record(req, "flowchart TD\nA[Start] --> B[End]")
        first = mock.complete(req)
        second = mock.complete(req)
        assert first.text == second.text == "flowchart TD\nA[Start] --> B[End]"
        assert first.provider == "mock"

    def test_defaults_without_fixture(self, tmp_path):
        mock = MockProvider(tmp_path)
        assert mock.complete(ConvertRequest(PNG, "image/png")).text == \
            MockProvider.DEFAULT_CONVERT
        assert mock.complete(RefineRequest("flowchart TD\nA", "x")).text == \
            "flowchart TD\nA"
        sym = prompts.load(prompts.JUDGE_SYMBOLIC_PROMPT_VERSION)
        struct = prompts.load(prompts.JUDGE_STRUCTURAL_PROMPT_VERSION)
        assert mock.complete(JudgeRequest(sym)).text == \
            MockProvider.DEFAULT_JUDGE_SYMBOLIC
        assert mock.complete(JudgeRequest(struct)).text == \
            MockProvider.DEFAULT_JUDGE_STRUCTURAL


class TestConvertImage:
    def test_fixture_pipeline(self, tmp_path):
        cfg = mock_cfg(tmp_path)
        MockProvider(tmp_path).record(ConvertRequest(PNG, "image/png"),
                                      "flowchart TD\nA[Start] --> B[End]")
        result = convert_image(cfg, PNG, "image/png")
        assert result.code == "flowchart TD\nA[Start] --> B[End]"
        assert result.tier is Tier.VALID

    def test_fences_stripped_before_validation(self, tmp_path):
        cfg = mock_cfg(tmp_path)
        MockProvider(tmp_path).record(ConvertRequest(PNG, "image/png"),
                                      "```mermaid\nflowchart TD\nA-->B\n```")
        result = convert_image(cfg, PNG, "image/png")
        assert result.code == "flowchart TD\nA-->B"
        assert result.tier is Tier.VALID

    def test_headerless_reply_comes_back_repaired(self, tmp_path):
        cfg = mock_cfg(tmp_path)
        MockProvider(tmp_path).record(ConvertRequest(PNG, "image/png"),
                                      "A[Start] --> B[End]")
        result = convert_image(cfg, PNG, "image/png")
        assert result.tier is Tier.REPAIRED
        assert result.code.startswith("flowchart TD\n")

    def test_prose_reply_exhausts_retries(self, tmp_path):
        cfg = mock_cfg(tmp_path, retries=2)
        MockProvider(tmp_path).record(ConvertRequest(PNG, "image/png"),
                                      "Sorry, I cannot help.")
        with pytest.raises(InvalidOutput, match="3 attempt"):
            convert_image(cfg, PNG, "image/png")

    def test_unsupported_media_type(self, tmp_path):
        with pytest.raises(UnsupportedImageType):
            convert_image(mock_cfg(tmp_path), b"GIF89a", "image/gif")

    def test_raw_reply_captured_verbatim(self, tmp_path):
        cfg = mock_cfg(tmp_path)
        raw = "```mermaid\nflowchart TD\nA-->B\n```"
        MockProvider(tmp_path).record(ConvertRequest(PNG, "image/png"), raw)
        assert convert_image(cfg, PNG, "image/png").raw == raw


class TestRefineCode:
    CODE = "flowchart TD\nA[Start]\nB[Review]"

    def test_successful_refinement(self, tmp_path):
        cfg = mock_cfg(tmp_path)
        MockProvider(tmp_path).record(
            RefineRequest(self.CODE, "connect start to review"),
            self.CODE + "\nA --> B")
        result = refine_code(cfg, self.CODE, "connect start to review")
        assert result.warning is None
        assert "A --> B" in result.code

    def test_garbage_reply_returns_original_with_warning(self, tmp_path):
        cfg = mock_cfg(tmp_path)
        MockProvider(tmp_path).record(RefineRequest(self.CODE, "do magic"),
                                      "I would rather not.")
        result = refine_code(cfg, self.CODE, "do magic")
        assert result.code == self.CODE
        assert result.warning is not None

    def test_empty_instruction_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            refine_code(mock_cfg(tmp_path), self.CODE, "  ")

    def test_default_mock_echo_keeps_code(self, tmp_path):
        result = refine_code(mock_cfg(tmp_path), self.CODE, "anything")
        assert result.code == self.CODE and result.warning is None


class TestJudges:
    def test_symbolic_fixture(self, tmp_path):
        cfg = mock_cfg(tmp_path)
        prompt = prompts.fill(prompts.load(prompts.JUDGE_SYMBOLIC_PROMPT_VERSION),
                              pred="p", gold="g")
        MockProvider(tmp_path).record(JudgeRequest(prompt),
                                      "0.857,0.750,0.800,0.900,0.818,0.857")
        assert judge_symbolic(cfg, "p", "g") == "0.857,0.750,0.800,0.900,0.818,0.857"

    def test_structural_default_is_all_max(self, tmp_path):
        assert judge_structural(mock_cfg(tmp_path), "p", "g") == "5,5,2,5,3"

    def test_multiline_reply_rejected(self, tmp_path):
        cfg = mock_cfg(tmp_path)
        prompt = prompts.fill(prompts.load(prompts.JUDGE_SYMBOLIC_PROMPT_VERSION),
                              pred="p", gold="g")
        MockProvider(tmp_path).record(JudgeRequest(prompt), "line one\nline two")
        with pytest.raises(MalformedJudgeOutput):
            judge_symbolic(cfg, "p", "g")

    def test_empty_inputs_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            judge_symbolic(mock_cfg(tmp_path), "", "g")

    def test_reply_whitespace_stripped(self, tmp_path):
        cfg = mock_cfg(tmp_path)
        prompt = prompts.fill(prompts.load(prompts.JUDGE_STRUCTURAL_PROMPT_VERSION),
                              pred="p", gold="g")
        MockProvider(tmp_path).record(JudgeRequest(prompt), "  5,5,2,5,3  \n")
        assert judge_structural(cfg, "p", "g") == "5,5,2,5,3"


class TestConfig:
    def test_provider_dialect_selection(self):
        assert provider_name_for_model("mock") == "mock"
        assert provider_name_for_model("gemini-2.5-flash") == "gemini"
        assert provider_name_for_model("gpt-4.1") == "openai"
        assert provider_name_for_model("gpt-4o-mini") == "openai"

    def test_env_resolution(self, monkeypatch, tmp_path):
        monkeypatch.setenv("F2M_OPENAI_API_KEY", "sk-secret-123")
        monkeypatch.setenv("F2M_PROVIDER_BASE_URL_OPENAI", "http://localhost:1")
        cfg = config_for_model("gpt-4.1")
        assert cfg.api_key == "sk-secret-123"
        assert cfg.base_url == "http://localhost:1"
        monkeypatch.setenv("F2M_MOCK_FIXTURES", str(tmp_path))
        assert config_for_model("mock").base_url == str(tmp_path)

    def test_credential_never_in_repr(self):
        cfg = ProviderConfig("openai", "gpt-4.1", api_key="sk-super-secret")
        assert "sk-super-secret" not in repr(cfg)
        assert "sk-super-secret" not in str(cfg)

    def test_missing_credential_is_unreachable_without_leak(self):
        cfg = ProviderConfig("openai", "gpt-4.1",
                             base_url="http://localhost:1", api_key=None)
        with pytest.raises(ProviderUnreachable):
            get_client(cfg).complete(JudgeRequest("x"))

    def test_request_failure_does_not_leak_credential(self):
        cfg = ProviderConfig("openai", "gpt-4.1",
                             base_url="http://127.0.0.1:9",  # nothing listens
                             api_key="sk-super-secret", timeout=0.2)
        with pytest.raises(ProviderUnreachable) as exc:
            get_client(cfg).complete(JudgeRequest("x"))
        assert "sk-super-secret" not in str(exc.value)

    def test_validation(self):
        with pytest.raises(ValueError):
            ProviderConfig("mock", "mock", timeout=0)
        with pytest.raises(ValueError):
            ProviderConfig("mock", "mock", max_retries=-1)


class TestDeterministicDecoding:
    def test_openai_payload_pins_temperature_zero(self, tmp_path):
        from f2m.providers import GeminiClient, OpenAIChatClient
        cfg = ProviderConfig("openai", "gpt-4.1", base_url="http://x", api_key="k")
        for req in (ConvertRequest(PNG, "image/png"),
                    RefineRequest("flowchart TD\nA", "do it"),
                    JudgeRequest("score this")):
            assert OpenAIChatClient(cfg).build_payload(req)["temperature"] == 0
        gcfg = ProviderConfig("gemini", "gemini-2.5-flash", base_url="http://x",
                              api_key="k")
        for req in (ConvertRequest(PNG, "image/png"), JudgeRequest("score")):
            payload = GeminiClient(gcfg).build_payload(req)
            assert payload["generationConfig"]["temperature"] == 0

    def test_image_rides_base64_inline(self):
        import base64
        from f2m.providers import GeminiClient, OpenAIChatClient
        cfg = ProviderConfig("openai", "gpt-4.1", base_url="http://x", api_key="k")
        payload = OpenAIChatClient(cfg).build_payload(ConvertRequest(PNG, "image/png"))
        image_part = payload["messages"][1]["content"][0]
        assert image_part["image_url"]["url"].startswith("data:image/png;base64,")
        gcfg = ProviderConfig("gemini", "g", base_url="http://x", api_key="k")
        parts = GeminiClient(gcfg).build_payload(
            ConvertRequest(PNG, "image/png"))["contents"][0]["parts"]
        assert parts[1]["inline_data"]["data"] == base64.b64encode(PNG).decode()


class TestRetryBudget:
    def test_unreachable_retried_with_backoff(self, tmp_path):
        sleeps = []
        cfg = ProviderConfig("openai", "gpt-4.1",
                             base_url="http://127.0.0.1:9", api_key="k",
                             timeout=0.2, max_retries=2)
        with pytest.raises(ProviderUnreachable):
            convert_image(cfg, PNG, "image/png", sleep=sleeps.append)
        assert sleeps == [0.5, 1.0]  # 1 + max_retries attempts total

    def test_mock_never_sleeps_on_bad_output(self, tmp_path):
        sleeps = []
        cfg = mock_cfg(tmp_path, retries=3)
        MockProvider(tmp_path).record(ConvertRequest(PNG, "image/png"), "nope")
        with pytest.raises(InvalidOutput):
            convert_image(cfg, PNG, "image/png", sleep=sleeps.append)
        assert sleeps == []
