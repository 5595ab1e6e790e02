"""
提示词模块测试
请求体格式、词数截断、缓存、补全客户端重试、离线生成与描述组装
"""

import json
import sys
import tempfile
import unittest
from pathlib import Path

import pytest

# 添加项目根目录到Python路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.model.tokenizer import DescriptionKind, TextDescription
from src.prompts import (
    PROMPT_PRESETS,
    Aspect,
    DescriptionStore,
    FormatPrompt,
    PromptCache,
    PromptRequest,
    assemble_description_set,
    assemble_preset,
    cache_key,
    cap_words,
    clean_completion,
    generate,
    generate_many,
    load_cache,
    render_format_prompt,
    render_text,
)
from src.utils.errors import DescriptionError, GenerationError, PromptError, ProtocolError, TransportError
from src.utils.llm_client import RETRYABLE_STATUS, ChatCompletionClient
from src.utils.llm_config_manager import LLMConfig

GOLDEN_DIR = Path(__file__).parent / "golden"


class FakeTransport:
    """按顺序返回预设响应；元素为 (status, payload) 或异常实例"""

    def __init__(self, responses):
        self.responses = list(responses)
        self.requests = []

    async def __call__(self, url, body, headers, timeout):
        self.requests.append((url, body, headers))
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


class FakeSleep:
    def __init__(self):
        self.delays = []

    async def __call__(self, delay):
        self.delays.append(delay)


def choices_payload(*texts) -> bytes:
    return json.dumps({"choices": [{"message": {"content": t}} for t in texts]}).encode("utf-8")


def make_client(responses, **overrides):
    transport, sleep = FakeTransport(responses), FakeSleep()
    config = LLMConfig(**{"retry_attempts": 3, "retry_delays": (1.0, 2.0, 4.0), **overrides})
    return ChatCompletionClient(config, transport=transport, sleep=sleep), transport, sleep


class TestFormatPrompt(unittest.TestCase):
    """格式化提示词测试"""

    def test_request_body_matches_golden(self):
        """测试请求体字节与固定样本一致"""
        req = PromptRequest("http://localhost:8000/v1/", "llama-3-8b-instruct")
        req = req.with_messages([{"role": "user", "content": "moving left"}], n=2)
        self.assertEqual(req.to_body_bytes(), (GOLDEN_DIR / "chat_request.json").read_bytes())
        self.assertEqual(req.url, "http://localhost:8000/v1/chat/completions")

    def test_render_layout(self):
        fp = FormatPrompt("Describe.", (("jumping", "Leaving the ground."),), "moving up", Aspect.DECOMPOSITION)
        self.assertEqual(render_text(fp), "Describe.\n\njumping → Leaving the ground.\n\nmoving up")
        messages = render_format_prompt(fp)
        self.assertEqual(len(messages), 1)
        self.assertEqual(messages[0]["role"], "user")

    def test_builtin_aspects_render(self):
        for aspect in Aspect:
            text = render_text(FormatPrompt.for_aspect(aspect, "moving left"))
            self.assertTrue(text.endswith("moving left"))
            self.assertIn("76 words", text)

    def test_invalid_prompt(self):
        with self.assertRaises(PromptError):
            render_text(FormatPrompt("", (("a", "b"),), "x", Aspect.SYNONYM))
        with self.assertRaises(PromptError):
            render_text(FormatPrompt("cmd", (), "x", Aspect.SYNONYM))
        with self.assertRaises(PromptError):
            render_text(FormatPrompt("cmd", (("a", "b" * 5000),), "x", Aspect.SYNONYM))


class TestCompletionText(unittest.TestCase):
    """补全文本清洗与截断测试"""

    def test_clean(self):
        self.assertEqual(clean_completion('  "Sliding\n  left  quickly."  '), "Sliding left quickly.")

    def test_short_text_unchanged(self):
        self.assertEqual(cap_words("One two three."), "One two three.")

    def test_cut_at_sentence_boundary(self):
        first = " ".join(f"a{i}" for i in range(49)) + " end."
        second = " ".join(f"b{i}" for i in range(29)) + " end."
        self.assertEqual(cap_words(f"{first} {second}"), first)

    def test_hard_cut_long_sentence(self):
        """测试首句超长时硬截断为 76 个词"""
        text = " ".join(f"w{i}," for i in range(100))
        capped = cap_words(text)
        self.assertEqual(len(capped.split()), 76)
        self.assertTrue(capped.endswith("w75."))


class TestPromptCache(unittest.TestCase):
    """JSONL 缓存测试"""

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.path = Path(self.temp_dir.name) / "cache" / "prompts.jsonl"

    def tearDown(self):
        self.temp_dir.cleanup()

    def record(self, key, text):
        return {"key": key, "class": 1, "aspect": "synonym", "concept": "moving right",
                "text": text, "source": "generated", "params": {}, "timestamp": "2024-01-01T00:00:00"}

    def test_last_write_wins_after_reload(self):
        cache = PromptCache(str(self.path))
        cache.put(self.record("k1", "first"))
        cache.put(self.record("k1", "second"))
        cache.put(self.record("k2", "other"))
        reloaded = PromptCache(str(self.path))
        self.assertEqual(len(reloaded), 2)
        self.assertEqual(reloaded.get("k1")["text"], "second")

    def test_corrupted_lines_skipped(self):
        PromptCache(str(self.path)).put(self.record("k1", "kept"))
        with open(self.path, "a", encoding="utf-8") as f:
            f.write("{not json\n\n")
        descs = load_cache(str(self.path))
        self.assertEqual([d.text for d in descs], ["kept"])
        self.assertEqual(descs[0].kind, DescriptionKind.INTERPRETIVE)
        self.assertEqual(descs[0].aspect, "synonym")

    def test_cache_key_depends_on_index_and_params(self):
        messages = [{"role": "user", "content": "x"}]
        self.assertNotEqual(cache_key(messages, {"t": 1}, 0), cache_key(messages, {"t": 1}, 1))
        self.assertNotEqual(cache_key(messages, {"t": 1}, 0), cache_key(messages, {"t": 2}, 0))
        self.assertEqual(cache_key(messages, {"t": 1}, 0), cache_key(list(messages), {"t": 1}, 0))


class TestDescriptionStore(unittest.TestCase):
    """描述库与组装测试"""

    def setUp(self):
        self.store = DescriptionStore()
        self.store.add_label(0, "moving left")
        self.store.add(TextDescription(0, DescriptionKind.INTERPRETIVE, "Sliding leftward.", aspect="synonym"))
        self.store.add(TextDescription(0, DescriptionKind.INTERPRETIVE, "A square steps left.",
                                       aspect="decomposition"))

    def test_duplicates_rejected(self):
        self.assertFalse(self.store.add(TextDescription(0, DescriptionKind.INTERPRETIVE, "  sliding   LEFTWARD. ")))
        self.assertEqual(len(self.store), 3)

    def test_order_label_templates_interpretive(self):
        """测试组装顺序：标签、模板、解释性描述"""
        picked = assemble_description_set(self.store, [0], 4, templates=("a clip of {label}.",))[0]
        self.assertEqual([d.kind for d in picked], [DescriptionKind.LABEL, DescriptionKind.TEMPLATE,
                                                    DescriptionKind.INTERPRETIVE, DescriptionKind.INTERPRETIVE])
        self.assertEqual(picked[1].text, "a clip of moving left.")

    def test_shortfall_returns_fewer(self):
        picked = assemble_description_set(self.store, [0], 10, templates=())[0]
        self.assertEqual(len(picked), 3)

    def test_presets(self):
        self.assertEqual(len(assemble_preset(self.store, [0], 5, "label")[0]), 1)
        prefix = assemble_preset(self.store, [0], 3, "prefix_suffix")[0]
        self.assertTrue(all(d.kind != DescriptionKind.INTERPRETIVE for d in prefix))
        decomposition = assemble_preset(self.store, [0], 20, "decomposition")[0]
        self.assertEqual({d.aspect for d in decomposition if d.kind == DescriptionKind.INTERPRETIVE},
                         {"decomposition"})
        self.assertIn("body_parts", PROMPT_PRESETS)
        with self.assertRaises(DescriptionError):
            assemble_preset(self.store, [0], 2, "everything")

    def test_missing_class_and_bad_m(self):
        with self.assertRaises(DescriptionError):
            assemble_description_set(self.store, [0, 1], 2)
        with self.assertRaises(DescriptionError):
            assemble_description_set(self.store, [0], 0)

    def test_save_load(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = str(Path(tmp) / "store.json")
            self.store.save(path)
            loaded = DescriptionStore.load(path)
        self.assertEqual(loaded.to_dict(), self.store.to_dict())


# ---------------------------------------------------------------------------
# 补全客户端（异步，注入传输层）
# ---------------------------------------------------------------------------

async def test_client_retries_then_succeeds():
    client, transport, sleep = make_client([(503, b""), (429, b""), (200, choices_payload("ok"))])
    async with client:
        assert await client.complete("http://x/chat/completions", b"{}") == ["ok"]
    assert client.calls == 3
    assert sleep.delays == [1.0, 2.0]
    assert transport.requests[0][2]["Content-Type"] == "application/json"


@pytest.mark.parametrize("status", sorted(RETRYABLE_STATUS))
async def test_client_retryable_status_exhausts(status):
    client, _, sleep = make_client([(status, b"busy")] * 4)
    with pytest.raises(TransportError):
        await client.post("http://x", b"{}")
    assert client.calls == 4
    assert sleep.delays == [1.0, 2.0, 4.0]


async def test_client_non_retryable_status_fails_fast():
    client, _, sleep = make_client([(401, b"denied")])
    with pytest.raises(TransportError):
        await client.post("http://x", b"{}")
    assert client.calls == 1
    assert sleep.delays == []


async def test_client_connection_error_retried():
    client, _, _ = make_client([ConnectionError("reset"), (200, choices_payload("a", "b"))])
    assert await client.complete("http://x", b"{}") == ["a", "b"]


async def test_client_bearer_header():
    client, transport, _ = make_client([(200, choices_payload("a"))], api_key="sk-test")
    await client.post("http://x", b"{}")
    assert transport.requests[0][2]["Authorization"] == "Bearer sk-test"


async def test_client_malformed_payload():
    client, _, _ = make_client([(200, b"<html>")])
    with pytest.raises(ProtocolError):
        await client.complete("http://x", b"{}")
    with pytest.raises(ProtocolError):
        ChatCompletionClient.parse_choices(b'{"choices": [{"text": "legacy"}]}')


# ---------------------------------------------------------------------------
# 解释性描述生成
# ---------------------------------------------------------------------------

def request_template():
    return PromptRequest("http://localhost:8000/v1", "llama-3-8b-instruct")


async def test_generate_online_then_cached(tmp_path):
    cache = PromptCache(str(tmp_path / "cache.jsonl"))
    long_text = " ".join(f"w{i}" for i in range(90))
    client, transport, _ = make_client([(200, choices_payload(' "Drifting left." ', long_text))])
    descs = await generate("moving left", Aspect.SYNONYM, 2, request_template(), cache,
                           class_id=0, client=client, clock=lambda: "2024-01-01T00:00:00")
    assert [d.text for d in descs][0] == "Drifting left."
    assert len(descs[1].text.split()) == 76
    body = json.loads(transport.requests[0][1])
    assert body["n"] == 2
    assert list(body) == ["model", "messages", "temperature", "top_p", "n", "max_tokens"]

    # 第二次全部命中缓存，不再发请求
    again = await generate("moving left", Aspect.SYNONYM, 2, request_template(), PromptCache(str(tmp_path / "cache.jsonl")),
                           class_id=0, client=client)
    assert [d.text for d in again] == [d.text for d in descs]
    assert client.calls == 1
    print("✅ 缓存命中后不再调用补全接口")


async def test_generate_requests_only_missing(tmp_path):
    cache = PromptCache(str(tmp_path / "cache.jsonl"))
    client, transport, _ = make_client([(200, choices_payload("one")), (200, choices_payload("two"))])
    await generate("moving up", Aspect.SYNONYM, 1, request_template(), cache, client=client)
    descs = await generate("moving up", Aspect.SYNONYM, 2, request_template(), cache, client=client)
    assert json.loads(transport.requests[1][1])["n"] == 1
    assert [d.text for d in descs] == ["one", "two"]


async def test_generate_offline_uses_fixtures():
    cache = PromptCache()
    descs = await generate("moving left", Aspect.DECOMPOSITION, 3, request_template(), cache, offline=True)
    # 相同样例去重后只剩一条
    assert len(descs) == 1
    assert descs[0].source == "manual"
    example = await generate("abseiling", Aspect.DECOMPOSITION, 1, request_template(), cache, offline=True)
    assert example[0].source == "fixture"
    with pytest.raises(GenerationError):
        await generate("juggling", Aspect.BODY_PARTS, 1, request_template(), cache, offline=True)


async def test_generate_errors():
    cache = PromptCache()
    with pytest.raises(GenerationError):
        await generate("moving left", Aspect.SYNONYM, 0, request_template(), cache)
    with pytest.raises(GenerationError):
        await generate("moving left", Aspect.SYNONYM, 1, request_template(), cache)
    client, _, _ = make_client([(200, choices_payload("only one"))])
    with pytest.raises(GenerationError):
        await generate("moving left", Aspect.SYNONYM, 2, request_template(), cache, client=client)
    client, _, _ = make_client([(200, choices_payload('  ""  '))])
    with pytest.raises(GenerationError):
        await generate("moving down", Aspect.SYNONYM, 1, request_template(), cache, client=client)


async def test_generate_many_offline():
    concepts = [(0, "moving left"), (1, "moving right")]
    result = await generate_many(concepts, Aspect.SYNONYM, 1, request_template(), PromptCache(), offline=True)
    assert sorted(result) == [0, 1]
    assert result[1][0].class_id == 1
    assert "right" in result[1][0].text


if __name__ == '__main__':
    unittest.main()
