"""
格式化提示词与补全请求
格式 = 指令 + 示例（概念 → 解释）+ 目标概念，渲染为单条 user 消息
"""

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

from ..utils.errors import PromptError
from .interpretive_prompts import Aspect, get_command, get_examples

MAX_RENDERED_CHARS = 4096
DEFAULT_TEMPERATURE = 0.90
DEFAULT_TOP_P = 0.95
DEFAULT_MAX_TOKENS = 160


@dataclass(frozen=True)
class FormatPrompt:
    command: str
    examples: Tuple[Tuple[str, str], ...]
    concept: str
    aspect: Aspect

    def __post_init__(self):
        object.__setattr__(self, "aspect", Aspect(self.aspect))
        object.__setattr__(self, "examples", tuple(tuple(e) for e in self.examples))

    def validate(self):
        if not self.command.strip():
            raise PromptError("指令文本为空")
        if not self.examples:
            raise PromptError("至少需要一个示例")
        if not self.concept.strip():
            raise PromptError("目标概念为空")

    @classmethod
    def for_aspect(cls, aspect: Aspect, concept: str) -> "FormatPrompt":
        return cls(get_command(aspect), tuple(get_examples(aspect)), concept, aspect)


def render_text(fp: FormatPrompt) -> str:
    fp.validate()
    example_lines = "\n".join(f"{concept} → {interpretation}" for concept, interpretation in fp.examples)
    text = f"{fp.command}\n\n{example_lines}\n\n{fp.concept}"
    if len(text) > MAX_RENDERED_CHARS:
        raise PromptError(f"渲染后的提示词长度 {len(text)} 超过 {MAX_RENDERED_CHARS}")
    return text


def render_format_prompt(fp: FormatPrompt) -> List[Dict[str, str]]:
    """单条 user 消息，无 system 消息"""
    return [{"role": "user", "content": render_text(fp)}]


@dataclass(frozen=True)
class PromptRequest:
    """OpenAI 兼容的 chat/completions 请求"""
    endpoint: str
    model: str
    messages: Tuple[Dict[str, str], ...] = field(default_factory=tuple)
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    max_tokens: int = DEFAULT_MAX_TOKENS
    n: int = 1

    @property
    def url(self) -> str:
        return f"{self.endpoint.rstrip('/')}/chat/completions"

    def with_messages(self, messages: Sequence[Dict[str, str]], n: int) -> "PromptRequest":
        return PromptRequest(self.endpoint, self.model, tuple(dict(m) for m in messages),
                             self.temperature, self.top_p, self.max_tokens, n)

    def to_body(self) -> Dict[str, Any]:
        """字段顺序固定：model, messages, temperature, top_p, n, max_tokens"""
        return {
            "model": self.model,
            "messages": [dict(m) for m in self.messages],
            "temperature": self.temperature,
            "top_p": self.top_p,
            "n": self.n,
            "max_tokens": self.max_tokens,
        }

    def to_body_bytes(self) -> bytes:
        return json.dumps(self.to_body(), ensure_ascii=False, separators=(",", ":")).encode("utf-8")

    def sampling_params(self) -> Dict[str, Any]:
        return {"model": self.model, "temperature": self.temperature,
                "top_p": self.top_p, "max_tokens": self.max_tokens}
