"""
提示词模块
格式化提示词、补全请求、解释性描述生成与描述库
"""

from .description_store import PROMPT_PRESETS, DescriptionStore, assemble_description_set, assemble_preset
from .format_prompt import FormatPrompt, PromptRequest, render_format_prompt, render_text
from .interpretive_prompts import LABEL_TEMPLATES, WORD_LIMIT, Aspect, get_command, get_examples, get_fixture
from .prompt_generator import PromptCache, cache_key, cap_words, clean_completion, generate, generate_many, load_cache

__all__ = [
    "PROMPT_PRESETS",
    "DescriptionStore",
    "assemble_description_set",
    "assemble_preset",
    "FormatPrompt",
    "PromptRequest",
    "render_format_prompt",
    "render_text",
    "LABEL_TEMPLATES",
    "WORD_LIMIT",
    "Aspect",
    "get_command",
    "get_examples",
    "get_fixture",
    "PromptCache",
    "cache_key",
    "cap_words",
    "clean_completion",
    "generate",
    "generate_many",
    "load_cache",
]
