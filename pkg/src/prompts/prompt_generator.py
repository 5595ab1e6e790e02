"""
解释性提示词生成器
格式化提示词 -> chat/completions -> 清洗、去重、截断 -> JSONL 缓存
离线模式只使用缓存与内置样例，不发起任何网络请求
"""

import asyncio
import hashlib
import json
import logging
import re
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from ..model.tokenizer import DescriptionKind, TextDescription, normalize_text
from ..utils.errors import GenerationError
from ..utils.llm_client import ChatCompletionClient
from .format_prompt import FormatPrompt, PromptRequest, render_format_prompt
from .interpretive_prompts import WORD_LIMIT, Aspect, get_fixture

logger = logging.getLogger(__name__)

_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


def clean_completion(text: str) -> str:
    """去掉首尾空白与引号，折叠内部空白"""
    text = " ".join(text.split())
    return text.strip().strip('"').strip()


def cap_words(text: str, limit: int = WORD_LIMIT) -> str:
    """超过 limit 个词时在句子边界截断；首句本身超长则硬截断"""
    if len(text.split()) <= limit:
        return text
    kept: List[str] = []
    count = 0
    for sentence in _SENTENCE_END.split(text):
        n = len(sentence.split())
        if count + n > limit:
            break
        kept.append(sentence)
        count += n
    if kept:
        return " ".join(kept)
    return " ".join(text.split()[:limit]).rstrip(",;:") + "."


def cache_key(messages: Sequence[Dict[str, str]], params: Dict[str, Any], index: int) -> str:
    payload = json.dumps({"messages": list(messages), "params": params, "index": index},
                         ensure_ascii=False, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class PromptCache:
    """追加写入的 JSONL 缓存；相同 key 以最后一次写入为准"""

    def __init__(self, path: Optional[str] = None):
        self.path = Path(path) if path else None
        self._records: Dict[str, Dict[str, Any]] = {}
        if self.path and self.path.exists():
            self._load()

    def _load(self):
        with open(self.path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    self._records[record["key"]] = record
                except (ValueError, KeyError) as e:
                    logger.warning(f"⚠️ 跳过损坏的缓存行 {self.path}:{line_no}: {e}")
        logger.info(f"📂 已加载提示词缓存: {self.path} ({len(self._records)} 条)")

    def get(self, key: str) -> Optional[Dict[str, Any]]:
        return self._records.get(key)

    def put(self, record: Dict[str, Any]):
        self._records[record["key"]] = record
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")

    def records(self) -> List[Dict[str, Any]]:
        return list(self._records.values())

    def __len__(self) -> int:
        return len(self._records)


def _record_to_description(record: Dict[str, Any]) -> TextDescription:
    return TextDescription(int(record["class"]), DescriptionKind.INTERPRETIVE, record["text"],
                           aspect=record["aspect"], source=record.get("source", "generated"),
                           created=record.get("timestamp", ""))


def load_cache(path: str) -> List[TextDescription]:
    """缓存文件中的全部描述（按 key 去重后）"""
    return [_record_to_description(r) for r in PromptCache(path).records()]


async def generate(concept: str, aspect: Aspect, count: int, request: PromptRequest, cache: PromptCache,
                   class_id: int = 0, client: Optional[ChatCompletionClient] = None, offline: bool = False,
                   clock: Callable[[], str] = lambda: datetime.now().isoformat(timespec="seconds")
                   ) -> List[TextDescription]:
    """
    为一个动作概念生成 count 条解释性描述

    Args:
        concept: 动作概念，如 "moving left"
        aspect: 设计角度
        count: 需要的条数（去重前）
        request: 请求模板（端点、模型、采样参数）
        cache: 提示词缓存
        class_id: 写入描述的类别编号
        client: 补全客户端，离线模式下忽略
        offline: True 时只用缓存与内置样例

    Returns:
        List[TextDescription]: 去重后的描述，按生成序号排列

    Raises:
        GenerationError: 离线样例缺失、补全为空或数量不足
    """
    if count < 1:
        raise GenerationError(f"生成数量必须 >= 1，得到 {count}")
    aspect = Aspect(aspect)
    messages = render_format_prompt(FormatPrompt.for_aspect(aspect, concept))
    params = request.sampling_params()
    keys = [cache_key(messages, params, i) for i in range(count)]

    records: Dict[int, Dict[str, Any]] = {}
    for i, key in enumerate(keys):
        hit = cache.get(key)
        if hit is not None:
            records[i] = hit
    missing = [i for i in range(count) if i not in records]
    if records:
        logger.info(f"🎯 缓存命中 {len(records)}/{count}: {concept} [{aspect.value}]")

    if missing:
        if offline:
            fixture = get_fixture(aspect, concept)
            if fixture is None:
                raise GenerationError(f"离线模式下没有 {concept!r} [{aspect.value}] 的样例")
            completions = [fixture] * len(missing)
        else:
            if client is None:
                raise GenerationError("在线生成需要补全客户端")
            req = request.with_messages(messages, n=len(missing))
            choices = await client.complete(req.url, req.to_body_bytes())
            if len(choices) < len(missing):
                raise GenerationError(f"补全只返回 {len(choices)} 条，需要 {len(missing)} 条")
            completions = []
            for choice in choices[:len(missing)]:
                text = cap_words(clean_completion(choice))
                if not text:
                    raise GenerationError(f"{concept!r} 的补全为空")
                completions.append((text, "generated"))

        timestamp = clock()
        for i, (text, source) in zip(missing, completions):
            record = {"key": keys[i], "class": class_id, "aspect": aspect.value, "concept": concept,
                      "text": text, "source": source, "params": params, "timestamp": timestamp}
            cache.put(record)
            records[i] = record

    out: List[TextDescription] = []
    seen = set()
    for i in range(count):
        desc = _record_to_description(records[i])
        key = normalize_text(desc.text)
        if key in seen:
            continue
        seen.add(key)
        out.append(desc)
    if len(out) < count:
        logger.warning(f"⚠️ {concept} [{aspect.value}] 去重后剩余 {len(out)}/{count} 条")
    return out


async def generate_many(concepts: Sequence[Tuple[int, str]], aspect: Aspect, count: int,
                        request: PromptRequest, cache: PromptCache,
                        client: Optional[ChatCompletionClient] = None, offline: bool = False,
                        max_in_flight: int = 4) -> Dict[int, List[TextDescription]]:
    """多个概念并发生成，同时在途请求数不超过 max_in_flight"""
    semaphore = asyncio.Semaphore(max(1, max_in_flight))

    async def one(class_id: int, concept: str) -> Tuple[int, List[TextDescription]]:
        async with semaphore:
            return class_id, await generate(concept, aspect, count, request, cache,
                                            class_id=class_id, client=client, offline=offline)

    results = await asyncio.gather(*(one(k, c) for k, c in concepts))
    logger.info(f"✅ 解释性描述生成完成: {len(results)} 个概念")
    return dict(results)
