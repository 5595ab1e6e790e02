"""
玩具分词器与文本描述
小写化、按非字母数字切分；id 0 为 pad，id 1 为 unk
"""

import hashlib
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import DescriptionError

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

_WORD = re.compile(r"[a-z0-9]+")


def split_words(text: str) -> List[str]:
    return _WORD.findall(text.lower())


def normalize_text(text: str) -> str:
    """小写并折叠空白，用于去重"""
    return " ".join(text.lower().split())


class DescriptionKind(str, Enum):
    LABEL = "label"
    TEMPLATE = "template"
    INTERPRETIVE = "interpretive"


@dataclass(frozen=True)
class TextDescription:
    """某个类别的一条文本描述"""
    class_id: int
    kind: DescriptionKind
    text: str
    token_ids: Tuple[int, ...] = ()
    aspect: Optional[str] = None
    source: str = "manual"
    created: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", DescriptionKind(self.kind))
        if not self.text.strip():
            raise DescriptionError(f"类别 {self.class_id} 的描述为空")

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(normalize_text(self.text).encode("utf-8")).hexdigest()

    def tokenized(self, tokenizer: "Tokenizer", max_len: int) -> "TextDescription":
        return replace(self, token_ids=tuple(int(i) for i in tokenizer.encode(self.text, max_len)))


class Tokenizer:
    """基于训练文本构建的词表"""

    def __init__(self, vocab: Sequence[str]):
        vocab = list(vocab)
        if vocab[:2] != [PAD_TOKEN, UNK_TOKEN]:
            vocab = [PAD_TOKEN, UNK_TOKEN] + [w for w in vocab if w not in (PAD_TOKEN, UNK_TOKEN)]
        self.vocab = vocab
        self._index = {word: i for i, word in enumerate(vocab)}

    @classmethod
    def build(cls, texts: Iterable[str]) -> "Tokenizer":
        words = sorted({w for text in texts for w in split_words(text)})
        return cls(words)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def encode(self, text: str, max_len: int) -> np.ndarray:
        """截断到 max_len 并右侧补 pad"""
        words = split_words(text)
        if not words:
            raise DescriptionError(f"描述不含任何词: {text!r}")
        ids = [self._index.get(w, UNK_ID) for w in words][:max_len]
        out = np.full(max_len, PAD_ID, dtype=np.int64)
        out[:len(ids)] = ids
        return out

    def encode_batch(self, texts: Sequence[str], max_len: int) -> np.ndarray:
        return np.stack([self.encode(t, max_len) for t in texts])

    def decode(self, ids: Sequence[int]) -> str:
        return " ".join(self.vocab[i] for i in ids if i != PAD_ID)
