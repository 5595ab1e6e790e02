"""
描述库
按类别保存标签、模板与解释性描述；按固定顺序组装每类 M 条描述
"""

import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from ..model.tokenizer import DescriptionKind, TextDescription, normalize_text
from ..utils.errors import DescriptionError
from .interpretive_prompts import LABEL_TEMPLATES, Aspect, fill_template

logger = logging.getLogger(__name__)

# 预设：模板列表 + 允许的解释角度
PROMPT_PRESETS: Dict[str, Dict[str, tuple]] = {
    "label": {"templates": (), "aspects": ()},
    "prefix_suffix": {"templates": tuple(LABEL_TEMPLATES), "aspects": ()},
    "decomposition": {"templates": tuple(LABEL_TEMPLATES), "aspects": (Aspect.DECOMPOSITION,)},
    "synonym": {"templates": tuple(LABEL_TEMPLATES),
                "aspects": (Aspect.DECOMPOSITION, Aspect.SYNONYM)},
    "body_parts": {"templates": tuple(LABEL_TEMPLATES),
                   "aspects": (Aspect.DECOMPOSITION, Aspect.SYNONYM, Aspect.BODY_PARTS)},
}


class DescriptionStore:
    """类别 -> 描述列表；同一类别内按规范化文本去重"""

    def __init__(self):
        self._entries: Dict[int, List[TextDescription]] = {}
        self._seen: Dict[int, set] = {}

    def add(self, desc: TextDescription) -> bool:
        """加入一条描述；重复时返回 False"""
        key = normalize_text(desc.text)
        seen = self._seen.setdefault(desc.class_id, set())
        if key in seen:
            logger.debug(f"跳过重复描述: 类别 {desc.class_id} {desc.text[:40]!r}")
            return False
        seen.add(key)
        self._entries.setdefault(desc.class_id, []).append(desc)
        return True

    def add_label(self, class_id: int, label: str) -> bool:
        return self.add(TextDescription(class_id, DescriptionKind.LABEL, label, source="label"))

    def extend(self, descs: Iterable[TextDescription]) -> int:
        return sum(1 for d in descs if self.add(d))

    def classes(self) -> List[int]:
        return sorted(self._entries)

    def get(self, class_id: int, kind: Optional[DescriptionKind] = None,
            aspects: Optional[Sequence[str]] = None) -> List[TextDescription]:
        out = list(self._entries.get(class_id, []))
        if kind is not None:
            out = [d for d in out if d.kind == DescriptionKind(kind)]
        if aspects is not None:
            allowed = {Aspect(a).value for a in aspects}
            out = [d for d in out if d.aspect in allowed]
        return out

    def label(self, class_id: int) -> TextDescription:
        if class_id not in self._entries:
            raise DescriptionError(f"描述库中没有类别 {class_id}")
        labels = self.get(class_id, DescriptionKind.LABEL)
        if not labels:
            raise DescriptionError(f"类别 {class_id} 缺少标签描述")
        return labels[0]

    def __len__(self) -> int:
        return sum(len(v) for v in self._entries.values())

    def to_dict(self) -> Dict[str, list]:
        return {
            str(k): [
                {"kind": d.kind.value, "text": d.text, "aspect": d.aspect,
                 "source": d.source, "created": d.created}
                for d in self._entries[k]
            ]
            for k in self.classes()
        }

    @classmethod
    def from_dict(cls, data: Dict[str, list]) -> "DescriptionStore":
        store = cls()
        for k, items in data.items():
            for item in items:
                store.add(TextDescription(int(k), item["kind"], item["text"],
                                          aspect=item.get("aspect"), source=item.get("source", "manual"),
                                          created=item.get("created", "")))
        return store

    def save(self, path: str):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, ensure_ascii=False, indent=2)
        logger.info(f"💾 描述库已保存: {path} ({len(self)} 条)")

    @classmethod
    def load(cls, path: str) -> "DescriptionStore":
        try:
            with open(path, "r", encoding="utf-8") as f:
                return cls.from_dict(json.load(f))
        except (ValueError, KeyError) as e:
            raise DescriptionError(f"描述库文件格式错误: {path}: {e}") from e


def assemble_description_set(store: DescriptionStore, classes: Sequence[int], m: int,
                             templates: Sequence[str] = tuple(LABEL_TEMPLATES),
                             aspects: Optional[Sequence[str]] = None) -> Dict[int, List[TextDescription]]:
    """
    为每个类别组装至多 m 条描述，顺序为 标签 -> 模板 -> 解释性描述

    Raises:
        DescriptionError: 类别缺失或缺少标签
    """
    if m < 1:
        raise DescriptionError(f"每类描述数必须 >= 1，得到 {m}")
    result: Dict[int, List[TextDescription]] = {}
    for k in classes:
        label = store.label(k)
        picked = [label]
        seen = {normalize_text(label.text)}

        def take(desc: TextDescription):
            key = normalize_text(desc.text)
            if len(picked) < m and key not in seen:
                seen.add(key)
                picked.append(desc)

        for template in templates:
            take(TextDescription(k, DescriptionKind.TEMPLATE, fill_template(template, label.text),
                                 source="template"))
        interpretive = store.get(k, DescriptionKind.INTERPRETIVE,
                                 aspects if aspects is not None else None)
        for desc in interpretive:
            take(desc)

        if len(picked) < m:
            logger.warning(f"⚠️ 类别 {k} 只有 {len(picked)} 条描述 (需要 {m})")
        result[k] = picked
    return result


def assemble_preset(store: DescriptionStore, classes: Sequence[int], m: int,
                    preset: str) -> Dict[int, List[TextDescription]]:
    if preset not in PROMPT_PRESETS:
        raise DescriptionError(f"未知的描述预设: {preset}，可选 {sorted(PROMPT_PRESETS)}")
    preset_cfg = PROMPT_PRESETS[preset]
    return assemble_description_set(store, classes, m, preset_cfg["templates"], preset_cfg["aspects"])
