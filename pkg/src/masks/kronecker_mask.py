"""
Kronecker 掩码
联合/空间/管道/KMT/KMCT 注意力掩码的谓词构造与 Kronecker 代数构造。

记号：I 为单位阵，J 为全 1 阵，U 为含对角线的上三角全 1 阵；
代数式中的 1 表示屏蔽位置，落地为加性 -inf。
"""

import json
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Any, Dict, Sequence, Union

import numpy as np

from ..numerics import kron
from ..utils.errors import MaskError, OutOfRangeError

logger = logging.getLogger(__name__)

MAX_TOKENS = 4096


class MaskKind(str, Enum):
    """掩码类型"""
    JOINT = "joint"
    SPATIAL = "spatial"
    PIPELINE = "pipeline"
    CLASS_TOKEN_ONLY = "cls"
    KMT = "kmt"
    KMCT = "kmct"


@dataclass(frozen=True, eq=False)
class AttentionMask:
    """n x n 加性掩码，n = T * S，元素取值 {0, -inf}"""
    kind: MaskKind
    t_frames: int
    s_tokens: int
    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.t_frames * self.s_tokens

    @property
    def allowed(self) -> np.ndarray:
        return self.entries == 0.0

    def pattern(self) -> np.ndarray:
        """0 表示允许，1 表示屏蔽"""
        return (~self.allowed).astype(np.int64)

    def with_entries(self, entries: np.ndarray) -> "AttentionMask":
        frozen = np.array(entries, dtype=np.float64)
        frozen.setflags(write=False)
        return AttentionMask(self.kind, self.t_frames, self.s_tokens, frozen)


def frame_of(index, s_tokens: int):
    return np.asarray(index) // s_tokens


def slot_of(index, s_tokens: int):
    return np.asarray(index) % s_tokens


def _validate(kind: MaskKind, t: int, s: int):
    if t < 1 or s < 1:
        raise MaskError(f"掩码维度必须为正: T={t}, S={s}")
    if t * s > MAX_TOKENS:
        raise MaskError(f"token 数 {t * s} 超过上限 {MAX_TOKENS}")
    if kind == MaskKind.CLASS_TOKEN_ONLY:
        raise MaskError("类 token 时序路径通过 token 选择实现，不构造 n x n 掩码")


def _predicate_blocked(kind: MaskKind, t: int, s: int) -> np.ndarray:
    idx = np.arange(t * s)
    fi, fj = np.meshgrid(frame_of(idx, s), frame_of(idx, s), indexing="ij")
    si, sj = np.meshgrid(slot_of(idx, s), slot_of(idx, s), indexing="ij")
    off_diag = ~np.eye(t * s, dtype=bool)

    if kind == MaskKind.JOINT:
        return np.zeros((t * s, t * s), dtype=bool)
    if kind == MaskKind.SPATIAL:
        return fi != fj
    if kind == MaskKind.PIPELINE:
        return si != sj
    if kind == MaskKind.KMT:
        return (fi == fj) & off_diag
    if kind == MaskKind.KMCT:
        return ((fi == fj) & off_diag) | (fi < fj)
    raise MaskError(f"未知掩码类型: {kind}")


@lru_cache(maxsize=128)
def _build_cached(kind: MaskKind, t: int, s: int) -> AttentionMask:
    blocked = _predicate_blocked(kind, t, s)
    entries = np.where(blocked, -np.inf, 0.0)
    entries.setflags(write=False)
    return AttentionMask(kind, t, s, entries)


def build_mask(kind: Union[MaskKind, str], t: int, s: int) -> AttentionMask:
    """
    构造注意力掩码

    Args:
        kind: 掩码类型（不含 cls）
        t: 帧数 T
        s: 每帧 token 数 S（含类 token）

    Returns:
        AttentionMask，对角线恒为 0
    """
    kind = MaskKind(kind)
    _validate(kind, int(t), int(s))
    return _build_cached(kind, int(t), int(s))


def kron_pattern(kind: Union[MaskKind, str], t: int, s: int) -> np.ndarray:
    """用 Kronecker 代数重新计算 0/1 屏蔽模式"""
    kind = MaskKind(kind)
    _validate(kind, t, s)
    i_t, j_t, u_t = np.eye(t), np.ones((t, t)), np.triu(np.ones((t, t)))
    i_s, j_s = np.eye(s), np.ones((s, s))

    if kind == MaskKind.JOINT:
        return kron(0.0 * j_t, j_s)
    if kind == MaskKind.SPATIAL:
        return kron(j_t - i_t, j_s)
    if kind == MaskKind.PIPELINE:
        return kron(j_t, j_s - i_s)
    if kind == MaskKind.KMT:
        return kron(i_t, j_s - i_s)
    # KMCT
    return kron(i_t, j_s - i_s) + kron(u_t - i_t, j_s)


def equivalent_via_kron(mask: AttentionMask) -> bool:
    """存储的掩码是否与 Kronecker 构造逐元素一致"""
    expected = kron_pattern(mask.kind, mask.t_frames, mask.s_tokens)
    if expected.shape != mask.entries.shape:
        return False
    entries = mask.entries
    if not np.all((entries == 0.0) | np.isneginf(entries)):
        return False
    return bool(np.array_equal(expected == 1.0, np.isneginf(entries)))


def allowed_count(mask: AttentionMask, row: int) -> int:
    """某一行未被屏蔽的位置数"""
    if row < 0 or row >= mask.n:
        raise OutOfRangeError(f"行号 {row} 越界 (n={mask.n})")
    return int(np.count_nonzero(mask.entries[row] == 0.0))


def conjugate_entries(entries: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    """置换共轭：M'[i, j] = M[perm[i], perm[j]]，与 (Px)[i] = x[perm[i]] 配套"""
    perm = np.asarray(perm, dtype=np.int64)
    return entries[np.ix_(perm, perm)]


def is_frame_preserving(perm: Sequence[int], t: int, s: int) -> bool:
    perm = np.asarray(perm, dtype=np.int64)
    if perm.size != t * s:
        raise MaskError(f"置换长度 {perm.size} 与 n={t * s} 不一致")
    return bool(np.array_equal(frame_of(perm, s), frame_of(np.arange(t * s), s)))


def render_ascii(mask: AttentionMask) -> str:
    """'.' 表示允许，'x' 表示屏蔽，每帧之间以 '|' 分隔"""
    s = mask.s_tokens
    lines = []
    for i, row in enumerate(mask.pattern()):
        cells = []
        for j, bit in enumerate(row):
            if j and j % s == 0:
                cells.append("|")
            cells.append("x" if bit else ".")
        lines.append("".join(cells))
        if (i + 1) % s == 0 and i + 1 < mask.n:
            lines.append("-" * len(lines[-1]))
    return "\n".join(lines)


def mask_to_dict(mask: AttentionMask) -> Dict[str, Any]:
    return {
        "kind": mask.kind.value,
        "frames": mask.t_frames,
        "slots": mask.s_tokens,
        "n": mask.n,
        "pattern": mask.pattern().tolist(),
    }


def mask_to_json(mask: AttentionMask) -> str:
    return json.dumps(mask_to_dict(mask), sort_keys=True)
