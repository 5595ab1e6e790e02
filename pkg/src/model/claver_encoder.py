"""
视频/文本双塔编码器
patch 嵌入 -> 逐帧空间编码 -> 时间嵌入 + 掩码时序编码 -> 类 token 平均池化 -> 投影；
文本侧为词嵌入 + 位置嵌入 + 联合注意力块，取最后一个非 pad token 投影。
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from ..attention import transformer_block
from ..masks import MaskKind, build_mask
from ..numerics import DiffGraph, Var
from ..utils.errors import DescriptionError, GeometryError, ShapeError
from .model_config import ModelConfig, TemporalKind
from .params import Params
from .tokenizer import PAD_ID

logger = logging.getLogger(__name__)


class ShuffleStage(str, Enum):
    """token 打乱发生在时间嵌入之前（pre）还是之后（post）"""
    PRE_TE = "pre"
    POST_TE = "post"
    NONE = "none"


@dataclass(frozen=True)
class TokenShuffle:
    """作用在展平后 T*S 个 token 上的置换，(Px)[i] = x[perm[i]]"""
    stage: ShuffleStage
    permutation: tuple

    def apply(self, g: DiffGraph, x: Var) -> Var:
        b, t, s, d = x.shape
        perm = np.asarray(self.permutation, dtype=np.int64)
        if perm.size != t * s:
            raise ShapeError(f"置换长度 {perm.size} 与 token 数 {t * s} 不一致")
        flat = g.reshape(x, (b, t * s, d))
        return g.reshape(g.getitem(flat, (slice(None), perm)), (b, t, s, d))


def as_frames(clips) -> np.ndarray:
    """把 VideoClip、片段序列或数组统一为 (B, T, H, W, C) 的 float64 数组"""
    if hasattr(clips, "frames"):
        clips = [clips]
    if isinstance(clips, np.ndarray):
        arr = clips
    else:
        arr = np.stack([np.asarray(getattr(c, "frames", c)) for c in clips])
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 4:
        arr = arr[None]
    if arr.ndim != 5:
        raise GeometryError(f"视频张量应为 (B, T, H, W, C)，实际维度 {arr.ndim}")
    return arr


def check_geometry(frames: np.ndarray, cfg: ModelConfig):
    expected = (cfg.frames, cfg.height, cfg.width, cfg.channels)
    if tuple(frames.shape[1:]) != expected:
        raise GeometryError(f"片段几何 {tuple(frames.shape[1:])} 与配置 {expected} 不一致")


def canonical_frame_order(frames: np.ndarray) -> np.ndarray:
    """按像素字典序重排每个片段的帧，使表示只依赖帧的多重集"""
    out = np.empty_like(frames)
    for b in range(frames.shape[0]):
        keys = frames[b].reshape(frames.shape[1], -1)
        order = np.lexsort(keys.T[::-1])
        out[b] = frames[b][order]
    return out


def patchify(frames: np.ndarray, patch: int) -> np.ndarray:
    """(B, T, H, W, C) -> (B, T, L, P*P*C)，patch 按行优先排列"""
    b, t, h, w, c = frames.shape
    grid = frames.reshape(b, t, h // patch, patch, w // patch, patch, c)
    grid = grid.transpose(0, 1, 2, 4, 3, 5, 6)
    return grid.reshape(b, t, (h // patch) * (w // patch), patch * patch * c)


def patch_embed(g: DiffGraph, frames, cfg: ModelConfig, p: Params) -> Var:
    """每帧 L 个 patch 投影，前置类 token，逐槽位加 e^pos；输出 (B, T, S, D)"""
    frames = as_frames(frames)
    check_geometry(frames, cfg)
    b = frames.shape[0]
    patches = g.matmul(patchify(frames, cfg.patch), p.patch_proj)
    cls = g.mul(g.lift(p.class_token), np.ones((b, cfg.frames, 1, 1)))
    tokens = g.concat([cls, patches], axis=2)
    return tokens + p.pos_embed


def image_encode(g: DiffGraph, tokens: Var, cfg: ModelConfig, p: Params) -> Var:
    """L_V 个块逐帧独立作用（每帧 S 个 token 的联合注意力）"""
    mask = build_mask(MaskKind.JOINT, 1, cfg.tokens_per_frame)
    x = tokens
    for block in p.spatial_blocks:
        x = transformer_block(g, x, mask, block, cfg.scale_mode)
    return x


def temporal_transform(g: DiffGraph, x: Var, cfg: ModelConfig, p: Params) -> Var:
    """时序块本身（不含时间嵌入），输入输出均为 (B, T, S, D)"""
    kind = cfg.temporal_kind
    if kind == TemporalKind.MEAN_POOL or not p.temporal_blocks:
        return x
    b, t, s, d = x.shape

    if kind == TemporalKind.CLASS_TOKEN_ONLY:
        mask = build_mask(MaskKind.JOINT, t, 1)
        cls = g.getitem(x, (slice(None), slice(None), 0))
        for block in p.temporal_blocks:
            cls = transformer_block(g, cls, mask, block, cfg.scale_mode)
        rest = g.getitem(x, (slice(None), slice(None), slice(1, None)))
        return g.concat([g.reshape(cls, (b, t, 1, d)), rest], axis=2)

    mask = build_mask(kind.mask_kind, t, s)
    flat = g.reshape(x, (b, t * s, d))
    for block in p.temporal_blocks:
        flat = transformer_block(g, flat, mask, block, cfg.scale_mode)
    return g.reshape(flat, (b, t, s, d))


def add_time_embedding(g: DiffGraph, x: Var, p: Params) -> Var:
    """e^tem_t 加到第 t 帧的全部 token"""
    t, d = np.shape(p.time_embed)
    return x + g.reshape(g.lift(p.time_embed), (t, 1, d))


def temporal_encode(g: DiffGraph, frame_reps: Var, cfg: ModelConfig, p: Params,
                    shuffle: Optional[TokenShuffle] = None) -> Var:
    x = frame_reps
    if shuffle is not None and shuffle.stage == ShuffleStage.PRE_TE:
        x = shuffle.apply(g, x)
    x = add_time_embedding(g, x, p)
    if shuffle is not None and shuffle.stage == ShuffleStage.POST_TE:
        x = shuffle.apply(g, x)
    return temporal_transform(g, x, cfg, p)


def class_tokens(g: DiffGraph, v: Var) -> Var:
    return g.getitem(v, (slice(None), slice(None), 0))


def video_repr(g: DiffGraph, v: Var, cfg: ModelConfig, p: Params) -> Var:
    """T 个类 token 输出取平均后投影到共享维度"""
    pooled = g.mean(class_tokens(g, v), axis=1)
    return g.matmul(pooled, p.video_proj)


def encode_video(g: DiffGraph, clips, cfg: ModelConfig, p: Params,
                 shuffle: Optional[TokenShuffle] = None) -> Var:
    frames = as_frames(clips)
    if cfg.temporal_kind == TemporalKind.MEAN_POOL:
        frames = canonical_frame_order(frames)
    tokens = patch_embed(g, frames, cfg, p)
    reps = image_encode(g, tokens, cfg, p)
    v = temporal_encode(g, reps, cfg, p, shuffle)
    return video_repr(g, v, cfg, p)


def _last_non_pad(ids: np.ndarray) -> np.ndarray:
    nonpad = ids != PAD_ID
    if not np.all(nonpad.any(axis=1)):
        raise DescriptionError("文本描述不含任何非 pad token")
    return ids.shape[1] - 1 - np.argmax(nonpad[:, ::-1], axis=1)


def text_encode(g: DiffGraph, token_ids, cfg: ModelConfig, p: Params) -> Var:
    """
    文本编码

    Args:
        token_ids: (N,) 或 (B, N) 的 token id，右侧补 pad

    Returns:
        (B, D') 文本表示
    """
    ids = np.asarray(token_ids, dtype=np.int64)
    if ids.ndim == 1:
        ids = ids[None]
    b, n = ids.shape
    if n > cfg.max_text_len:
        raise ShapeError(f"文本长度 {n} 超过上限 {cfg.max_text_len}")
    if ids.max() >= np.shape(p.token_embed)[0] or ids.min() < 0:
        raise ShapeError("token id 超出词表范围")
    last = _last_non_pad(ids)

    x = g.getitem(g.lift(p.token_embed), ids) + g.getitem(g.lift(p.text_pos_embed), slice(0, n))
    key_mask = np.where(ids != PAD_ID, 0.0, -np.inf)[:, None, None, :]
    for block in p.text_blocks:
        x = transformer_block(g, x, key_mask, block, cfg.scale_mode)
    pooled = g.getitem(x, (np.arange(b), last))
    return g.matmul(pooled, p.text_proj)


def embed_videos(params: Params, cfg: ModelConfig, clips, batch_size: int = 64,
                 shuffle: Optional[TokenShuffle] = None) -> np.ndarray:
    """评估模式下批量计算视频表示"""
    frames = as_frames(clips)
    outputs = []
    for start in range(0, frames.shape[0], batch_size):
        g = DiffGraph(record=False)
        outputs.append(encode_video(g, frames[start:start + batch_size], cfg, params, shuffle).value)
    return np.concatenate(outputs, axis=0)


def embed_texts(params: Params, cfg: ModelConfig, token_ids: Sequence) -> np.ndarray:
    g = DiffGraph(record=False)
    return text_encode(g, np.asarray(token_ids), cfg, params).value
