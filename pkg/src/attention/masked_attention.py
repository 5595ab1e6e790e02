"""
掩码多头自注意力
每个头计算 softmax(QK^T / scale + M) V，拼接后经输出投影。
行向量约定：x 形状 (..., n, D)，投影为 x @ W。
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from ..masks import AttentionMask
from ..numerics import DiffGraph, SeededRng, Tensor, Var
from ..utils.errors import ConfigError, OutOfRangeError, ShapeError

logger = logging.getLogger(__name__)

SCALE_PER_HEAD = "per_head"
SCALE_MODEL_DIM = "model_dim"

MaskLike = Union[AttentionMask, np.ndarray, None]


@dataclass
class AttentionParams:
    """注意力投影参数，W_q/W_k/W_v 的列按头分组"""
    w_q: Tensor
    w_k: Tensor
    w_v: Tensor
    w_o: Tensor
    heads: int

    @property
    def dim(self) -> int:
        return int(np.shape(self.w_q)[0])

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads

    def validate(self):
        d = self.dim
        if d % self.heads != 0:
            raise ConfigError(f"模型维度 {d} 不能被头数 {self.heads} 整除")
        for name in ("w_q", "w_k", "w_v", "w_o"):
            shape = np.shape(getattr(self, name))
            if shape != (d, d):
                raise ShapeError(f"{name} 形状应为 {(d, d)}，实际 {shape}")


def init_attention_params(rng: SeededRng, dim: int, heads: int, std: Optional[float] = None) -> AttentionParams:
    """正态初始化，默认标准差 1/sqrt(D)"""
    std = dim ** -0.5 if std is None else std
    params = AttentionParams(
        w_q=rng.normal_array((dim, dim), std),
        w_k=rng.normal_array((dim, dim), std),
        w_v=rng.normal_array((dim, dim), std),
        w_o=rng.normal_array((dim, dim), std),
        heads=heads,
    )
    params.validate()
    return params


def zero_attention_params(dim: int, heads: int) -> AttentionParams:
    zeros = np.zeros((dim, dim))
    return AttentionParams(zeros, zeros.copy(), zeros.copy(), zeros.copy(), heads)


def _additive(mask: MaskLike, n: int) -> Optional[np.ndarray]:
    if mask is None:
        return None
    if isinstance(mask, AttentionMask):
        if mask.n != n:
            raise ShapeError(f"掩码大小 {mask.n} 与 token 数 {n} 不一致")
        return mask.entries
    entries = np.asarray(mask, dtype=np.float64)
    if entries.shape[-1] != n:
        raise ShapeError(f"掩码最后一维 {entries.shape[-1]} 与 token 数 {n} 不一致")
    return entries


def _split_heads(g: DiffGraph, t: Var, heads: int) -> Var:
    *lead, n, d = t.shape
    split = g.reshape(t, (*lead, n, heads, d // heads))
    k = len(lead)
    return g.transpose(split, (*range(k), k + 1, k, k + 2))


def _merge_heads(g: DiffGraph, t: Var) -> Var:
    *lead, h, n, dh = t.shape
    k = len(lead)
    merged = g.transpose(t, (*range(k), k + 1, k, k + 2))
    return g.reshape(merged, (*lead, n, h * dh))


def attention_scale(p: AttentionParams, scale_mode: str) -> float:
    if scale_mode == SCALE_PER_HEAD:
        return float(np.sqrt(p.head_dim))
    if scale_mode == SCALE_MODEL_DIM:
        return float(np.sqrt(p.dim))
    raise ConfigError(f"未知缩放模式: {scale_mode}")


def masked_attention(g: DiffGraph, x: Tensor, mask: MaskLike, p: AttentionParams,
                     scale_mode: str = SCALE_PER_HEAD,
                     return_weights: bool = False) -> Union[Var, Tuple[Var, Var]]:
    """
    掩码多头自注意力

    Args:
        g: 计算图
        x: 形状 (..., n, D)
        mask: AttentionMask、可广播到 (..., h, n, n) 的加性数组，或 None（不屏蔽）
        p: 注意力参数
        scale_mode: per_head 用 sqrt(d_head)，model_dim 用 sqrt(D)
        return_weights: 同时返回注意力权重 (..., h, n, n)

    Returns:
        形状 (..., n, D) 的输出
    """
    x = g.lift(x)
    if x.ndim < 2:
        raise ShapeError(f"注意力输入至少二维，实际 {x.shape}")
    n, d = x.shape[-2], x.shape[-1]
    if d != p.dim:
        raise ShapeError(f"输入维度 {d} 与参数维度 {p.dim} 不一致")
    additive = _additive(mask, n)

    q = _split_heads(g, g.matmul(x, p.w_q), p.heads)
    k = _split_heads(g, g.matmul(x, p.w_k), p.heads)
    v = _split_heads(g, g.matmul(x, p.w_v), p.heads)

    k_t = g.transpose(k, (*range(k.ndim - 2), k.ndim - 1, k.ndim - 2))
    logits = g.scale(g.matmul(q, k_t), 1.0 / attention_scale(p, scale_mode))
    weights = g.softmax(logits, additive)
    out = g.matmul(_merge_heads(g, g.matmul(weights, v)), p.w_o)
    if return_weights:
        return out, weights
    return out


def attention_matrix(x, mask: MaskLike, p: AttentionParams, head: int,
                     scale_mode: str = SCALE_PER_HEAD) -> np.ndarray:
    """单个头的 softmax 后注意力矩阵（分析用，不参与前向值路径）"""
    if head < 0 or head >= p.heads:
        raise OutOfRangeError(f"头编号 {head} 越界 (h={p.heads})")
    g = DiffGraph(record=False)
    _, weights = masked_attention(g, np.asarray(x, dtype=np.float64), mask, p,
                                  scale_mode=scale_mode, return_weights=True)
    return weights.value[..., head, :, :]
