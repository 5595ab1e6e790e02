"""
Pre-LN Transformer 块
x + attn(LN1(x))，再 + FFN(LN2(·))；FFN 隐层 4D，GELU 激活，无 dropout
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..numerics import DiffGraph, SeededRng, Tensor, Var
from ..utils.errors import ShapeError
from .masked_attention import (
    SCALE_PER_HEAD,
    AttentionParams,
    MaskLike,
    init_attention_params,
    masked_attention,
    zero_attention_params,
)

FFN_EXPANSION = 4


@dataclass
class BlockParams:
    """单个 Transformer 块的参数"""
    attn: AttentionParams
    ln1_gain: Tensor
    ln1_bias: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor
    w_fc1: Tensor
    b_fc1: Tensor
    w_fc2: Tensor
    b_fc2: Tensor

    def validate(self):
        self.attn.validate()
        d = self.attn.dim
        hidden = FFN_EXPANSION * d
        expected = {
            "ln1_gain": (d,), "ln1_bias": (d,), "ln2_gain": (d,), "ln2_bias": (d,),
            "w_fc1": (d, hidden), "b_fc1": (hidden,), "w_fc2": (hidden, d), "b_fc2": (d,),
        }
        for name, shape in expected.items():
            actual = np.shape(getattr(self, name))
            if actual != shape:
                raise ShapeError(f"{name} 形状应为 {shape}，实际 {actual}")


def init_block_params(rng: SeededRng, dim: int, heads: int, std: Optional[float] = None) -> BlockParams:
    hidden = FFN_EXPANSION * dim
    params = BlockParams(
        attn=init_attention_params(rng, dim, heads, std),
        ln1_gain=np.ones(dim),
        ln1_bias=np.zeros(dim),
        ln2_gain=np.ones(dim),
        ln2_bias=np.zeros(dim),
        w_fc1=rng.normal_array((dim, hidden), dim ** -0.5 if std is None else std),
        b_fc1=np.zeros(hidden),
        w_fc2=rng.normal_array((hidden, dim), hidden ** -0.5 if std is None else std),
        b_fc2=np.zeros(dim),
    )
    params.validate()
    return params


def identity_block_params(dim: int, heads: int) -> BlockParams:
    """归一化为恒等、其余权重全零的块，输出等于输入"""
    hidden = FFN_EXPANSION * dim
    return BlockParams(
        attn=zero_attention_params(dim, heads),
        ln1_gain=np.ones(dim),
        ln1_bias=np.zeros(dim),
        ln2_gain=np.ones(dim),
        ln2_bias=np.zeros(dim),
        w_fc1=np.zeros((dim, hidden)),
        b_fc1=np.zeros(hidden),
        w_fc2=np.zeros((hidden, dim)),
        b_fc2=np.zeros(dim),
    )


def transformer_block(g: DiffGraph, x: Tensor, mask: MaskLike, p: BlockParams,
                      scale_mode: str = SCALE_PER_HEAD) -> Var:
    x = g.lift(x)
    h = x + masked_attention(g, g.layer_norm(x, p.ln1_gain, p.ln1_bias), mask, p.attn, scale_mode)
    ffn = g.gelu(g.matmul(g.layer_norm(h, p.ln2_gain, p.ln2_bias), p.w_fc1) + p.b_fc1)
    return h + (g.matmul(ffn, p.w_fc2) + p.b_fc2)
