"""
注意力模块
掩码多头自注意力与 Pre-LN Transformer 块
"""

from .masked_attention import (
    SCALE_MODEL_DIM,
    SCALE_PER_HEAD,
    AttentionParams,
    attention_matrix,
    attention_scale,
    init_attention_params,
    masked_attention,
    zero_attention_params,
)
from .transformer_block import (
    FFN_EXPANSION,
    BlockParams,
    identity_block_params,
    init_block_params,
    transformer_block,
)

__all__ = [
    "SCALE_MODEL_DIM",
    "SCALE_PER_HEAD",
    "AttentionParams",
    "attention_matrix",
    "attention_scale",
    "init_attention_params",
    "masked_attention",
    "zero_attention_params",
    "FFN_EXPANSION",
    "BlockParams",
    "identity_block_params",
    "init_block_params",
    "transformer_block",
]
