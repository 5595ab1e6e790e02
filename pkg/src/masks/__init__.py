"""
掩码模块
Kronecker 积构造的时空注意力掩码族
"""

from .kronecker_mask import (
    MAX_TOKENS,
    AttentionMask,
    MaskKind,
    allowed_count,
    build_mask,
    conjugate_entries,
    equivalent_via_kron,
    frame_of,
    is_frame_preserving,
    kron_pattern,
    mask_to_dict,
    mask_to_json,
    render_ascii,
    slot_of,
)

__all__ = [
    "MAX_TOKENS",
    "AttentionMask",
    "MaskKind",
    "allowed_count",
    "build_mask",
    "conjugate_entries",
    "equivalent_via_kron",
    "frame_of",
    "is_frame_preserving",
    "kron_pattern",
    "mask_to_dict",
    "mask_to_json",
    "render_ascii",
    "slot_of",
]
