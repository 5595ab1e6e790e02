"""
模型模块
玩具规模的视频-文本对比学习器：编码器、对比损失、打分与训练
"""

from .claver_encoder import (
    ShuffleStage,
    TokenShuffle,
    add_time_embedding,
    as_frames,
    canonical_frame_order,
    class_tokens,
    embed_texts,
    embed_videos,
    encode_video,
    image_encode,
    patch_embed,
    temporal_encode,
    temporal_transform,
    text_encode,
    video_repr,
)
from .model_config import ModelConfig, TemporalKind, temporal_layers_for
from .objective import (
    contrastive_loss,
    cosine_sim,
    loss_from_similarities,
    predict,
    score,
    score_from_similarities,
    similarity_logits,
)
from .params import (
    Params,
    bind_params,
    copy_params,
    init_params,
    load_checkpoint,
    map_tensors,
    named_tensors,
    parameter_count,
    params_equal,
    save_checkpoint,
)
from .tokenizer import PAD_ID, UNK_ID, DescriptionKind, TextDescription, Tokenizer, normalize_text
from .trainer import (
    AdamW,
    EpochMetrics,
    EvalResult,
    OptimizerConfig,
    TrainResult,
    class_text_embeddings,
    evaluate,
    learning_rate,
    train,
)

__all__ = [
    "ShuffleStage",
    "TokenShuffle",
    "add_time_embedding",
    "as_frames",
    "canonical_frame_order",
    "class_tokens",
    "embed_texts",
    "embed_videos",
    "encode_video",
    "image_encode",
    "patch_embed",
    "temporal_encode",
    "temporal_transform",
    "text_encode",
    "video_repr",
    "ModelConfig",
    "TemporalKind",
    "temporal_layers_for",
    "contrastive_loss",
    "cosine_sim",
    "loss_from_similarities",
    "predict",
    "score",
    "score_from_similarities",
    "similarity_logits",
    "Params",
    "bind_params",
    "copy_params",
    "init_params",
    "load_checkpoint",
    "map_tensors",
    "named_tensors",
    "parameter_count",
    "params_equal",
    "save_checkpoint",
    "PAD_ID",
    "UNK_ID",
    "DescriptionKind",
    "TextDescription",
    "Tokenizer",
    "normalize_text",
    "AdamW",
    "EpochMetrics",
    "EvalResult",
    "OptimizerConfig",
    "TrainResult",
    "class_text_embeddings",
    "evaluate",
    "learning_rate",
    "train",
]
