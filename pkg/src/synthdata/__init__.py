"""
合成数据模块
方块平移视频数据集（含帧序反转对）及其 CLVD 文件格式
"""

from .clip_io import DATASET_MAGIC, DATASET_VERSION, load_dataset, save_dataset
from .sprite_dataset import (
    DIRECTIONS,
    Dataset,
    DatasetConfig,
    VideoClip,
    captions_for,
    class_label,
    default_description_store,
    descriptions_for,
    generate,
    make_clip,
    render_clip,
    reversal_partner,
    reversed_clip,
)

__all__ = [
    "DATASET_MAGIC",
    "DATASET_VERSION",
    "load_dataset",
    "save_dataset",
    "DIRECTIONS",
    "Dataset",
    "DatasetConfig",
    "VideoClip",
    "captions_for",
    "class_label",
    "default_description_store",
    "descriptions_for",
    "generate",
    "make_clip",
    "render_clip",
    "reversal_partner",
    "reversed_clip",
]
