"""
CLVD 数据集文件读写

布局（小端）：magic "CLVD"，u32 版本，u32 长度前缀的配置 JSON（数据集配置 + 划分大小），
然后逐个片段：u32 类别、u32 T/H/W/C、f32 像素；先训练集后验证集，读到文件末尾为止。
"""

import json
import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from ..utils.errors import DatasetFormatError, UnsupportedVersionError
from .sprite_dataset import Dataset, DatasetConfig, VideoClip

logger = logging.getLogger(__name__)

DATASET_MAGIC = b"CLVD"
DATASET_VERSION = 1


def save_dataset(path: Union[str, Path], dataset: Dataset) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"config": dataset.config.to_dict(),
              "splits": {"train": len(dataset.train), "val": len(dataset.val)},
              "seeds": [c.instance_seed for c in dataset.train + dataset.val]}
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    with open(path, "wb") as f:
        f.write(DATASET_MAGIC)
        f.write(struct.pack("<II", DATASET_VERSION, len(header_bytes)))
        f.write(header_bytes)
        for clip in dataset.train + dataset.val:
            frames = np.asarray(clip.frames, dtype="<f4")
            f.write(struct.pack("<5I", clip.class_id, *frames.shape))
            f.write(frames.tobytes(order="C"))

    logger.info(f"💾 数据集已保存: {path} ({len(dataset.train)} + {len(dataset.val)} 个片段)")
    return path


def load_dataset(path: Union[str, Path]) -> Dataset:
    """
    读取 CLVD 文件

    Raises:
        DatasetFormatError: magic 不匹配、文件截断或片段数与头部不符
        UnsupportedVersionError: 版本不受支持
    """
    path = Path(path)
    data = path.read_bytes()
    offset = 0

    def take(size: int) -> bytes:
        nonlocal offset
        if offset + size > len(data):
            logger.error(f"❌ 数据集文件被截断: {path}")
            raise DatasetFormatError(f"数据集文件被截断: {path}")
        chunk = data[offset:offset + size]
        offset += size
        return chunk

    if take(4) != DATASET_MAGIC:
        raise DatasetFormatError(f"数据集 magic 不匹配: {path}")
    version, length = struct.unpack("<II", take(8))
    if version != DATASET_VERSION:
        raise UnsupportedVersionError(f"不支持的数据集版本 {version}", version=version)
    try:
        header = json.loads(take(length).decode("utf-8"))
        config = DatasetConfig.from_dict(header["config"])
        n_train = int(header["splits"]["train"])
        n_val = int(header["splits"]["val"])
    except (ValueError, KeyError, TypeError) as e:
        raise DatasetFormatError(f"数据集头部格式错误: {path}: {e}") from e
    seeds = header.get("seeds") or []

    clips = []
    while offset < len(data):
        class_id, t, h, w, c = struct.unpack("<5I", take(20))
        count = t * h * w * c
        pixels = np.frombuffer(take(4 * count), dtype="<f4").astype(np.float64)
        seed = seeds[len(clips)] if len(clips) < len(seeds) else len(clips)
        clips.append(VideoClip(pixels.reshape(t, h, w, c), class_id, seed))

    if len(clips) != n_train + n_val:
        raise DatasetFormatError(f"片段数 {len(clips)} 与头部记录 {n_train}+{n_val} 不一致: {path}")
    logger.info(f"📂 数据集已加载: {path} ({n_train} + {n_val} 个片段)")
    return Dataset(config, clips[:n_train], clips[n_train:])
