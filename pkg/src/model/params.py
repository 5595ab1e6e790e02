"""
模型参数
参数结构、初始化、按名称遍历，以及 CLVR 二进制检查点读写
"""

import json
import logging
import struct
from dataclasses import dataclass, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from ..attention import BlockParams, init_block_params
from ..numerics import DiffGraph, SeededRng, Tensor, Var
from ..utils.errors import DatasetFormatError, UnsupportedVersionError
from .model_config import ModelConfig
from .tokenizer import Tokenizer

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"CLVR"
CHECKPOINT_VERSION = 1


@dataclass
class Params:
    """全部可学习参数"""
    patch_proj: Tensor          # (P*P*C, D)
    class_token: Tensor         # (D,)
    pos_embed: Tensor           # (S, D)
    time_embed: Tensor          # (T, D)
    spatial_blocks: List[BlockParams]
    temporal_blocks: List[BlockParams]
    token_embed: Tensor         # (V, D)
    text_pos_embed: Tensor      # (N, D)
    text_blocks: List[BlockParams]
    video_proj: Tensor          # (D, D')
    text_proj: Tensor           # (D, D')


IMAGE_ENCODER_PREFIXES = ("patch_proj", "class_token", "pos_embed", "spatial_blocks")
TEMPORAL_PREFIXES = ("time_embed", "temporal_blocks")


def init_params(cfg: ModelConfig, rng: SeededRng) -> Params:
    d = cfg.dim
    emb_std = d ** -0.5
    return Params(
        patch_proj=rng.normal_array((cfg.patch_features, d), cfg.patch_features ** -0.5),
        class_token=rng.normal_array((d,), emb_std),
        pos_embed=rng.normal_array((cfg.tokens_per_frame, d), emb_std),
        time_embed=rng.normal_array((cfg.frames, d), emb_std),
        spatial_blocks=[init_block_params(rng, d, cfg.heads) for _ in range(cfg.image_layers)],
        temporal_blocks=[init_block_params(rng, d, cfg.heads) for _ in range(cfg.temporal_depth)],
        token_embed=rng.normal_array((cfg.vocab_size, d), emb_std),
        text_pos_embed=rng.normal_array((cfg.max_text_len, d), emb_std),
        text_blocks=[init_block_params(rng, d, cfg.heads) for _ in range(cfg.text_layers)],
        video_proj=rng.normal_array((d, cfg.shared_dim), emb_std),
        text_proj=rng.normal_array((d, cfg.shared_dim), emb_std),
    )


def _walk(obj: Any, prefix: str) -> Iterator[Tuple[str, Any]]:
    if is_dataclass(obj):
        for f in fields(obj):
            value = getattr(obj, f.name)
            if isinstance(value, int):
                continue
            yield from _walk(value, f"{prefix}.{f.name}" if prefix else f.name)
    elif isinstance(obj, list):
        for i, item in enumerate(obj):
            yield from _walk(item, f"{prefix}.{i}")
    else:
        yield prefix, obj


def named_tensors(params: Params) -> List[Tuple[str, Tensor]]:
    """按固定顺序列出 (名称, 张量)"""
    return list(_walk(params, ""))


def _rebuild(obj: Any, prefix: str, fn: Callable[[str, Any], Any]) -> Any:
    if is_dataclass(obj):
        updates = {}
        for f in fields(obj):
            value = getattr(obj, f.name)
            if isinstance(value, int):
                continue
            updates[f.name] = _rebuild(value, f"{prefix}.{f.name}" if prefix else f.name, fn)
        return replace(obj, **updates)
    if isinstance(obj, list):
        return [_rebuild(item, f"{prefix}.{i}", fn) for i, item in enumerate(obj)]
    return fn(prefix, obj)


def map_tensors(params: Params, fn: Callable[[str, Any], Any]) -> Params:
    return _rebuild(params, "", fn)


def bind_params(g: DiffGraph, params: Params) -> Tuple[Params, Dict[str, Var]]:
    """把参数登记为计算图叶子，返回同结构的 Var 参数与名称索引"""
    leaves: Dict[str, Var] = {}

    def to_leaf(name: str, value):
        leaf = g.param(value, name=name)
        leaves[name] = leaf
        return leaf

    return map_tensors(params, to_leaf), leaves


def copy_params(params: Params) -> Params:
    return map_tensors(params, lambda _, t: np.array(t, dtype=np.float64))


def parameter_count(params: Params) -> int:
    return int(sum(np.size(t) for _, t in named_tensors(params)))


def params_equal(a: Params, b: Params) -> bool:
    """逐位比较两组参数"""
    left, right = named_tensors(a), named_tensors(b)
    if [n for n, _ in left] != [n for n, _ in right]:
        return False
    return all(np.array_equal(x, y) for (_, x), (_, y) in zip(left, right))


# ---- CLVR 检查点 ---------------------------------------------------

def save_checkpoint(path: Union[str, Path], cfg: ModelConfig, params: Params,
                    tokenizer: Optional[Tokenizer] = None) -> Path:
    """
    写入检查点

    布局：magic "CLVR"，u32 版本，u32 长度前缀的配置 JSON，
    然后逐个张量：u32 名称长度、名称、u32 阶数、u32 各维、f64 LE 数据。
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"model": cfg.to_dict(), "vocab": tokenizer.vocab if tokenizer else None}
    config_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_VERSION, len(config_bytes)))
        f.write(config_bytes)
        for name, tensor in named_tensors(params):
            arr = np.asarray(tensor, dtype="<f8")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes(order="C"))

    logger.info(f"💾 检查点已保存: {path}")
    return path


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise DatasetFormatError(f"文件被截断: {self.path}")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def u32(self, count: int = 1) -> Tuple[int, ...]:
        return struct.unpack(f"<{count}I", self.take(4 * count))

    @property
    def exhausted(self) -> bool:
        return self.offset >= len(self.data)


def load_checkpoint(path: Union[str, Path]) -> Tuple[ModelConfig, Params, Optional[Tokenizer]]:
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)
    if reader.take(4) != CHECKPOINT_MAGIC:
        raise DatasetFormatError(f"检查点 magic 不匹配: {path}")
    (version,) = reader.u32()
    if version != CHECKPOINT_VERSION:
        raise UnsupportedVersionError(f"不支持的检查点版本 {version}", version=version)
    (length,) = reader.u32()
    header = json.loads(reader.take(length).decode("utf-8"))
    cfg = ModelConfig.from_dict(header["model"])
    tokenizer = Tokenizer(header["vocab"]) if header.get("vocab") else None

    tensors: Dict[str, np.ndarray] = {}
    while not reader.exhausted:
        (name_len,) = reader.u32()
        name = reader.take(name_len).decode("utf-8")
        (rank,) = reader.u32()
        dims = reader.u32(rank) if rank else ()
        count = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(reader.take(8 * count), dtype="<f8").astype(np.float64)
        tensors[name] = data.reshape(dims)

    template = init_params(cfg, SeededRng(0))
    expected = [n for n, _ in named_tensors(template)]
    missing = [n for n in expected if n not in tensors]
    if missing:
        raise DatasetFormatError(f"检查点缺少参数: {missing[:3]}")
    params = map_tensors(template, lambda name, _: tensors[name])
    logger.info(f"📂 检查点已加载: {path} ({len(tensors)} 个张量)")
    return cfg, params, tokenizer
