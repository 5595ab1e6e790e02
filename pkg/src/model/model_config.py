"""
模型配置
视频-文本对比模型的全部超参数与时序编码器类型
"""

from dataclasses import asdict, dataclass, fields, replace
from enum import Enum
from typing import Any, Dict, Optional

from ..attention import SCALE_MODEL_DIM, SCALE_PER_HEAD
from ..masks import MaskKind
from ..utils.errors import ConfigError


class TemporalKind(str, Enum):
    """时序编码器类型"""
    KMT = "kmt"
    KMCT = "kmct"
    JOINT = "joint"
    PIPELINE = "pipeline"
    CLASS_TOKEN_ONLY = "cls"
    MEAN_POOL = "meanpool"

    @property
    def mask_kind(self) -> Optional[MaskKind]:
        """对应的 n x n 掩码类型；cls 与 meanpool 不使用完整掩码"""
        return {
            TemporalKind.KMT: MaskKind.KMT,
            TemporalKind.KMCT: MaskKind.KMCT,
            TemporalKind.JOINT: MaskKind.JOINT,
            TemporalKind.PIPELINE: MaskKind.PIPELINE,
        }.get(self)


# 时序层数规则：图像编码器层数的 1/3（默认）、1/6，或固定 1 层
TEMPORAL_LAYER_RULES = {"third": 3, "sixth": 6, "one": None}


def temporal_layers_for(image_layers: int, scale: str = "third") -> int:
    if scale not in TEMPORAL_LAYER_RULES:
        raise ConfigError(f"未知时序层数规则: {scale}")
    divisor = TEMPORAL_LAYER_RULES[scale]
    if divisor is None:
        return 1
    return max(1, image_layers // divisor)


@dataclass(frozen=True)
class ModelConfig:
    """模型超参数，默认值为桌面级玩具配置"""
    frames: int = 8
    height: int = 16
    width: int = 16
    channels: int = 1
    patch: int = 4
    dim: int = 32
    heads: int = 4
    image_layers: int = 3
    temporal_layers: Optional[int] = None
    temporal_layer_scale: str = "third"
    text_layers: int = 2
    vocab_size: int = 2
    max_text_len: int = 16
    num_classes: int = 4
    descriptions_per_class: int = 8
    temperature: float = 0.07
    temporal_kind: TemporalKind = TemporalKind.KMT
    scale_mode: str = SCALE_PER_HEAD
    proj_dim: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "temporal_kind", TemporalKind(self.temporal_kind))
        self.validate()

    @property
    def patches(self) -> int:
        return (self.height // self.patch) * (self.width // self.patch)

    @property
    def tokens_per_frame(self) -> int:
        return self.patches + 1

    @property
    def temporal_depth(self) -> int:
        if self.temporal_layers is not None:
            return self.temporal_layers
        return temporal_layers_for(self.image_layers, self.temporal_layer_scale)

    @property
    def shared_dim(self) -> int:
        return self.dim if self.proj_dim is None else self.proj_dim

    @property
    def patch_features(self) -> int:
        return self.patch * self.patch * self.channels

    def validate(self):
        positive = ("frames", "height", "width", "channels", "patch", "dim", "heads",
                    "max_text_len", "num_classes", "descriptions_per_class")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} 必须为正整数，实际 {getattr(self, name)}")
        if self.height % self.patch or self.width % self.patch:
            raise ConfigError(f"帧尺寸 {self.height}x{self.width} 不能被 patch {self.patch} 整除")
        if self.dim % self.heads:
            raise ConfigError(f"模型维度 {self.dim} 不能被头数 {self.heads} 整除")
        if self.image_layers < 0 or self.text_layers < 0:
            raise ConfigError("层数不能为负")
        if self.temporal_layers is not None and self.temporal_layers < 0:
            raise ConfigError("时序层数不能为负")
        if self.temperature <= 0:
            raise ConfigError(f"温度必须为正，实际 {self.temperature}")
        if self.scale_mode not in (SCALE_PER_HEAD, SCALE_MODEL_DIM):
            raise ConfigError(f"未知缩放模式: {self.scale_mode}")
        if self.vocab_size < 2:
            raise ConfigError("词表至少包含 pad 与 unk")
        temporal_layers_for(self.image_layers, self.temporal_layer_scale)

    def with_overrides(self, **overrides) -> "ModelConfig":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"未知模型配置项: {sorted(unknown)}")
        return replace(self, **overrides)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["temporal_kind"] = self.temporal_kind.value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})
