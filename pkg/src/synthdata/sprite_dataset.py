"""
合成运动数据集
亮色方块每帧沿类别方向平移一个像素（环绕边界），叠加均匀噪声；
左/右、上/下两两构成帧序反转对，只有时序模型能够区分
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..model.tokenizer import DescriptionKind, TextDescription
from ..numerics import SeededRng
from ..prompts import DescriptionStore, assemble_description_set
from ..prompts.interpretive_prompts import Aspect, get_fixture
from ..utils.errors import ConfigError, GeometryError

logger = logging.getLogger(__name__)

# 类别名 -> (行方向, 列方向)
DIRECTIONS: Dict[str, Tuple[int, int]] = {
    "move_left": (0, -1),
    "move_right": (0, 1),
    "move_up": (-1, 0),
    "move_down": (1, 0),
}

DEFAULT_CLASSES = ("move_left", "move_right", "move_up", "move_down")


def class_label(name: str) -> str:
    """move_left -> "moving left" """
    return "moving " + name.split("_", 1)[1]


@dataclass(frozen=True, eq=False)
class VideoClip:
    frames: np.ndarray  # (T, H, W, C)，取值 [0, 1]
    class_id: int
    instance_seed: int = 0

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.frames.shape)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VideoClip):
            return NotImplemented
        return (self.class_id == other.class_id and self.instance_seed == other.instance_seed
                and np.array_equal(self.frames, other.frames))


@dataclass(frozen=True)
class DatasetConfig:
    """合成数据集配置"""
    classes: Tuple[str, ...] = DEFAULT_CLASSES
    train_per_class: int = 200
    val_per_class: int = 50
    frames: int = 8
    height: int = 16
    width: int = 16
    channels: int = 1
    sprite: int = 4
    noise: float = 0.05
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))

    def validate(self):
        unknown = [c for c in self.classes if c not in DIRECTIONS]
        if unknown:
            raise ConfigError(f"未知的运动类别: {unknown}")
        if len(set(self.classes)) != len(self.classes):
            raise ConfigError("类别名重复")
        missing = [c for c in self.classes if reversal_partner(c) not in self.classes]
        if missing:
            raise ConfigError(f"类别缺少反转对: {missing}")
        if self.train_per_class < 1 or self.val_per_class < 1:
            raise ConfigError("每类样本数必须 >= 1")
        if min(self.frames, self.height, self.width, self.channels) < 1:
            raise ConfigError("帧几何必须为正")
        if self.sprite < 1 or self.sprite > min(self.height, self.width):
            raise GeometryError(f"方块尺寸 {self.sprite} 超出帧 {self.height}x{self.width}")
        if not 0.0 <= self.noise <= 1.0:
            raise ConfigError(f"噪声幅度必须在 [0, 1]，得到 {self.noise}")

    @property
    def labels(self) -> List[str]:
        return [class_label(c) for c in self.classes]

    def reversal_pairs(self) -> List[Tuple[int, int]]:
        """(i, j) 且 i < j 的反转类别对"""
        pairs = []
        for i, name in enumerate(self.classes):
            j = self.classes.index(reversal_partner(name))
            if i < j:
                pairs.append((i, j))
        return pairs

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["classes"] = list(self.classes)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "DatasetConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class Dataset:
    config: DatasetConfig
    train: List[VideoClip] = field(default_factory=list)
    val: List[VideoClip] = field(default_factory=list)


def reversal_partner(name: str) -> str:
    dr, dc = DIRECTIONS[name]
    for other, d in DIRECTIONS.items():
        if d == (-dr, -dc):
            return other
    raise ConfigError(f"{name} 没有反转对")


def render_clip(cfg: DatasetConfig, direction: Tuple[int, int], start: Tuple[int, int],
                noise: Optional[np.ndarray] = None) -> np.ndarray:
    """第 t 帧方块左上角位于 start + t * direction（模 H, W）"""
    if cfg.sprite > min(cfg.height, cfg.width):
        raise GeometryError(f"方块尺寸 {cfg.sprite} 超出帧 {cfg.height}x{cfg.width}")
    frames = np.zeros((cfg.frames, cfg.height, cfg.width, cfg.channels), dtype=np.float64)
    offsets = np.arange(cfg.sprite)
    for t in range(cfg.frames):
        r = (start[0] + direction[0] * t + offsets) % cfg.height
        c = (start[1] + direction[1] * t + offsets) % cfg.width
        frames[t][np.ix_(r, c)] = 1.0
    if noise is not None:
        frames = np.clip(frames + noise, 0.0, 1.0)
    # 像素先量化到 f32，保证存盘往返逐位一致
    return frames.astype(np.float32).astype(np.float64)


def make_clip(cfg: DatasetConfig, class_index: int, index: int) -> VideoClip:
    """按 (seed, 类别, 全局序号) 派生随机流生成一个片段"""
    rng = SeededRng.derive(cfg.seed, class_index, index)
    start = (rng.integers(cfg.height), rng.integers(cfg.width))
    shape = (cfg.frames, cfg.height, cfg.width, cfg.channels)
    noise = rng.uniform_array(shape, -cfg.noise, cfg.noise) if cfg.noise > 0 else None
    frames = render_clip(cfg, DIRECTIONS[cfg.classes[class_index]], start, noise)
    return VideoClip(frames, class_index, index)


def generate(cfg: DatasetConfig) -> Dataset:
    """
    生成训练/验证划分

    训练集使用序号 [0, train_per_class)，验证集使用其后的序号，两者天然不相交。
    """
    cfg.validate()
    dataset = Dataset(cfg)
    for k in range(len(cfg.classes)):
        for i in range(cfg.train_per_class):
            dataset.train.append(make_clip(cfg, k, i))
        for i in range(cfg.train_per_class, cfg.train_per_class + cfg.val_per_class):
            dataset.val.append(make_clip(cfg, k, i))
    logger.info(f"✅ 合成数据集生成完成: {len(cfg.classes)} 类, "
                f"训练 {len(dataset.train)}, 验证 {len(dataset.val)}, seed={cfg.seed}")
    return dataset


def reversed_clip(clip: VideoClip, cfg: DatasetConfig) -> VideoClip:
    """帧序反转，类别换成反转对"""
    partner = cfg.classes.index(reversal_partner(cfg.classes[clip.class_id]))
    return VideoClip(clip.frames[::-1].copy(), partner, clip.instance_seed)


def default_description_store(cfg: DatasetConfig,
                              aspects: Sequence[Aspect] = (Aspect.DECOMPOSITION, Aspect.SYNONYM)
                              ) -> DescriptionStore:
    """标签 + 内置的手写解释性描述"""
    store = DescriptionStore()
    for k, label in enumerate(cfg.labels):
        store.add_label(k, label)
        for aspect in aspects:
            fixture = get_fixture(aspect, label)
            if fixture is not None:
                text, source = fixture
                store.add(TextDescription(k, DescriptionKind.INTERPRETIVE, text,
                                          aspect=Aspect(aspect).value, source=source))
    return store


def captions_for(class_id: int, store: DescriptionStore, m: int = 1,
                 templates: Optional[Sequence[str]] = None) -> List[TextDescription]:
    """单个类别的 M 条描述，委托给 assemble_description_set"""
    if templates is None:
        return assemble_description_set(store, [class_id], m)[class_id]
    return assemble_description_set(store, [class_id], m, templates)[class_id]


def descriptions_for(cfg: DatasetConfig, store: DescriptionStore, m: int,
                     templates: Optional[Sequence[str]] = None,
                     aspects: Optional[Sequence[str]] = None) -> Dict[int, List[TextDescription]]:
    classes = list(range(len(cfg.classes)))
    if templates is None:
        return assemble_description_set(store, classes, m, aspects=aspects)
    return assemble_description_set(store, classes, m, templates, aspects)
