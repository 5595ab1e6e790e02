"""
训练与评估
AdamW（beta = 0.9/0.98）、线性预热 + 余弦衰减、时序模块学习率倍率、可选冻结图像编码器；
提供验证集时按验证准确率保留最佳 epoch 的参数；
每步对每个类别均匀采样 sub{M} 条描述
"""

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from ..numerics import DiffGraph, SeededRng
from ..utils.errors import ConfigError, DescriptionError, TrainingDivergedError
from .claver_encoder import as_frames, embed_texts, embed_videos, encode_video, text_encode
from .model_config import ModelConfig
from .objective import contrastive_loss, predict, score
from .params import (
    IMAGE_ENCODER_PREFIXES,
    TEMPORAL_PREFIXES,
    Params,
    bind_params,
    init_params,
    map_tensors,
    named_tensors,
)
from .tokenizer import TextDescription, Tokenizer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    """优化器与训练循环配置"""
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-8
    weight_decay: float = 0.001
    epochs: int = 30
    batch_size: int = 16
    warmup_epochs: int = 1
    cosine_decay: bool = True
    min_lr_ratio: float = 0.01
    temporal_lr_mult: float = 1.0
    freeze_image_encoder: bool = False
    descriptions_per_step: int = 1
    early_stop_accuracy: Optional[float] = None
    restore_best: bool = True
    eval_batch_size: int = 64

    def validate(self):
        if self.lr < 0:
            raise ConfigError(f"学习率不能为负: {self.lr}")
        if self.epochs < 0 or self.batch_size < 1 or self.descriptions_per_step < 1:
            raise ConfigError("epochs/batch_size/descriptions_per_step 配置非法")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("beta 必须位于 [0, 1)")

    def to_dict(self) -> Dict:
        return asdict(self)


def learning_rate(cfg: OptimizerConfig, step: int, steps_per_epoch: int) -> float:
    """第 step 步（从 0 计）的学习率"""
    warmup = cfg.warmup_epochs * steps_per_epoch
    total = max(cfg.epochs * steps_per_epoch, 1)
    if step < warmup:
        return cfg.lr * (step + 1) / warmup
    if not cfg.cosine_decay:
        return cfg.lr
    progress = min(1.0, (step - warmup) / max(total - warmup, 1))
    floor = cfg.min_lr_ratio
    return cfg.lr * (floor + (1.0 - floor) * 0.5 * (1.0 + math.cos(math.pi * progress)))


class AdamW:
    """解耦权重衰减的 Adam"""

    def __init__(self, cfg: OptimizerConfig):
        self.cfg = cfg
        self.step_count = 0
        self._m: Dict[str, np.ndarray] = {}
        self._v: Dict[str, np.ndarray] = {}

    def lr_scale(self, name: str) -> float:
        if self.cfg.freeze_image_encoder and name.startswith(IMAGE_ENCODER_PREFIXES):
            return 0.0
        if name.startswith(TEMPORAL_PREFIXES):
            return self.cfg.temporal_lr_mult
        return 1.0

    def step(self, params: Params, grads: Dict[str, np.ndarray], lr: float) -> Params:
        self.step_count += 1
        b1, b2 = self.cfg.beta1, self.cfg.beta2
        bias1 = 1.0 - b1 ** self.step_count
        bias2 = 1.0 - b2 ** self.step_count

        def update(name: str, value: np.ndarray) -> np.ndarray:
            grad = grads.get(name)
            if grad is None:
                return value
            m = b1 * self._m.get(name, 0.0) + (1.0 - b1) * grad
            v = b2 * self._v.get(name, 0.0) + (1.0 - b2) * grad * grad
            self._m[name], self._v[name] = m, v
            step_lr = lr * self.lr_scale(name)
            if step_lr == 0.0:
                return value
            direction = (m / bias1) / (np.sqrt(v / bias2) + self.cfg.eps)
            return value - step_lr * (direction + self.cfg.weight_decay * value)

        return map_tensors(params, update)


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    fixed_batch_loss: float
    val_accuracy: Optional[float]
    lr: float


@dataclass
class EvalResult:
    accuracy: float
    predictions: List[int]
    labels: List[int]
    per_class_accuracy: Dict[int, float]
    confusion: List[List[int]]

    def to_dict(self) -> Dict:
        return {
            "accuracy": self.accuracy,
            "per_class_accuracy": {str(k): v for k, v in self.per_class_accuracy.items()},
            "confusion": self.confusion,
        }


@dataclass
class TrainResult:
    config: ModelConfig
    params: Params
    tokenizer: Tokenizer
    history: List[EpochMetrics] = field(default_factory=list)
    best_epoch: Optional[int] = None

    def history_dicts(self) -> List[Dict]:
        return [asdict(h) for h in self.history]


def _description_table(descriptions: Dict[int, Sequence[TextDescription]], tokenizer: Tokenizer,
                       cfg: ModelConfig) -> List[np.ndarray]:
    classes = sorted(descriptions)
    if classes != list(range(cfg.num_classes)):
        raise DescriptionError(f"描述类别 {classes} 与类别数 {cfg.num_classes} 不一致")
    table = []
    for k in classes:
        if not descriptions[k]:
            raise DescriptionError(f"类别 {k} 没有任何描述")
        table.append(tokenizer.encode_batch([d.text for d in descriptions[k]], cfg.max_text_len))
    return table


def class_text_embeddings(params: Params, cfg: ModelConfig, tokenizer: Tokenizer,
                          descriptions: Dict[int, Sequence[TextDescription]]) -> np.ndarray:
    """(M, K, D') 的描述表示；各类别描述数不同时取最小 M"""
    table = _description_table(descriptions, tokenizer, cfg)
    m = min(len(t) for t in table)
    if any(len(t) != m for t in table):
        logger.warning(f"⚠️ 各类别描述数不一致，评估时截断为 M={m}")
    ids = np.stack([t[:m] for t in table], axis=1)  # (M, K, N)
    flat = embed_texts(params, cfg, ids.reshape(-1, ids.shape[-1]))
    return flat.reshape(m, len(table), -1)


def evaluate(params: Params, cfg: ModelConfig, tokenizer: Tokenizer, clips,
             descriptions: Dict[int, Sequence[TextDescription]], batch_size: int = 64,
             shuffle=None) -> EvalResult:
    """按描述求和打分取 argmax，统计准确率与混淆矩阵"""
    labels = np.asarray([c.class_id for c in clips], dtype=np.int64)
    text_emb = class_text_embeddings(params, cfg, tokenizer, descriptions)
    video_emb = embed_videos(params, cfg, clips, batch_size, shuffle)
    preds = predict(score(video_emb, text_emb, cfg.temperature))

    k = cfg.num_classes
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (labels, preds), 1)
    per_class = {
        int(c): float(confusion[c, c] / confusion[c].sum())
        for c in range(k) if confusion[c].sum() > 0
    }
    accuracy = float(np.mean(preds == labels)) if labels.size else 0.0
    return EvalResult(accuracy, preds.tolist(), labels.tolist(), per_class, confusion.tolist())


def _batch_loss(params: Params, cfg: ModelConfig, frames: np.ndarray, labels: np.ndarray,
                text_ids: np.ndarray, graph: DiffGraph):
    m = text_ids.shape[0]
    video = encode_video(graph, frames, cfg, params)
    text = text_encode(graph, text_ids.reshape(-1, text_ids.shape[-1]), cfg, params)
    text = graph.reshape(text, (m, cfg.num_classes, cfg.shared_dim))
    return contrastive_loss(graph, video, text, labels, cfg.temperature)


def train(train_clips, descriptions: Dict[int, Sequence[TextDescription]], model_cfg: ModelConfig,
          opt_cfg: OptimizerConfig, seed: int, val_clips=None,
          tokenizer: Optional[Tokenizer] = None, progress: bool = False) -> TrainResult:
    """
    训练视频-文本对比模型

    Args:
        train_clips: 带 frames / class_id 的片段序列
        descriptions: 类别 id -> 描述列表
        model_cfg: 模型配置（vocab_size 由分词器覆盖）
        opt_cfg: 优化器配置
        seed: 随机种子，决定初始化、批次顺序与描述采样
        val_clips: 验证集，每个 epoch 结束后评估
        tokenizer: 预先构建的分词器，None 时由全部描述文本构建
        progress: 是否显示 tqdm 进度条

    Returns:
        TrainResult
    """
    opt_cfg.validate()
    if not train_clips:
        raise ConfigError("训练集为空")
    tokenizer = tokenizer or Tokenizer.build(d.text for ds in descriptions.values() for d in ds)
    cfg = replace(model_cfg, vocab_size=tokenizer.vocab_size)
    table = _description_table(descriptions, tokenizer, cfg)

    params = init_params(cfg, SeededRng.derive(seed, 0))
    sampler = SeededRng.derive(seed, 1)
    optimizer = AdamW(opt_cfg)

    frames = as_frames(train_clips)
    labels = np.asarray([c.class_id for c in train_clips], dtype=np.int64)
    n = frames.shape[0]
    bs = min(opt_cfg.batch_size, n)
    steps_per_epoch = math.ceil(n / bs)

    fixed_frames, fixed_labels = frames[:bs], labels[:bs]
    fixed_text = np.stack([t[0] for t in table])[None]

    result = TrainResult(cfg, params, tokenizer)
    logger.info(f"🚀 开始训练: kind={cfg.temporal_kind.value}, 样本={n}, epochs={opt_cfg.epochs}, seed={seed}")

    step = 0
    best_accuracy, best_params = -1.0, params
    epochs = tqdm(range(1, opt_cfg.epochs + 1), desc=f"train[{cfg.temporal_kind.value}]",
                  disable=not progress, leave=False)
    for epoch in epochs:
        order = sampler.permutation(n)
        losses = []
        lr = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            picks = [[table[k][sampler.integers(len(table[k]))] for k in range(cfg.num_classes)]
                     for _ in range(opt_cfg.descriptions_per_step)]
            text_ids = np.asarray(picks)  # (m, K, N)

            graph = DiffGraph()
            bound, leaves = bind_params(graph, params)
            loss = _batch_loss(bound, cfg, frames[idx], labels[idx], text_ids, graph)
            value = float(loss.value)
            if not np.isfinite(value):
                norms = {name: float(np.linalg.norm(t)) for name, t in named_tensors(params)}
                raise TrainingDivergedError(
                    f"训练在 epoch {epoch} step {step} 发散",
                    diagnostics={"epoch": epoch, "step": step,
                                 "last_loss": losses[-1] if losses else None,
                                 "param_norms": norms},
                )
            graph.backward(loss)
            grads = {name: leaf.grad for name, leaf in leaves.items() if leaf.grad is not None}
            lr = learning_rate(opt_cfg, step, steps_per_epoch)
            params = optimizer.step(params, grads, lr)
            losses.append(value)
            step += 1

        fixed_loss = float(_batch_loss(params, cfg, fixed_frames, fixed_labels, fixed_text,
                                       DiffGraph(record=False)).value)
        val_acc = None
        if val_clips:
            val_acc = evaluate(params, cfg, tokenizer, val_clips, descriptions,
                               opt_cfg.eval_batch_size).accuracy
            if val_acc > best_accuracy:
                best_accuracy, best_params = val_acc, params
                result.best_epoch = epoch
        metrics = EpochMetrics(epoch, float(np.mean(losses)), fixed_loss, val_acc, lr)
        result.history.append(metrics)
        val_text = f"{val_acc:.3f}" if val_acc is not None else "-"
        logger.info(f"📈 Epoch {epoch}: loss={metrics.train_loss:.4f}, "
                    f"fixed={fixed_loss:.4f}, val_acc={val_text}, lr={lr:.2e}")

        if (opt_cfg.early_stop_accuracy is not None and val_acc is not None
                and val_acc >= opt_cfg.early_stop_accuracy):
            logger.info(f"🎯 验证准确率 {val_acc:.3f} 达到提前停止阈值")
            break

    result.params = params
    if opt_cfg.restore_best and result.best_epoch is not None:
        result.params = best_params
        logger.info(f"💾 恢复验证准确率最高的 epoch {result.best_epoch}: {best_accuracy:.3f}")
    logger.info(f"✅ 训练完成: kind={cfg.temporal_kind.value}, epochs={len(result.history)}")
    return result
