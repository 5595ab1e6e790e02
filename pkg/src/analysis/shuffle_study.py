"""
时空同质化（token 打乱）研究
在时序编码器层面检验 f(Px) 与 P f(x)，并统计打乱对相似度、预测与准确率的影响
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from ..masks import build_mask, conjugate_entries, is_frame_preserving
from ..model import (
    ModelConfig,
    Params,
    ShuffleStage,
    TemporalKind,
    Tokenizer,
    TokenShuffle,
    class_text_embeddings,
    evaluate,
    image_encode,
    patch_embed,
    predict,
    score,
    temporal_encode,
)
from ..model.claver_encoder import as_frames, embed_videos
from ..model.tokenizer import TextDescription
from ..numerics import DiffGraph, SeededRng
from ..utils.errors import ConfigError
from .study_report import StudyReport

logger = logging.getLogger(__name__)

EQUIVARIANCE_TOL = 1e-10
VIOLATION_TOL = 1e-6
VIOLATION_RATE = 0.99
MAX_RESAMPLES = 1000


class PermutationClass(str, Enum):
    ANY = "any"
    FRAME_PRESERVING = "frame_preserving"
    FRAME_MIXING = "frame_mixing"
    PATCH_FRAME_MIXING = "patch_frame_mixing"


@dataclass(frozen=True)
class ShuffleSpec:
    stage: ShuffleStage
    permutation: tuple
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "stage", ShuffleStage(self.stage))
        perm = tuple(int(i) for i in self.permutation)
        if sorted(perm) != list(range(len(perm))):
            raise ConfigError("置换必须是 0..n-1 的双射")
        object.__setattr__(self, "permutation", perm)

    def token_shuffle(self) -> Optional[TokenShuffle]:
        if self.stage == ShuffleStage.NONE:
            return None
        return TokenShuffle(self.stage, self.permutation)


def sample_permutation(perm_class: PermutationClass, t: int, s: int, rng: SeededRng) -> np.ndarray:
    """
    按类别抽取 T*S 个 token 的置换

    frame_preserving 在每帧内部独立置换槽位；frame_mixing 为不保持帧归属的任意置换；
    patch_frame_mixing 固定每帧的类 token（槽位 0），只在各帧 patch 之间跨帧置换
    """
    perm_class = PermutationClass(perm_class)
    n = t * s
    if perm_class == PermutationClass.ANY:
        return rng.permutation(n)
    if perm_class == PermutationClass.FRAME_PRESERVING:
        return np.concatenate([f * s + rng.permutation(s) for f in range(t)])

    if t < 2:
        raise ConfigError("跨帧置换至少需要两帧")
    if perm_class == PermutationClass.PATCH_FRAME_MIXING and s < 2:
        raise ConfigError("patch 跨帧置换需要每帧至少一个 patch")
    for _ in range(MAX_RESAMPLES):
        if perm_class == PermutationClass.FRAME_MIXING:
            perm = rng.permutation(n)
        else:
            patches = np.array([i for i in range(n) if i % s != 0])
            perm = np.arange(n)
            perm[patches] = patches[rng.permutation(patches.size)]
        if not is_frame_preserving(perm, t, s):
            return perm
    raise ConfigError(f"{MAX_RESAMPLES} 次抽样内未得到跨帧置换")


def expected_equivariant(kind: TemporalKind, stage: ShuffleStage, perm: Sequence[int], t: int, s: int) -> bool:
    """掩码在置换共轭下不变，且（PreTE 时）置换不跨帧，则 f(Px) = P f(x)"""
    kind = TemporalKind(kind)
    perm = np.asarray(perm, dtype=np.int64)
    if kind == TemporalKind.MEAN_POOL:
        mask_ok = True
    elif kind == TemporalKind.CLASS_TOKEN_ONLY:
        cls_positions = np.arange(t) * s
        mask_ok = bool(np.array_equal(np.sort(perm[cls_positions]), cls_positions))
    else:
        entries = build_mask(kind.mask_kind, t, s).entries
        mask_ok = bool(np.array_equal(conjugate_entries(entries, perm), entries))
    if ShuffleStage(stage) == ShuffleStage.PRE_TE:
        return mask_ok and is_frame_preserving(perm, t, s)
    return mask_ok


def equivariance_delta(params: Params, cfg: ModelConfig, clips, spec: ShuffleSpec) -> float:
    """时序编码器输出的 max |f(Px) - P f(x)|"""
    shuffle = spec.token_shuffle()
    if shuffle is None:
        return 0.0
    g = DiffGraph(record=False)
    reps = image_encode(g, patch_embed(g, as_frames(clips), cfg, params), cfg, params)
    base = temporal_encode(g, reps, cfg, params).value
    shuffled = temporal_encode(g, reps, cfg, params, shuffle).value
    b, t, s, d = base.shape
    perm = np.asarray(spec.permutation, dtype=np.int64)
    permuted_base = base.reshape(b, t * s, d)[:, perm]
    return float(np.max(np.abs(shuffled.reshape(b, t * s, d) - permuted_base)))


def shuffle_study(params: Params, cfg: ModelConfig, tokenizer: Tokenizer, clips,
                  descriptions: Mapping[int, Sequence[TextDescription]], stage: ShuffleStage,
                  perm_class: PermutationClass, trials: int = 100, seed: int = 0) -> StudyReport:
    """
    打乱研究

    每次试验抽一个置换，记录 (a) 等变误差 (b) 打乱前后与真实类别描述的相似度 (c) 预测是否改变
    """
    stage, perm_class = ShuffleStage(stage), PermutationClass(perm_class)
    t, s = cfg.frames, cfg.tokens_per_frame
    labels = np.asarray([c.class_id for c in clips], dtype=np.int64)
    text_emb = class_text_embeddings(params, cfg, tokenizer, descriptions)
    base_video = embed_videos(params, cfg, clips)
    base_sims = _true_class_similarity(base_video, text_emb, labels)
    base_pred = predict(score(base_video, text_emb, cfg.temperature))

    records: List[Dict[str, Any]] = []
    for i in range(trials):
        rng = SeededRng.derive(seed, i)
        perm = sample_permutation(perm_class, t, s, rng)
        shuffle_spec = ShuffleSpec(stage, tuple(perm.tolist()), seed)
        delta = equivariance_delta(params, cfg, clips, shuffle_spec)
        video = embed_videos(params, cfg, clips, shuffle=shuffle_spec.token_shuffle())
        sims = _true_class_similarity(video, text_emb, labels)
        pred = predict(score(video, text_emb, cfg.temperature))
        records.append({
            "trial": i,
            "frame_preserving": is_frame_preserving(perm, t, s),
            "expected_equivariant": expected_equivariant(cfg.temporal_kind, stage, perm, t, s),
            "delta": delta,
            "similarity_before": float(np.mean(base_sims)),
            "similarity_after": float(np.mean(sims)),
            "prediction_changed": int(np.count_nonzero(pred != base_pred)),
        })

    expected = [r for r in records if r["expected_equivariant"]]
    unexpected = [r for r in records if not r["expected_equivariant"]]
    violations = sum(1 for r in unexpected if r["delta"] > VIOLATION_TOL)
    report = StudyReport(
        study=f"shuffle-{cfg.temporal_kind.value}-{stage.value}-{perm_class.value}",
        seed=seed,
        config={"kind": cfg.temporal_kind.value, "stage": stage.value, "permutation_class": perm_class.value,
                "trials": trials, "clips": len(labels), "model": cfg.to_dict()},
        trials=records,
        summary={
            "equivariant_trials": len(expected),
            "max_delta_equivariant": max((r["delta"] for r in expected), default=0.0),
            "violations": violations,
            "violation_rate": violations / len(unexpected) if unexpected else None,
            "mean_similarity_drop": float(np.mean([r["similarity_before"] - r["similarity_after"]
                                                   for r in records])),
            "mean_prediction_changes": float(np.mean([r["prediction_changed"] for r in records])),
        },
    )
    if expected:
        report.add_check("掩码共轭不变的置换下时序编码器等变",
                         all(r["delta"] <= EQUIVARIANCE_TOL for r in expected),
                         f"max delta={report.summary['max_delta_equivariant']:.3e}")
    if unexpected and cfg.temporal_kind in (TemporalKind.KMT, TemporalKind.KMCT) \
            and perm_class == PermutationClass.FRAME_MIXING:
        report.add_check("跨帧置换破坏 KMT/KMCT 等变性", violations >= VIOLATION_RATE * len(unexpected),
                         f"{violations}/{len(unexpected)}")
    return report


def _true_class_similarity(video_emb: np.ndarray, text_emb: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """每个片段与其真实类别各描述的平均余弦相似度"""
    v = video_emb / np.linalg.norm(video_emb, axis=-1, keepdims=True)
    c = text_emb / np.linalg.norm(text_emb, axis=-1, keepdims=True)
    sims = np.einsum("bd,mkd->bmk", v, c)
    return sims[np.arange(labels.size), :, labels].mean(axis=-1)


def shuffle_accuracy_study(models: Mapping[str, Any], clips,
                           descriptions: Mapping[int, Sequence[TextDescription]],
                           perm_class: PermutationClass = PermutationClass.PATCH_FRAME_MIXING,
                           stage: ShuffleStage = ShuffleStage.POST_TE, permutations: int = 5,
                           seed: int = 0) -> StudyReport:
    """
    打乱前后的准确率下降

    Args:
        models: 类型名 -> 带 params / config / tokenizer 属性的训练结果
        permutations: 每个模型评估的置换个数（取平均）
    """
    records = []
    drops: Dict[str, float] = {}
    for name in sorted(models):
        model = models[name]
        cfg = model.config
        base = evaluate(model.params, cfg, model.tokenizer, clips, descriptions).accuracy
        shuffled = []
        for i in range(permutations):
            perm = sample_permutation(perm_class, cfg.frames, cfg.tokens_per_frame, SeededRng.derive(seed, i))
            shuffle = TokenShuffle(ShuffleStage(stage), tuple(perm.tolist()))
            shuffled.append(evaluate(model.params, cfg, model.tokenizer, clips, descriptions,
                                     shuffle=shuffle).accuracy)
        drops[name] = base - float(np.mean(shuffled))
        records.append({"kind": name, "accuracy": base, "shuffled_accuracy": float(np.mean(shuffled)),
                        "per_permutation": shuffled, "drop": drops[name]})
        logger.info(f"📊 {name}: 准确率 {base:.3f} -> {np.mean(shuffled):.3f}")

    report = StudyReport(
        study="shuffle-accuracy",
        seed=seed,
        config={"kinds": sorted(models), "permutation_class": PermutationClass(perm_class).value,
                "stage": ShuffleStage(stage).value, "permutations": permutations, "clips": len(clips)},
        trials=records,
        summary={"drops": drops},
    )
    joint = TemporalKind.JOINT.value
    if joint in drops:
        for kind in (TemporalKind.KMT.value, TemporalKind.KMCT.value):
            if kind in drops:
                report.add_check(f"打乱后 {kind} 的准确率下降大于 joint", drops[kind] > drops[joint],
                                 f"{drops[kind]:.3f} vs {drops[joint]:.3f}")
    return report
