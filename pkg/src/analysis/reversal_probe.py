"""
帧序反转探针
在反转对数据集上比较各时序类型：MeanPool 对片段与其反转的表示逐位相同，只能达到随机水平；
KMT/KMCT 需要明显超过它
"""

import logging
from typing import Any, Dict, Mapping, Sequence

import numpy as np

from ..model import TemporalKind, class_text_embeddings, embed_videos, predict, score
from ..model.tokenizer import TextDescription
from ..synthdata import DatasetConfig, reversed_clip
from .study_report import StudyReport

logger = logging.getLogger(__name__)

MEANPOOL_MAX_ACCURACY = 0.60
TEMPORAL_MIN_ACCURACY = 0.90
MIN_MARGIN = 0.30


def pair_accuracy(scores: np.ndarray, labels: np.ndarray, pair) -> float:
    """只在一对反转类别之间二选一的准确率"""
    i, j = pair
    rows = np.isin(labels, [i, j])
    if not rows.any():
        return float("nan")
    restricted = scores[rows][:, [i, j]]
    chosen = np.where(np.argmax(restricted, axis=1) == 0, i, j)
    return float(np.mean(chosen == labels[rows]))


def reversal_equality(params, cfg, clips, dataset_cfg: DatasetConfig) -> float:
    """max |repr(x) - repr(reverse(x))|"""
    forward = embed_videos(params, cfg, clips)
    backward = embed_videos(params, cfg, [reversed_clip(c, dataset_cfg) for c in clips])
    return float(np.max(np.abs(forward - backward)))


def probe_model(model: Any, clips, descriptions: Mapping[int, Sequence[TextDescription]],
                dataset_cfg: DatasetConfig) -> Dict[str, Any]:
    cfg = model.config
    labels = np.asarray([c.class_id for c in clips], dtype=np.int64)
    text_emb = class_text_embeddings(model.params, cfg, model.tokenizer, descriptions)
    scores = score(embed_videos(model.params, cfg, clips), text_emb, cfg.temperature)
    preds = predict(scores)

    # 片段与其反转一起评估；表示相同的模型在每对上恰好对一个
    reversed_clips = [reversed_clip(c, dataset_cfg) for c in clips]
    rev_labels = np.asarray([c.class_id for c in reversed_clips], dtype=np.int64)
    rev_preds = predict(score(embed_videos(model.params, cfg, reversed_clips), text_emb, cfg.temperature))
    both = np.concatenate([preds == labels, rev_preds == rev_labels])

    return {
        "kind": cfg.temporal_kind.value,
        "accuracy": float(np.mean(preds == labels)),
        "pair_accuracy": {f"{dataset_cfg.classes[i]}/{dataset_cfg.classes[j]}": pair_accuracy(scores, labels, (i, j))
                          for i, j in dataset_cfg.reversal_pairs()},
        "augmented_accuracy": float(np.mean(both)),
        "reversal_max_diff": reversal_equality(model.params, cfg, clips, dataset_cfg),
    }


def reversal_probe(models: Mapping[str, Any], clips, descriptions: Mapping[int, Sequence[TextDescription]],
                   dataset_cfg: DatasetConfig, seed: int = 0) -> StudyReport:
    """
    反转探针

    Args:
        models: 类型名 -> 训练结果（params / config / tokenizer）
        clips: 验证片段
        descriptions: 类别描述
        dataset_cfg: 数据集配置（提供反转对）
    """
    records = [probe_model(models[name], clips, descriptions, dataset_cfg) for name in sorted(models)]
    by_kind = {r["kind"]: r for r in records}
    report = StudyReport(
        study="reversal",
        seed=seed,
        config={"kinds": sorted(models), "clips": len(clips), "dataset": dataset_cfg.to_dict(),
                "thresholds": {"meanpool_max": MEANPOOL_MAX_ACCURACY, "temporal_min": TEMPORAL_MIN_ACCURACY,
                               "margin": MIN_MARGIN}},
        trials=records,
        summary={kind: r["accuracy"] for kind, r in sorted(by_kind.items())},
    )

    mean = by_kind.get(TemporalKind.MEAN_POOL.value)
    if mean is not None:
        report.add_check("MeanPool 对反转片段的表示逐位相同", mean["reversal_max_diff"] == 0.0,
                         f"max diff={mean['reversal_max_diff']}")
        report.add_check("MeanPool 验证准确率不超过 60%", mean["accuracy"] <= MEANPOOL_MAX_ACCURACY,
                         f"{mean['accuracy']:.3f}")
    for kind in (TemporalKind.KMT.value, TemporalKind.KMCT.value):
        r = by_kind.get(kind)
        if r is None:
            continue
        report.add_check(f"{kind} 验证准确率至少 90%", r["accuracy"] >= TEMPORAL_MIN_ACCURACY,
                         f"{r['accuracy']:.3f}")
        if mean is not None:
            margin = r["accuracy"] - mean["accuracy"]
            report.add_check(f"{kind} 比 MeanPool 至少高 30 个百分点", margin >= MIN_MARGIN, f"{margin:.3f}")
    return report
