"""
相似度、对比损失与推理打分
"""

from typing import Sequence

import numpy as np

from ..numerics import DiffGraph, Tensor, Var
from ..utils.errors import NumericalError, ShapeError


def cosine_sim(v, c) -> float:
    """<v, c> / (|v| |c|)"""
    v = np.asarray(v, dtype=np.float64).ravel()
    c = np.asarray(c, dtype=np.float64).ravel()
    if v.shape != c.shape:
        raise ShapeError(f"向量维度不一致: {v.shape} vs {c.shape}")
    nv, nc = np.linalg.norm(v), np.linalg.norm(c)
    if nv == 0.0 or nc == 0.0:
        raise NumericalError("零向量的余弦相似度无定义")
    return float(np.clip(v @ c / (nv * nc), -1.0, 1.0))


def similarity_logits(g: DiffGraph, video_emb: Tensor, text_emb: Tensor) -> Var:
    """
    视频与文本表示的余弦相似度

    Args:
        video_emb: (B, D')
        text_emb: (M, K, D')，M 条描述 x K 个类别

    Returns:
        (M, B, K) 的相似度
    """
    v = g.l2_normalize(video_emb)
    c = g.l2_normalize(text_emb)
    c_t = g.transpose(c, (0, 2, 1))
    return g.matmul(v, c_t)


def _check_labels(labels, batch: int, classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (batch,):
        raise ShapeError(f"标签形状应为 ({batch},)，实际 {labels.shape}")
    if labels.min() < 0 or labels.max() >= classes:
        raise ShapeError(f"标签超出类别范围 [0, {classes})")
    return labels


def loss_from_similarities(g: DiffGraph, sims: Tensor, labels: Sequence[int], temperature: float) -> Var:
    """
    对比损失：-(1 / (B * |sub M|)) * sum_m sum_i log softmax_k(sim / tau)[label_i]

    Args:
        sims: (M, B, K) 或 (B, K)
    """
    sims = g.lift(sims)
    if sims.ndim == 2:
        sims = g.reshape(sims, (1, *sims.shape))
    m, b, k = sims.shape
    labels = _check_labels(labels, b, k)
    logp = g.log_softmax(g.scale(sims, 1.0 / temperature))
    picked = g.getitem(logp, (slice(None), np.arange(b), labels))
    return g.neg(g.mean(picked))


def contrastive_loss(g: DiffGraph, video_emb: Tensor, text_emb: Tensor,
                     labels: Sequence[int], temperature: float) -> Var:
    return loss_from_similarities(g, similarity_logits(g, video_emb, text_emb), labels, temperature)


def score_from_similarities(sims, temperature: float) -> np.ndarray:
    """
    推理打分：每条描述位置 m 上对类别做 log-softmax 后求和

    Args:
        sims: (M, B, K) 或 (M, K)

    Returns:
        (B, K) 或 (K,) 的类别得分
    """
    sims = np.asarray(sims, dtype=np.float64)
    squeeze = sims.ndim == 2
    if squeeze:
        sims = sims[:, None, :]
    g = DiffGraph(record=False)
    scores = g.sum(g.log_softmax(g.constant(sims / temperature)), axis=0).value
    return scores[0] if squeeze else scores


def score(video_emb, text_emb, temperature: float) -> np.ndarray:
    """视频表示 (B, D') 与描述表示 (M, K, D') 的类别得分 (B, K)"""
    g = DiffGraph(record=False)
    sims = similarity_logits(g, g.constant(video_emb), g.constant(text_emb)).value
    return score_from_similarities(sims, temperature)


def predict(scores: np.ndarray) -> np.ndarray:
    return np.argmax(scores, axis=-1)
