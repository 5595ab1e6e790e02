"""
注意力矩阵秩研究
随机 token 与投影下逐头提取注意力矩阵，统计数值秩；
KMCT 的注意力矩阵为对角为正的下三角阵，必须满秩
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..attention import AttentionParams, attention_matrix, init_attention_params, zero_attention_params
from ..masks import MaskKind, build_mask
from ..numerics import SeededRng, jacobi_singular_values
from ..numerics.linalg import DEFAULT_REL_TOL
from ..utils.errors import ConfigError
from .study_report import StudyReport

logger = logging.getLogger(__name__)

CONSTRUCTIONS = ("random", "zero", "identity")


def _identity_construction(n: int) -> Tuple[np.ndarray, AttentionParams]:
    """x = I_n，单头，logits = c * I 且 e^c > n，使每行对角占优"""
    c = float(np.log(n) + 1.0)
    w = np.sqrt(c * np.sqrt(n)) * np.eye(n)
    return np.eye(n), AttentionParams(w, w.copy(), np.eye(n), np.eye(n), 1)


def _trial(kind: MaskKind, index: int, seed: int, t_range: Tuple[int, int], s_range: Tuple[int, int],
           dim: int, heads: int, construction: str, rel_tol: float) -> List[Dict]:
    rng = SeededRng.derive(seed, index)
    t = t_range[0] + rng.integers(t_range[1] - t_range[0] + 1)
    s = s_range[0] + rng.integers(s_range[1] - s_range[0] + 1)
    n = t * s
    mask = build_mask(kind, t, s)

    if construction == "identity":
        x, params = _identity_construction(n)
    elif construction == "zero":
        x, params = rng.normal_array((n, dim)), zero_attention_params(dim, heads)
    else:
        x, params = rng.normal_array((n, dim)), init_attention_params(rng, dim, heads)

    records = []
    for head in range(params.heads):
        a = attention_matrix(x, mask, params, head)
        sv = jacobi_singular_values(a)
        rank = int(np.count_nonzero(sv > rel_tol * sv[0])) if sv[0] > 0 else 0
        records.append({
            "trial": index, "t": t, "s": s, "n": n, "head": head,
            "rank": rank, "full_rank": rank == n,
            "min_sv_ratio": float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0,
        })
    return records


def rank_study(kind: Union[MaskKind, str], t_range: Sequence[int] = (2, 6), s_range: Sequence[int] = (2, 6),
               trials: int = 200, rel_tol: float = DEFAULT_REL_TOL, seed: int = 0, dim: int = 8,
               heads: int = 2, construction: str = "random", workers: int = 1) -> StudyReport:
    """
    秩研究

    Args:
        kind: 掩码类型
        t_range: 帧数闭区间，每次试验在其中均匀抽取
        s_range: 每帧 token 数闭区间
        trials: 试验次数
        rel_tol: 数值秩的相对阈值
        seed: 随机种子；第 i 次试验使用 derive(seed, i)
        dim: token 维度
        heads: 注意力头数
        construction: random / zero / identity
        workers: 线程数，结果与调度无关

    Returns:
        StudyReport
    """
    kind = MaskKind(kind)
    if trials < 1:
        raise ConfigError(f"试验次数必须 >= 1，得到 {trials}")
    if construction not in CONSTRUCTIONS:
        raise ConfigError(f"未知构造方式: {construction}，可选 {CONSTRUCTIONS}")
    t_range, s_range = tuple(int(v) for v in t_range), tuple(int(v) for v in s_range)
    if t_range[0] < 1 or s_range[0] < 1 or t_range[0] > t_range[1] or s_range[0] > s_range[1]:
        raise ConfigError(f"T/S 区间非法: {t_range}, {s_range}")

    def run(i: int) -> List[Dict]:
        return _trial(kind, i, seed, t_range, s_range, dim, heads, construction, rel_tol)

    logger.info(f"📊 秩研究开始: kind={kind.value}, trials={trials}, construction={construction}")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run, range(trials)))
    else:
        chunks = [run(i) for i in range(trials)]
    records = [r for chunk in chunks for r in chunk]

    full = sum(1 for r in records if r["full_rank"])
    histogram: Dict[str, int] = {}
    for r in records:
        key = f"{r['rank']}/{r['n']}"
        histogram[key] = histogram.get(key, 0) + 1

    report = StudyReport(
        study=f"rank-{kind.value}",
        seed=seed,
        config={"kind": kind.value, "t_range": list(t_range), "s_range": list(s_range), "trials": trials,
                "rel_tol": rel_tol, "dim": dim, "heads": heads, "construction": construction},
        trials=records,
        summary={"matrices": len(records), "full_rank": full,
                 "full_rank_rate": full / len(records),
                 "rank_histogram": dict(sorted(histogram.items())),
                 "min_sv_ratio": min(r["min_sv_ratio"] for r in records)},
    )
    if kind == MaskKind.KMCT:
        report.add_check("KMCT 注意力矩阵恒满秩", full == len(records),
                         f"{full}/{len(records)} 满秩")
    if construction == "identity":
        report.add_check("对角占优构造满秩", full == len(records), f"{full}/{len(records)} 满秩")
    if construction == "zero" and kind == MaskKind.JOINT:
        ones = all(r["rank"] == 1 for r in records)
        report.add_check("零投影下联合注意力为均匀矩阵，秩为 1", ones)
    logger.info(f"✅ 秩研究完成: {full}/{len(records)} 满秩")
    return report
