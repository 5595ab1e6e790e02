"""
注意力可表示性检查
d >= n 时任意正行随机矩阵都能由 softmax 注意力精确实现；
d < n 时最后一行为零向量的输入迫使最后一行注意力均匀，非均匀目标不可达
"""

import logging
from typing import Any, Dict, List

import numpy as np

from ..attention import AttentionParams, attention_matrix
from ..numerics import SeededRng
from ..utils.errors import ConfigError
from .study_report import StudyReport

logger = logging.getLogger(__name__)

RECONSTRUCTION_TOL = 1e-10


def random_row_stochastic(n: int, rng: SeededRng) -> np.ndarray:
    """严格为正的行随机矩阵"""
    m = rng.uniform_array((n, n), 0.1, 1.0)
    return m / m.sum(axis=1, keepdims=True)


def construct_attention(x: np.ndarray, target: np.ndarray) -> AttentionParams:
    """
    由满行秩的 x (n x d) 与正行随机矩阵 target 构造单头参数

    W_q = sqrt(d) * X^+ log(target) (X^+)^T，W_k = I，使 x W_q W_k^T x^T / sqrt(d) = log(target)
    """
    n, d = x.shape
    if d < n:
        raise ConfigError(f"精确构造需要 d >= n，得到 d={d}, n={n}")
    pinv = np.linalg.pinv(x)
    w_qk = np.sqrt(d) * pinv @ np.log(target) @ pinv.T
    eye = np.eye(d)
    return AttentionParams(w_qk, eye, eye.copy(), eye.copy(), 1)


def constructive_check(n: int, d: int, rng: SeededRng) -> Dict[str, Any]:
    # 正交行，避免伪逆放大舍入误差
    q, _ = np.linalg.qr(rng.normal_array((d, n)))
    x = q.T
    target = random_row_stochastic(n, rng)
    params = construct_attention(x, target)
    realized = attention_matrix(x, None, params, 0)
    return {"n": n, "d": d, "max_abs_error": float(np.max(np.abs(realized - target)))}


def low_dim_counterexample(n: int, d: int, rng: SeededRng, samples: int = 20) -> Dict[str, Any]:
    """x 的最后一行为零：任何 W_q, W_k 下最后一行注意力都是均匀的"""
    x = rng.normal_array((n, d))
    x[-1] = 0.0
    target = random_row_stochastic(n, rng)
    deviations = []
    for _ in range(samples):
        params = AttentionParams(rng.normal_array((d, d)), rng.normal_array((d, d)), np.eye(d), np.eye(d), 1)
        last = attention_matrix(x, None, params, 0)[-1]
        deviations.append(float(np.max(np.abs(last - 1.0 / n))))
    return {
        "n": n, "d": d,
        "max_last_row_deviation": max(deviations),
        "target_last_row_spread": float(np.ptp(target[-1])),
        "unreachable": bool(np.ptp(target[-1]) > 0.0 and max(deviations) < RECONSTRUCTION_TOL),
    }


def representation_study(n_values=(4, 6, 8), trials: int = 5, seed: int = 0) -> StudyReport:
    records: List[Dict[str, Any]] = []
    for n in n_values:
        for i in range(trials):
            rng = SeededRng.derive(seed, n, i)
            records.append({"case": "d>=n", "trial": i, **constructive_check(n, n, rng)})
            records.append({"case": "d<n", "trial": i, **low_dim_counterexample(n, max(1, n // 2), rng)})

    constructive = [r for r in records if r["case"] == "d>=n"]
    counter = [r for r in records if r["case"] == "d<n"]
    report = StudyReport(
        study="represent",
        seed=seed,
        config={"n_values": list(n_values), "trials": trials, "tolerance": RECONSTRUCTION_TOL},
        trials=records,
        summary={"max_reconstruction_error": max(r["max_abs_error"] for r in constructive),
                 "unreachable_cases": sum(1 for r in counter if r["unreachable"])},
    )
    report.add_check("d >= n 时任意正行随机矩阵可精确实现",
                     report.summary["max_reconstruction_error"] < RECONSTRUCTION_TOL,
                     f"max error={report.summary['max_reconstruction_error']:.3e}")
    report.add_check("d < n 时存在不可实现的行随机矩阵", all(r["unreachable"] for r in counter),
                     f"{report.summary['unreachable_cases']}/{len(counter)}")
    return report
