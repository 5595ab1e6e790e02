"""
KMT 奇异实例搜索
在两个符合 KMT 零模式、行随机且行列式异号的矩阵之间二分凸组合，
得到行列式为零的注意力模式；同时对文中给出的 4x4 例子做精确秩检查
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..masks import MaskKind, allowed_count, build_mask
from ..numerics import exact_determinant, exact_rank, lu_determinant, svd_rank
from ..utils.errors import ConfigError
from .study_report import StudyReport

logger = logging.getLogger(__name__)

HEAVY_WEIGHT = 0.8
BISECTION_WIDTH = 1e-15
DET_TOLERANCE = 1e-12
MIN_POSITIVE = 1e-4
ROW_SUM_TOLERANCE = 1e-12

# 文中 T=2, S=2 的例子
PRINTED_EXAMPLE = np.array([
    [0.4, 0.0, 0.4, 0.2],
    [0.0, 0.4, 0.4, 0.2],
    [0.4, 0.5, 0.1, 0.0],
    [0.4, 0.4, 0.0, 0.2],
])

PRINTED_DIAGONAL_HEAVY = np.array([
    [0.8, 0.0, 0.1, 0.1],
    [0.0, 0.8, 0.1, 0.1],
    [0.1, 0.1, 0.8, 0.0],
    [0.1, 0.1, 0.0, 0.8],
])

PRINTED_SWAP_HEAVY = np.array([
    [0.1, 0.0, 0.8, 0.1],
    [0.0, 0.1, 0.1, 0.8],
    [0.8, 0.1, 0.1, 0.0],
    [0.1, 0.8, 0.0, 0.1],
])


@dataclass
class SingularSearchResult:
    found: bool
    t: int
    s: int
    matrix: Optional[np.ndarray] = None
    lam: Optional[float] = None
    det: Optional[float] = None
    iterations: int = 0
    endpoint_dets: Tuple[float, float] = (0.0, 0.0)
    endpoints: Tuple[Optional[np.ndarray], Optional[np.ndarray]] = (None, None)
    escalations: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.t * self.s

    def certificate(self) -> Dict[str, Any]:
        """矩阵性质校验结果"""
        if self.matrix is None:
            return {}
        m = self.matrix
        allowed = build_mask(MaskKind.KMT, self.t, self.s).allowed
        positive = m[allowed]
        return {
            "pattern_ok": bool(np.all(m[~allowed] == 0.0) and np.all(positive > 0.0)),
            "min_positive": float(positive.min()),
            "max_row_sum_error": float(np.max(np.abs(m.sum(axis=1) - 1.0))),
            "abs_det": float(abs(self.det)),
            "numerical_rank": svd_rank(m),
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "found": self.found, "t": self.t, "s": self.s, "n": self.n,
            "lambda": self.lam, "det": self.det, "iterations": self.iterations,
            "endpoint_dets": list(self.endpoint_dets),
            "endpoints": [e.tolist() if e is not None else None for e in self.endpoints],
            "matrix": self.matrix.tolist() if self.matrix is not None else None,
            "certificate": self.certificate(),
            "escalations": self.escalations,
        }


def _heavy_endpoint(t: int, s: int, target: np.ndarray) -> np.ndarray:
    """第 i 行在 target[i] 处放 0.8，其余 0.2 均分给该行其它允许位置"""
    mask = build_mask(MaskKind.KMT, t, s)
    n = mask.n
    m = np.zeros((n, n))
    for i in range(n):
        others = allowed_count(mask, i) - 1
        row = np.where(mask.allowed[i], (1.0 - HEAVY_WEIGHT) / others, 0.0)
        row[target[i]] = HEAVY_WEIGHT
        m[i] = row
    return m


def diagonal_heavy(t: int, s: int) -> np.ndarray:
    return _heavy_endpoint(t, s, np.arange(t * s))


def transposition_heavy(t: int, s: int) -> np.ndarray:
    """交换第 0 帧与第 1 帧的 0 号槽位，奇置换使行列式为负"""
    target = np.arange(t * s)
    target[0], target[s] = s, 0
    return _heavy_endpoint(t, s, target)


def _bisect(a: np.ndarray, b: np.ndarray, budget: int) -> Tuple[float, float, int]:
    det_lo, det_hi = lu_determinant(a), lu_determinant(b)
    lo, hi = 0.0, 1.0
    iterations = 0
    while hi - lo > BISECTION_WIDTH and iterations < budget:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        det_mid = lu_determinant((1.0 - mid) * a + mid * b)
        iterations += 1
        if det_mid == 0.0:
            return mid, det_mid, iterations
        if np.sign(det_mid) == np.sign(det_lo):
            lo, det_lo = mid, det_mid
        else:
            hi, det_hi = mid, det_mid
    if abs(det_lo) <= abs(det_hi):
        return lo, det_lo, iterations
    return hi, det_hi, iterations


def find_singular_kmta(t: int, s: int, budget: int = 200, max_frames: int = 8) -> SingularSearchResult:
    """
    搜索 KMT 零模式下的奇异行随机矩阵

    Args:
        t: 帧数
        s: 每帧 token 数
        budget: 二分迭代上限
        max_frames: 升维时帧数上限

    Returns:
        SingularSearchResult；若当前 (T, S) 无法得到异号端点则增加帧数并记录
    """
    if t < 1 or s < 1 or t * s < 4:
        raise ConfigError(f"奇异搜索需要 T*S >= 4，得到 T={t}, S={s}")
    escalations: List[Dict[str, Any]] = []

    while t <= max_frames:
        if t < 2:
            # 单帧时 KMT 只保留对角，矩阵恒为单位阵
            escalations.append({"t": t, "s": s, "reason": "single frame admits only the identity"})
            logger.warning(f"⚠️ T={t} 时不存在奇异实例，升维到 T={t + 1}")
            t += 1
            continue

        a, b = diagonal_heavy(t, s), transposition_heavy(t, s)
        det_a, det_b = lu_determinant(a), lu_determinant(b)
        if np.sign(det_a) == np.sign(det_b):
            escalations.append({"t": t, "s": s, "reason": "endpoint determinants share a sign",
                                "endpoint_dets": [det_a, det_b]})
            logger.warning(f"⚠️ T={t}, S={s} 端点行列式同号，升维")
            t += 1
            continue

        lam, det, iterations = _bisect(a, b, budget)
        matrix = (1.0 - lam) * a + lam * b
        found = abs(det) < DET_TOLERANCE
        result = SingularSearchResult(found, t, s, matrix, lam, det, iterations, (det_a, det_b), (a, b),
                                      escalations)
        if found:
            logger.info(f"✅ 找到奇异 KMT 实例: T={t}, S={s}, lambda={lam:.17g}, det={det:.3e}")
            return result
        escalations.append({"t": t, "s": s, "reason": "budget exhausted", "det": det})
        logger.warning(f"⚠️ T={t}, S={s} 在 {budget} 次迭代内未达到 |det| < {DET_TOLERANCE}")
        t += 1

    return SingularSearchResult(False, t, s, escalations=escalations)


def printed_example_check() -> Dict[str, Any]:
    """对文中 4x4 例子做有理数精确检查"""
    mask = build_mask(MaskKind.KMT, 2, 2)
    m = PRINTED_EXAMPLE
    det = exact_determinant(m)
    rank = exact_rank(m)
    return {
        "matrix": m.tolist(),
        "pattern_ok": bool(np.all(m[~mask.allowed] == 0.0)),
        "row_sums": m.sum(axis=1).tolist(),
        "exact_det": str(det),
        "det": float(det),
        "exact_rank": rank,
        "singular": rank < 4,
        "endpoint_dets": {"diagonal_heavy": str(exact_determinant(PRINTED_DIAGONAL_HEAVY)),
                          "swap_heavy": str(exact_determinant(PRINTED_SWAP_HEAVY))},
    }


def singular_study(t: int = 2, s: int = 2, budget: int = 200, seed: int = 0) -> StudyReport:
    """奇异实例搜索 + 文中例子检查，写成报告"""
    result = find_singular_kmta(t, s, budget)
    printed = printed_example_check()
    cert = result.certificate()

    report = StudyReport(
        study="singular",
        seed=seed,
        config={"t": t, "s": s, "budget": budget, "heavy_weight": HEAVY_WEIGHT,
                "bisection_width": BISECTION_WIDTH},
        trials=[result.to_dict()],
        summary={"found": result.found, "t": result.t, "s": result.s,
                 "certificate": cert, "printed_example": printed},
    )
    report.add_check("KMT 注意力模式存在奇异实例", result.found and result.n <= 16
                     and cert.get("pattern_ok", False)
                     and cert.get("min_positive", 0.0) > MIN_POSITIVE
                     and cert.get("max_row_sum_error", 1.0) <= ROW_SUM_TOLERANCE
                     and cert.get("numerical_rank", result.n) < result.n,
                     f"T={result.t}, S={result.s}, |det|={cert.get('abs_det')}")
    report.add_check("文中 4x4 例子已做精确秩检查", printed["pattern_ok"],
                     f"exact_rank={printed['exact_rank']}, det={printed['exact_det']}")
    if not printed["singular"]:
        logger.warning(f"⚠️ 文中例子并不奇异: det={printed['exact_det']}")
    return report
