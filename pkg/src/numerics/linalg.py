"""
稠密线性代数
矩阵乘法、Kronecker 积、行 softmax、单边 Jacobi 奇异值分解与秩判定、
LU 行列式以及有理数精确秩
"""

import logging
from typing import Sequence

import numpy as np
import scipy.linalg
import sympy

from ..utils.errors import DegenerateRowError, NumericalError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_REL_TOL = 1e-8
MAX_JACOBI_SWEEPS = 60


def as_matrix(m) -> np.ndarray:
    """转换为 float64 二维数组"""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"期望二维矩阵，实际维度 {arr.ndim}")
    return arr


def matmul(a, b) -> np.ndarray:
    """
    矩阵乘法

    Args:
        a: 形状 (m, k)
        b: 形状 (k, n)

    Returns:
        形状 (m, n) 的乘积
    """
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"矩阵乘法维度不匹配: {a.shape} x {b.shape}")
    return a @ b


def kron(a, b) -> np.ndarray:
    """Kronecker 积，块 (i, j) 为 a[i, j] * b"""
    return np.kron(as_matrix(a), as_matrix(b))


def softmax_rows(logits) -> np.ndarray:
    """
    沿最后一维做数值稳定的 softmax

    -inf 位置输出恰为 0；整行均为 -inf 时抛出 DegenerateRowError。
    """
    z = np.asarray(logits, dtype=np.float64)
    finite = np.isfinite(z)
    if np.any(~finite & ~np.isneginf(z)):
        raise NumericalError("logits 中含有 NaN 或 +inf")

    live = finite.any(axis=-1)
    if not np.all(live):
        dead = int(np.flatnonzero(~live.reshape(-1))[0])
        raise DegenerateRowError(f"第 {dead} 行全部被掩码", row=dead)

    row_max = np.max(np.where(finite, z, -np.inf), axis=-1, keepdims=True)
    e = np.exp(z - row_max)
    return e / e.sum(axis=-1, keepdims=True)


def jacobi_singular_values(m, max_sweeps: int = MAX_JACOBI_SWEEPS) -> np.ndarray:
    """
    单边 Jacobi 奇异值（降序）

    对列做 Givens 旋转直至两两正交，奇异值即列范数。

    Raises:
        NumericalError: 超过 max_sweeps 轮仍未收敛
    """
    a = as_matrix(m)
    if not np.all(np.isfinite(a)):
        raise NumericalError("SVD 输入含非有限值")
    # 列数多于行数时对转置做分解，非零奇异值相同
    u = a.T.copy() if a.shape[1] > a.shape[0] else a.copy()
    n = u.shape[1]
    eps = np.finfo(np.float64).eps

    for sweep in range(1, max_sweeps + 1):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                up = u[:, p]
                uq = u[:, q]
                alpha = float(up @ up)
                beta = float(uq @ uq)
                gamma = float(up @ uq)
                if alpha == 0.0 or beta == 0.0:
                    continue
                if abs(gamma) <= eps * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                new_p = c * up - s * uq
                new_q = s * up + c * uq
                u[:, p] = new_p
                u[:, q] = new_q
        if not rotated:
            logger.debug(f"🔧 Jacobi SVD 在第 {sweep} 轮收敛 (n={n})")
            return np.sort(np.linalg.norm(u, axis=0))[::-1]

    raise NumericalError(f"Jacobi SVD 在 {max_sweeps} 轮内未收敛", iterations=max_sweeps)


def svd_rank(m, rel_tol: float = DEFAULT_REL_TOL) -> int:
    """大于 rel_tol * sigma_max 的奇异值个数"""
    sv = jacobi_singular_values(m)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > rel_tol * sv[0]))


def lu_determinant(m) -> float:
    """部分主元 LU 分解求行列式"""
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"行列式需要方阵，实际 {a.shape}")
    lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
    swaps = int(np.count_nonzero(piv != np.arange(piv.size)))
    sign = -1.0 if swaps % 2 else 1.0
    return float(sign * np.prod(np.diag(lu)))


def _to_rational_matrix(m) -> sympy.Matrix:
    a = as_matrix(m)
    return sympy.Matrix([[sympy.Rational(repr(float(x))) for x in row] for row in a])


def exact_rank(m) -> int:
    """按十进制字面量转为有理数后的精确秩"""
    return int(_to_rational_matrix(m).rank())


def exact_determinant(m) -> sympy.Rational:
    """有理数精确行列式"""
    return _to_rational_matrix(m).det()


def permutation_matrix(perm: Sequence[int]) -> np.ndarray:
    """行 i 取 perm[i] 的置换矩阵，(P @ x)[i] = x[perm[i]]"""
    perm = np.asarray(perm, dtype=np.int64)
    p = np.zeros((perm.size, perm.size))
    p[np.arange(perm.size), perm] = 1.0
    return p

