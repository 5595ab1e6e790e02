"""
梯度校验
中心差分与反向模式梯度逐元素比较
"""

import logging
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..utils.errors import NumericalError, ShapeError
from .autodiff import DiffGraph, Var

logger = logging.getLogger(__name__)

ScalarFn = Callable[[DiffGraph, List[Var]], Var]

DEFAULT_EPS = 1e-5
DENOMINATOR_FLOOR = 1e-8


def _evaluate(f: ScalarFn, params: Sequence[np.ndarray]) -> float:
    graph = DiffGraph(record=False)
    out = f(graph, [graph.constant(p) for p in params])
    if out.value.size != 1:
        raise ShapeError(f"grad_check 需要标量函数，实际形状 {out.value.shape}")
    value = float(out.value.reshape(()))
    if not np.isfinite(value):
        raise NumericalError(f"函数值非有限: {value}")
    return value


def reverse_gradients(f: ScalarFn, params: Sequence[np.ndarray]) -> List[np.ndarray]:
    """反向模式梯度，参数未参与计算时返回零"""
    graph = DiffGraph()
    leaves = [graph.param(p) for p in params]
    out = f(graph, leaves)
    if out.value.size != 1:
        raise ShapeError(f"grad_check 需要标量函数，实际形状 {out.value.shape}")
    if not np.all(np.isfinite(out.value)):
        raise NumericalError(f"函数值非有限: {out.value}")
    graph.backward(out)
    grads = []
    for leaf in leaves:
        grad = np.zeros_like(leaf.value) if leaf.grad is None else leaf.grad
        if not np.all(np.isfinite(grad)):
            raise NumericalError("反向梯度含非有限值")
        grads.append(grad)
    return grads


def grad_check(f: ScalarFn, params: Sequence[np.ndarray], eps: float = DEFAULT_EPS,
               coords: Optional[Sequence[Sequence[int]]] = None) -> float:
    """
    最大逐元素相对误差

    Args:
        f: 在给定计算图上把参数列表映射为标量的函数
        params: 参数数组列表
        eps: 中心差分步长
        coords: 每个参数要检查的展平下标；None 表示全部坐标

    Returns:
        |解析 - 差分| / max(|解析|, |差分|, 1e-8) 的最大值
    """
    params = [np.array(p, dtype=np.float64) for p in params]
    analytic = reverse_gradients(f, params)
    worst = 0.0

    for i, base in enumerate(params):
        indices = range(base.size) if coords is None else coords[i]
        for flat in indices:
            idx = np.unravel_index(int(flat), base.shape)
            shifted = [p.copy() for p in params]
            shifted[i][idx] = base[idx] + eps
            f_plus = _evaluate(f, shifted)
            shifted[i][idx] = base[idx] - eps
            f_minus = _evaluate(f, shifted)

            numeric = (f_plus - f_minus) / (2.0 * eps)
            exact = float(analytic[i][idx])
            denom = max(abs(exact), abs(numeric), DENOMINATOR_FLOOR)
            worst = max(worst, abs(exact - numeric) / denom)

    logger.debug(f"📊 梯度校验最大相对误差: {worst:.3e}")
    return worst
