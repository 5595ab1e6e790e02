"""
反向模式自动微分
DiffGraph 按创建顺序记录运算（Wengert 表），backward 逆序遍历一次累积伴随量。
所有节点值为 float64 numpy 数组，支持批量维度与广播；掩码以常量参与运算。
"""

import logging
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from ..utils.errors import NumericalError, ShapeError
from .linalg import softmax_rows

logger = logging.getLogger(__name__)

_GELU_C = np.sqrt(2.0 / np.pi)


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """把广播后的梯度求和回原始形状"""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _swap_last(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


class Var:
    """计算图节点"""

    __slots__ = ("graph", "value", "grad", "requires_grad", "name", "_backward")

    def __init__(self, graph: "DiffGraph", value: np.ndarray, requires_grad: bool,
                 backward: Optional[Callable[[np.ndarray], None]] = None, name: Optional[str] = None):
        self.graph = graph
        self.value = value
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"Var{label}(shape={self.value.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return self.graph.add(self, other)

    def __radd__(self, other):
        return self.graph.add(other, self)

    def __sub__(self, other):
        return self.graph.sub(self, other)

    def __rsub__(self, other):
        return self.graph.sub(other, self)

    def __mul__(self, other):
        return self.graph.mul(self, other)

    def __rmul__(self, other):
        return self.graph.mul(other, self)

    def __truediv__(self, other):
        return self.graph.div(self, other)

    def __neg__(self):
        return self.graph.neg(self)

    def __matmul__(self, other):
        return self.graph.matmul(self, other)

    def __getitem__(self, idx):
        return self.graph.getitem(self, idx)


Tensor = Union[np.ndarray, Var, float]


class DiffGraph:
    """
    反向模式自动微分磁带

    Args:
        record: False 时只做前向计算，不记录任何反向闭包（评估模式）
    """

    def __init__(self, record: bool = True):
        self.record = record
        self._tape: List[Var] = []

    def __len__(self) -> int:
        return len(self._tape)

    # ---- 节点创建 -------------------------------------------------

    def param(self, value, name: Optional[str] = None) -> Var:
        """可求导叶子节点"""
        arr = np.array(value, dtype=np.float64)
        return Var(self, arr, requires_grad=self.record, name=name)

    def constant(self, value) -> Var:
        return Var(self, np.asarray(value, dtype=np.float64), requires_grad=False)

    def lift(self, x: Tensor) -> Var:
        if isinstance(x, Var):
            return x
        return self.constant(x)

    def _node(self, value: np.ndarray, parents: Sequence[Var],
              backward: Callable[[np.ndarray], None]) -> Var:
        if self.record and any(p.requires_grad for p in parents):
            var = Var(self, value, requires_grad=True, backward=backward)
            self._tape.append(var)
            return var
        return Var(self, value, requires_grad=False)

    @staticmethod
    def _accumulate(var: Var, grad: np.ndarray):
        if not var.requires_grad:
            return
        grad = _unbroadcast(grad, var.value.shape)
        var.grad = grad.copy() if var.grad is None else var.grad + grad

    def backward(self, loss: Var):
        """从标量 loss 出发逆序传播伴随量"""
        if loss.value.size != 1:
            raise ShapeError(f"backward 需要标量损失，实际形状 {loss.value.shape}")
        if not loss.requires_grad:
            return
        loss.grad = np.ones_like(loss.value)
        for node in reversed(self._tape):
            if node.grad is None or node._backward is None:
                continue
            node._backward(node.grad)

    # ---- 逐元素运算 -----------------------------------------------

    def add(self, a: Tensor, b: Tensor) -> Var:
        a, b = self.lift(a), self.lift(b)

        def backward(g):
            self._accumulate(a, g)
            self._accumulate(b, g)

        return self._node(a.value + b.value, (a, b), backward)

    def sub(self, a: Tensor, b: Tensor) -> Var:
        a, b = self.lift(a), self.lift(b)

        def backward(g):
            self._accumulate(a, g)
            self._accumulate(b, -g)

        return self._node(a.value - b.value, (a, b), backward)

    def mul(self, a: Tensor, b: Tensor) -> Var:
        a, b = self.lift(a), self.lift(b)

        def backward(g):
            self._accumulate(a, g * b.value)
            self._accumulate(b, g * a.value)

        return self._node(a.value * b.value, (a, b), backward)

    def div(self, a: Tensor, b: Tensor) -> Var:
        a, b = self.lift(a), self.lift(b)

        def backward(g):
            self._accumulate(a, g / b.value)
            self._accumulate(b, -g * a.value / (b.value * b.value))

        return self._node(a.value / b.value, (a, b), backward)

    def neg(self, a: Tensor) -> Var:
        a = self.lift(a)
        return self._node(-a.value, (a,), lambda g: self._accumulate(a, -g))

    def scale(self, a: Tensor, c: float) -> Var:
        a = self.lift(a)
        return self._node(a.value * c, (a,), lambda g: self._accumulate(a, g * c))

    def exp(self, a: Tensor) -> Var:
        a = self.lift(a)
        out = np.exp(a.value)
        return self._node(out, (a,), lambda g: self._accumulate(a, g * out))

    def log(self, a: Tensor) -> Var:
        a = self.lift(a)
        if np.any(a.value <= 0):
            raise NumericalError("log 的输入必须为正")
        return self._node(np.log(a.value), (a,), lambda g: self._accumulate(a, g / a.value))

    def tanh(self, a: Tensor) -> Var:
        a = self.lift(a)
        out = np.tanh(a.value)
        return self._node(out, (a,), lambda g: self._accumulate(a, g * (1.0 - out * out)))

    def gelu(self, a: Tensor) -> Var:
        """GELU（tanh 近似）"""
        a = self.lift(a)
        x = a.value
        inner = _GELU_C * (x + 0.044715 * x ** 3)
        t = np.tanh(inner)
        out = 0.5 * x * (1.0 + t)

        def backward(g):
            d_inner = _GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
            local = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * d_inner
            self._accumulate(a, g * local)

        return self._node(out, (a,), backward)

    # ---- 结构运算 -------------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Var:
        """批量矩阵乘法，最后两维为矩阵维"""
        a, b = self.lift(a), self.lift(b)
        if a.ndim < 2 or b.ndim < 2:
            raise ShapeError(f"matmul 需要至少二维输入: {a.shape} x {b.shape}")
        if a.shape[-1] != b.shape[-2]:
            raise ShapeError(f"矩阵乘法维度不匹配: {a.shape} x {b.shape}")

        def backward(g):
            self._accumulate(a, np.matmul(g, _swap_last(b.value)))
            self._accumulate(b, np.matmul(_swap_last(a.value), g))

        return self._node(np.matmul(a.value, b.value), (a, b), backward)

    def sum(self, a: Tensor, axis=None, keepdims: bool = False) -> Var:
        a = self.lift(a)

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(a, np.broadcast_to(g, a.shape))

        return self._node(np.sum(a.value, axis=axis, keepdims=keepdims), (a,), backward)

    def mean(self, a: Tensor, axis=None, keepdims: bool = False) -> Var:
        a = self.lift(a)
        total = self.sum(a, axis=axis, keepdims=keepdims)
        count = a.value.size // max(total.value.size, 1)
        return self.scale(total, 1.0 / count)

    def reshape(self, a: Tensor, shape) -> Var:
        a = self.lift(a)
        return self._node(a.value.reshape(shape), (a,), lambda g: self._accumulate(a, g.reshape(a.shape)))

    def transpose(self, a: Tensor, axes: Sequence[int]) -> Var:
        a = self.lift(a)
        inverse = np.argsort(axes)
        return self._node(np.transpose(a.value, axes), (a,),
                          lambda g: self._accumulate(a, np.transpose(g, inverse)))

    def getitem(self, a: Tensor, idx) -> Var:
        """基本或高级索引，反向时散射累加"""
        a = self.lift(a)

        def backward(g):
            full = np.zeros_like(a.value)
            np.add.at(full, idx, g)
            self._accumulate(a, full)

        return self._node(np.array(a.value[idx]), (a,), backward)

    def concat(self, items: Sequence[Tensor], axis: int = 0) -> Var:
        parts = [self.lift(x) for x in items]
        sizes = [p.shape[axis] for p in parts]
        bounds = np.cumsum(sizes)[:-1]

        def backward(g):
            for part, piece in zip(parts, np.split(g, bounds, axis=axis)):
                self._accumulate(part, piece)

        return self._node(np.concatenate([p.value for p in parts], axis=axis), parts, backward)

    # ---- 归一化与 softmax -----------------------------------------

    def softmax(self, logits: Tensor, mask: Optional[np.ndarray] = None) -> Var:
        """沿最后一维的 softmax；mask 为加性常量（0 / -inf），被掩码位置梯度恰为 0"""
        logits = self.lift(logits)
        z = logits.value if mask is None else logits.value + mask
        out = softmax_rows(z)

        def backward(g):
            inner = np.sum(g * out, axis=-1, keepdims=True)
            self._accumulate(logits, out * (g - inner))

        return self._node(out, (logits,), backward)

    def log_softmax(self, logits: Tensor) -> Var:
        logits = self.lift(logits)
        z = logits.value
        if not np.all(np.isfinite(z)):
            raise NumericalError("log_softmax 输入含非有限值")
        shifted = z - z.max(axis=-1, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))

        def backward(g):
            probs = np.exp(out)
            self._accumulate(logits, g - probs * g.sum(axis=-1, keepdims=True))

        return self._node(out, (logits,), backward)

    def layer_norm(self, x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Var:
        """最后一维上的层归一化"""
        x, gain, bias = self.lift(x), self.lift(gain), self.lift(bias)
        mu = x.value.mean(axis=-1, keepdims=True)
        centered = x.value - mu
        rstd = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
        xhat = centered * rstd
        out = xhat * gain.value + bias.value

        def backward(g):
            dxhat = g * gain.value
            dx = rstd * (dxhat
                         - dxhat.mean(axis=-1, keepdims=True)
                         - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
            self._accumulate(x, dx)
            self._accumulate(gain, g * xhat)
            self._accumulate(bias, g)

        return self._node(out, (x, gain, bias), backward)

    def l2_normalize(self, a: Tensor) -> Var:
        """最后一维单位化；零向量抛出 NumericalError"""
        a = self.lift(a)
        norm = np.linalg.norm(a.value, axis=-1, keepdims=True)
        if np.any(norm == 0.0):
            raise NumericalError("零向量无法归一化")
        out = a.value / norm

        def backward(g):
            inner = np.sum(g * out, axis=-1, keepdims=True)
            self._accumulate(a, (g - out * inner) / norm)

        return self._node(out, (a,), backward)
