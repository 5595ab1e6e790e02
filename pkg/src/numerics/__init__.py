"""
数值基础模块
稠密线性代数、可复现随机数与反向模式自动微分
"""

from .autodiff import DiffGraph, Tensor, Var
from .grad_check import grad_check, reverse_gradients
from .linalg import (
    exact_determinant,
    exact_rank,
    jacobi_singular_values,
    kron,
    lu_determinant,
    matmul,
    permutation_matrix,
    softmax_rows,
    svd_rank,
)
from .seeded_rng import SeededRng

__all__ = [
    "DiffGraph",
    "Tensor",
    "Var",
    "grad_check",
    "reverse_gradients",
    "exact_determinant",
    "exact_rank",
    "jacobi_singular_values",
    "kron",
    "lu_determinant",
    "matmul",
    "permutation_matrix",
    "softmax_rows",
    "svd_rank",
    "SeededRng",
]
