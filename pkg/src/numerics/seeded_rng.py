"""
可复现随机数生成器
SplitMix64 展开种子，xoshiro256** 产生输出流，纯整数运算保证跨平台一致
"""

import math
from typing import Optional, Sequence, Tuple

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


def splitmix64(state: int) -> Tuple[int, int]:
    """返回 (新状态, 输出)"""
    state = (state + GOLDEN_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


class SeededRng:
    """xoshiro256** 随机数生成器"""

    ALGORITHM = "splitmix64+xoshiro256**"

    def __init__(self, seed: int):
        self.seed = int(seed)
        state = self.seed & MASK64
        words = []
        for _ in range(4):
            state, out = splitmix64(state)
            words.append(out)
        self._s = words
        self._spare_normal: Optional[float] = None

    @classmethod
    def derive(cls, seed: int, *keys: int) -> "SeededRng":
        """由 (seed, keys...) 派生独立子流，与调用顺序无关"""
        h = int(seed) & MASK64
        for key in keys:
            _, h = splitmix64(h ^ (int(key) & MASK64))
        return cls(h)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """[0, 1) 上的 53 位均匀浮点数"""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        return low + (high - low) * self.random()

    def integers(self, n: int) -> int:
        """[0, n) 上的无偏整数"""
        if n <= 0:
            raise ValueError(f"integers 需要正上界，实际 {n}")
        limit = (MASK64 + 1) - ((MASK64 + 1) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        """Box-Muller 正态采样，成对生成"""
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
            return mean + std * z
        u1 = 1.0 - self.random()
        u2 = self.random()
        r = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare_normal = r * math.sin(theta)
        return mean + std * r * math.cos(theta)

    def random_array(self, shape: Sequence[int]) -> np.ndarray:
        size = int(np.prod(shape)) if len(shape) else 1
        return np.fromiter((self.random() for _ in range(size)), dtype=np.float64, count=size).reshape(shape)

    def uniform_array(self, shape: Sequence[int], low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return low + (high - low) * self.random_array(shape)

    def normal_array(self, shape: Sequence[int], std: float = 1.0) -> np.ndarray:
        size = int(np.prod(shape)) if len(shape) else 1
        values = np.fromiter((self.normal() for _ in range(size)), dtype=np.float64, count=size)
        return std * values.reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates 洗牌"""
        perm = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.integers(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return np.asarray(perm, dtype=np.int64)
