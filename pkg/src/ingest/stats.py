"""可加充分统计量及其合并代数。

每个样本贡献 ``[1, x, y, y², x·y, x xᵀ]``，所有字段均为求和量，因此任意分片、
任意顺序的合并结果在浮点重结合误差内一致。均值由求和量按需导出。
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .errors import IncompatibleStatsError, RejectedRecordError
from .metrics import RejectionReason


@lru_cache(maxsize=64)
def _upper_indices(p: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(p)


def packed_size(p: int) -> int:
    return p * (p + 1) // 2


def pack_upper(matrix: np.ndarray) -> np.ndarray:
    """取对称矩阵的上三角（含对角线），按行优先压缩存储。"""

    rows, cols = _upper_indices(matrix.shape[0])
    return np.ascontiguousarray(matrix[rows, cols], dtype=np.float64)


def unpack_upper(packed: np.ndarray, p: int) -> np.ndarray:
    """由压缩上三角还原完整对称矩阵，上下三角逐位相同。"""

    rows, cols = _upper_indices(p)
    full = np.zeros((p, p), dtype=np.float64)
    full[rows, cols] = packed
    full[cols, rows] = packed
    return full


@dataclass(frozen=True, eq=False)
class Sample:
    """单条样本：特征向量 x 与响应 y（均为模型单位）。"""

    x: np.ndarray
    y: float

    @property
    def p(self) -> int:
        return int(self.x.shape[0])


@dataclass(frozen=True, eq=False)
class SufficientStats:
    """一组样本的充分统计量 ``n, Σy, YᵀY, Σx, XᵀY, XᵀX``。

    ``xtx_upper`` 仅保存上三角，``xtx`` 属性给出完整矩阵视图。
    构造后不可变，可在线程间安全传递。
    """

    n: int
    sum_y: float
    sum_yy: float
    sum_x: np.ndarray
    xty: np.ndarray
    xtx_upper: np.ndarray

    @property
    def p(self) -> int:
        return int(self.sum_x.shape[0])

    @cached_property
    def xtx(self) -> np.ndarray:
        matrix = unpack_upper(self.xtx_upper, self.p)
        matrix.setflags(write=False)
        return matrix

    @property
    def xtx_diagonal(self) -> np.ndarray:
        rows, cols = _upper_indices(self.p)
        return self.xtx_upper[rows == cols]

    @property
    def x_mean(self) -> np.ndarray:
        if self.n == 0:
            return np.zeros(self.p)
        return self.sum_x / self.n

    @property
    def y_mean(self) -> float:
        if self.n == 0:
            return 0.0
        return self.sum_y / self.n

    @property
    def is_empty(self) -> bool:
        return self.n == 0

    # ------------------------------------------------------------------
    # 构造
    # ------------------------------------------------------------------

    @classmethod
    def zero(cls, p: int) -> "SufficientStats":
        return cls(
            n=0,
            sum_y=0.0,
            sum_yy=0.0,
            sum_x=np.zeros(p),
            xty=np.zeros(p),
            xtx_upper=np.zeros(packed_size(p)),
        )

    @classmethod
    def from_rows(cls, x: np.ndarray, y: np.ndarray) -> "SufficientStats":
        """由一块样本行直接计算统计量（combiner 的批量形式）。"""

        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise IncompatibleStatsError(f"样本块形状不一致: X{x.shape} / y{y.shape}")
        if x.shape[0] == 0:
            return cls.zero(x.shape[1])
        return cls(
            n=int(x.shape[0]),
            sum_y=float(y.sum()),
            sum_yy=float(y @ y),
            sum_x=x.sum(axis=0),
            xty=x.T @ y,
            xtx_upper=pack_upper(x.T @ x),
        )

    # ------------------------------------------------------------------
    # 展平表示，供累加器与检查点使用
    # ------------------------------------------------------------------

    def as_vector(self) -> np.ndarray:
        return np.concatenate(([self.sum_y, self.sum_yy], self.sum_x, self.xty, self.xtx_upper))

    @classmethod
    def from_vector(cls, n: int, p: int, vector: np.ndarray) -> "SufficientStats":
        expected = 2 + 2 * p + packed_size(p)
        if vector.shape != (expected,):
            raise IncompatibleStatsError(f"统计向量长度 {vector.shape} 与维度 p={p} 不符")
        return cls(
            n=int(n),
            sum_y=float(vector[0]),
            sum_yy=float(vector[1]),
            sum_x=vector[2 : 2 + p].copy(),
            xty=vector[2 + p : 2 + 2 * p].copy(),
            xtx_upper=vector[2 + 2 * p :].copy(),
        )


def stats_of_sample(sample: Sample) -> SufficientStats:
    """单样本统计量：n=1, Σx=x, Σy=y, YᵀY=y², XᵀY=y·x, XᵀX=x xᵀ。"""

    x = np.asarray(sample.x, dtype=np.float64)
    y = float(sample.y)
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        column = int(bad[0])
        raise RejectedRecordError(
            RejectionReason.NON_FINITE, f"特征 x[{column}] 非有限值", column=column, field=f"x[{column}]"
        )
    if not np.isfinite(y):
        raise RejectedRecordError(RejectionReason.NON_FINITE, "响应 y 非有限值", field="y")
    return SufficientStats(
        n=1,
        sum_y=y,
        sum_yy=y * y,
        sum_x=x.copy(),
        xty=y * x,
        xtx_upper=pack_upper(np.outer(x, x)),
    )


def merge(a: SufficientStats, b: SufficientStats) -> SufficientStats:
    """逐字段求和；与零统计量合并时原样返回另一方。"""

    if a.p != b.p:
        raise IncompatibleStatsError(f"统计量维度不一致: {a.p} != {b.p}")
    if b.n == 0:
        return a
    if a.n == 0:
        return b
    return SufficientStats(
        n=a.n + b.n,
        sum_y=a.sum_y + b.sum_y,
        sum_yy=a.sum_yy + b.sum_yy,
        sum_x=a.sum_x + b.sum_x,
        xty=a.xty + b.xty,
        xtx_upper=a.xtx_upper + b.xtx_upper,
    )


def merge_all(items: Iterable[SufficientStats], p: int) -> SufficientStats:
    """从左到右依次合并。"""

    total = SufficientStats.zero(p)
    for item in items:
        total = merge(total, item)
    return total


class StatsAccumulator:
    """统计量累加器；``compensated=True`` 时对每个字段做 Neumaier 补偿求和。

    未开启补偿时按到达顺序逐字段相加，与左折叠 ``merge`` 的加法顺序相同。
    """

    def __init__(self, p: int, *, compensated: bool = False) -> None:
        self.p = p
        self.compensated = compensated
        self.n = 0
        self._sum = np.zeros(2 + 2 * p + packed_size(p))
        self._carry = np.zeros_like(self._sum) if compensated else None

    def add(self, stats: SufficientStats) -> None:
        if stats.p != self.p:
            raise IncompatibleStatsError(f"统计量维度不一致: {stats.p} != {self.p}")
        if stats.n == 0:
            return
        self.n += stats.n
        values = stats.as_vector()
        if self._carry is None:
            self._sum = self._sum + values
            return
        total = self._sum + values
        big = np.abs(self._sum) >= np.abs(values)
        self._carry += np.where(big, (self._sum - total) + values, (values - total) + self._sum)
        self._sum = total

    def result(self) -> SufficientStats:
        if self.n == 0:
            return SufficientStats.zero(self.p)
        vector = self._sum if self._carry is None else self._sum + self._carry
        return SufficientStats.from_vector(self.n, self.p, vector)


@dataclass(frozen=True, eq=False)
class FoldedStats:
    """按折键聚合的统计量，``folds[i]`` 为折 i 的统计量。"""

    folds: Tuple[SufficientStats, ...]
    total_records: int = 0
    rejected_records: int = 0

    @property
    def k(self) -> int:
        return len(self.folds)

    @property
    def p(self) -> int:
        return self.folds[0].p

    @property
    def n(self) -> int:
        return sum(fold.n for fold in self.folds)

    @property
    def fold_sizes(self) -> Tuple[int, ...]:
        return tuple(fold.n for fold in self.folds)

    @classmethod
    def empty(cls, k: int, p: int) -> "FoldedStats":
        return cls(folds=tuple(SufficientStats.zero(p) for _ in range(k)))

    def combined(self, exclude: Optional[Sequence[int]] = None) -> SufficientStats:
        """合并所有折（可排除指定折）。"""

        skip = set(exclude or ())
        return merge_all((fold for idx, fold in enumerate(self.folds) if idx not in skip), self.p)

    def is_consistent(self) -> bool:
        return self.n + self.rejected_records == self.total_records


__all__ = [
    "Sample",
    "SufficientStats",
    "FoldedStats",
    "StatsAccumulator",
    "stats_of_sample",
    "merge",
    "merge_all",
    "pack_upper",
    "unpack_upper",
    "packed_size",
]
