"""由充分统计量构造标准化 Gram 系统，不接触原始数据。

列先中心化再缩放到单位长度：``X = X_c D + C``，其中 ``d_j`` 为中心化列的
二范数（而非标准差），保证 ``g`` 的对角线为 1。
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.ingest.stats import SufficientStats

from .domain import DroppedColumn
from .errors import EmptyModelError, InsufficientDataError
from .utils import logger


@dataclass(frozen=True, eq=False)
class StandardizedProblem:
    """标准化后的二次型 ``tss - 2bᵀβ + βᵀgβ`` 及其缩放元数据。

    ``means``/``norms`` 覆盖全部 p 列（被丢弃列的 norm 记为 0），
    ``g``/``b`` 只含活动列，``active_index[i]`` 为第 i 个活动列的原始下标。
    """

    n: int
    p: int
    active_index: Tuple[int, ...]
    dropped: Tuple[DroppedColumn, ...]
    means: np.ndarray
    norms: np.ndarray
    y_bar: float
    g: np.ndarray
    b: np.ndarray
    tss: float
    intercept: bool

    @property
    def p_active(self) -> int:
        return len(self.active_index)


def standardize(
    stats: SufficientStats,
    *,
    intercept: bool = True,
    epsilon: float = 1e-12,
    allow_empty: bool = False,
) -> StandardizedProblem:
    """按中心化/单位长度缩放把统计量转为 Gram 系统。

    Args:
        stats: 训练数据的充分统计量。
        intercept: 是否拟合截距；关闭时 X 与 Y 都不中心化，仅做缩放。
        epsilon: ``d_j <= epsilon * sqrt(xtx_jj + 1)`` 的列视为退化并丢弃。
        allow_empty: 为 True 时全部列退化也返回空问题，而非抛出异常。

    Raises:
        InsufficientDataError: 有截距时 n < 2，或无截距时 n < 1。
        EmptyModelError: 所有列均退化且 ``allow_empty`` 为 False。
    """

    minimum = 2 if intercept else 1
    if stats.n < minimum:
        raise InsufficientDataError(f"样本数 {stats.n} 少于所需的 {minimum}")

    n = stats.n
    xtx = stats.xtx
    diag = np.diag(xtx)
    if intercept:
        means = stats.sum_x / n
        y_bar = stats.sum_y / n
        centered = xtx - n * np.outer(means, means)
        cross = stats.xty - n * y_bar * means
        tss = stats.sum_yy - n * y_bar * y_bar
    else:
        means = np.zeros(stats.p)
        y_bar = 0.0
        centered = np.array(xtx)
        cross = stats.xty.copy()
        tss = stats.sum_yy

    # n·x̄² 可能因舍入略大于 Σx²
    variances = np.maximum(np.diag(centered), 0.0)
    norms = np.sqrt(variances)
    degenerate = norms <= epsilon * np.sqrt(diag + 1.0)

    active = np.flatnonzero(~degenerate)
    dropped = tuple(DroppedColumn(index=int(idx), reason="zero_variance") for idx in np.flatnonzero(degenerate))
    if dropped:
        logger.warning("丢弃退化列: %s", [item.index for item in dropped])
    if active.size == 0 and not allow_empty:
        raise EmptyModelError("所有列均退化，活动集为空")

    norms = np.where(degenerate, 0.0, norms)
    scale = norms[active]
    g = centered[np.ix_(active, active)] / np.outer(scale, scale)
    g = 0.5 * (g + g.T)
    b = cross[active] / scale

    return StandardizedProblem(
        n=n,
        p=stats.p,
        active_index=tuple(int(idx) for idx in active),
        dropped=dropped,
        means=means,
        norms=norms,
        y_bar=float(y_bar),
        g=g,
        b=b,
        tss=float(tss),
        intercept=intercept,
    )


def loss_from_stats(problem: StandardizedProblem, beta_std: np.ndarray) -> float:
    """仅凭统计量计算 RSS：``tss - 2bᵀβ + βᵀgβ``。"""

    beta_std = np.asarray(beta_std, dtype=np.float64)
    if beta_std.shape != (problem.p_active,):
        raise ValueError(f"系数维度 {beta_std.shape} 与活动列数 {problem.p_active} 不符")
    return float(problem.tss - 2.0 * problem.b @ beta_std + beta_std @ problem.g @ beta_std)


__all__ = ["StandardizedProblem", "standardize", "loss_from_stats"]
