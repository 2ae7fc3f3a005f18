"""标准化、求解与交叉验证阶段的异常定义。"""

from __future__ import annotations

from typing import Sequence


class RegressionError(ValueError):
    """建模阶段错误的基类。"""


class InsufficientDataError(RegressionError):
    """样本数不足以完成中心化或训练。"""


class EmptyModelError(RegressionError):
    """所有列都退化，活动集为空。"""


class DegenerateGridError(RegressionError):
    """λ_max 为 0，无法自动生成 λ 网格。"""


class SolverFaultError(RegressionError):
    """求解过程中出现 NaN 等数值故障。"""


class NumericalError(RegressionError):
    """矩阵分解失败。"""


class SchemaMismatchError(RegressionError):
    """预测输入缺少模型需要的列。"""

    def __init__(self, missing: Sequence[str]) -> None:
        super().__init__(f"输入缺少列: {', '.join(missing)}")
        self.missing = list(missing)


__all__ = [
    "RegressionError",
    "InsufficientDataError",
    "EmptyModelError",
    "DegenerateGridError",
    "SolverFaultError",
    "NumericalError",
    "SchemaMismatchError",
]
