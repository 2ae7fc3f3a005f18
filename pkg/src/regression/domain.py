"""领域模型定义集合：惩罚配置、求解控制与拟合结果。

目标函数为未归一化的 RSS 加惩罚：
``‖Y - α1 - Xβ‖² + p_λ(β)``，因此 λ 的量级随样本数变化。
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# 枚举定义
# ---------------------------------------------------------------------------


class PenaltyFamily(str, Enum):
    LASSO = "lasso"
    RIDGE = "ridge"
    ELASTIC_NET = "elastic_net"


class GridSource(str, Enum):
    AUTO = "auto"
    USER = "user"
    NULL = "null"


# ---------------------------------------------------------------------------
# 配置
# ---------------------------------------------------------------------------


class PenaltySpec(BaseModel):
    """惩罚族、混合权重与 λ 网格。

    ``mix`` 为 L1 部分的占比：lasso 固定为 1，ridge 固定为 0。
    ``lambdas`` 为空时按 ``n_lambdas`` 与 ``lambda_min_ratio`` 自动生成。
    """

    model_config = ConfigDict(frozen=True)

    family: PenaltyFamily = PenaltyFamily.LASSO
    mix: float = Field(1.0, ge=0.0, le=1.0, description="L1 占比")
    lambdas: Optional[Tuple[float, ...]] = Field(None, description="用户给定的 λ 网格（降序）")
    n_lambdas: int = Field(100, ge=1, description="自动网格的点数")
    lambda_min_ratio: Optional[float] = Field(
        None, gt=0.0, lt=1.0, description="自动网格最小值与 λ_max 之比；None 时按 n 与 p 决定"
    )

    @model_validator(mode="before")
    @classmethod
    def _align_mix(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        family = data.get("family", PenaltyFamily.LASSO)
        if isinstance(family, str):
            family = PenaltyFamily(family.strip().lower().replace("-", "_"))
        data["family"] = family
        mix = data.get("mix")
        if family is PenaltyFamily.LASSO:
            if mix is not None and float(mix) != 1.0:
                raise ValueError("lasso 的 mix 必须为 1")
            data["mix"] = 1.0
        elif family is PenaltyFamily.RIDGE:
            if mix is not None and float(mix) != 0.0:
                raise ValueError("ridge 的 mix 必须为 0")
            data["mix"] = 0.0
        elif mix is None:
            data["mix"] = 0.5
        return data

    @field_validator("lambdas", mode="before")
    def _normalise_lambdas(cls, value: Any) -> Optional[Tuple[float, ...]]:  # noqa: N805
        if value is None:
            return None
        grid = sorted((float(item) for item in value), reverse=True)
        if not grid:
            raise ValueError("λ 网格不能为空")
        if any(not math.isfinite(item) or item < 0 for item in grid):
            raise ValueError("λ 必须为非负有限值")
        if len(set(grid)) != len(grid):
            raise ValueError("λ 网格存在重复值")
        if grid[-1] == 0.0:
            logger.warning("λ=0 仅在 Gram 矩阵可逆时良定，请确认数据满秩")
        return tuple(grid)

    def penalty_summary(self) -> Dict[str, Any]:
        return {"family": self.family.value, "mix": self.mix}


class SolveControl(BaseModel):
    """坐标下降的终止条件。"""

    model_config = ConfigDict(frozen=True)

    max_sweeps: int = Field(10_000, ge=1, description="最大完整扫描轮数")
    tol: float = Field(1e-9, gt=0.0, description="单轮最大系数变化阈值，按响应均方根尺度缩放")
    active_set: bool = Field(True, description="完整扫描后是否仅在非零坐标上迭代")


class TrainOptions(BaseModel):
    """训练流程的其余选项。"""

    model_config = ConfigDict(frozen=True)

    intercept: bool = True
    epsilon: float = Field(1e-12, gt=0.0, description="退化列的相对阈值")
    threads: int = Field(1, ge=1, description="折任务并发数")
    exclude_last_fold: bool = Field(
        False, description="兼容模式：CV 平均与最终拟合都排除折键 k-1"
    )


# ---------------------------------------------------------------------------
# 数值结果
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DroppedColumn:
    index: int
    reason: str


@dataclass(frozen=True, eq=False)
class StdSolution:
    """标准化尺度上的解。"""

    beta_std: np.ndarray
    lam: float
    sweeps_used: int
    converged: bool
    kkt_residual: float


@dataclass(frozen=True)
class GridSummary:
    """λ 网格来源，保证仅凭模型文件即可复现网格。"""

    source: GridSource
    lambda_max: float
    lambda_min_ratio: Optional[float]
    n_lambdas: int


@dataclass(eq=False)
class CvReport:
    """交叉验证结果；``fold_mse[i, l]`` 为折 i 在第 l 个 λ 上的测试 MSE，缺失为 NaN。"""

    lambdas: np.ndarray
    fold_mse: np.ndarray
    mean_mse: np.ndarray
    lambda_opt: float
    opt_index: int
    fold_sizes: Tuple[int, ...]
    grid: GridSummary
    skipped_folds: List[int] = field(default_factory=list)
    excluded_cells: List[Tuple[int, int]] = field(default_factory=list)


@dataclass(eq=False)
class FittedModel:
    """原始尺度上的模型：``ŷ(x) = intercept + xᵀ coefficients``。"""

    intercept: float
    coefficients: np.ndarray
    lambda_opt: float
    penalty: PenaltySpec
    cv: CvReport
    means: np.ndarray
    norms: np.ndarray
    y_mean: float
    active_index: Tuple[int, ...]
    dropped: Tuple[DroppedColumn, ...]
    fit_intercept: bool
    converged: bool
    kkt_residual: float
    n_train: int
    in_sample_mse: float

    @property
    def nonzero_count(self) -> int:
        return int(np.count_nonzero(self.coefficients))

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return self.intercept + x @ self.coefficients


__all__ = [
    "PenaltyFamily",
    "GridSource",
    "PenaltySpec",
    "SolveControl",
    "TrainOptions",
    "DroppedColumn",
    "StdSolution",
    "GridSummary",
    "CvReport",
    "FittedModel",
]
