"""数据摄取阶段的异常定义。"""

from __future__ import annotations

from typing import Optional

from .metrics import RejectionReason


class IngestError(ValueError):
    """摄取阶段所有错误的基类。"""


class RejectedRecordError(IngestError):
    """单条记录无法解析；携带拒绝原因与出错列。"""

    def __init__(
        self,
        reason: RejectionReason,
        message: str,
        column: Optional[int] = None,
        field: Optional[str] = None,
    ) -> None:
        super().__init__(message)
        self.reason = reason
        self.column = column
        self.field = field


class IncompatibleStatsError(IngestError):
    """统计量维度或折数不一致，无法合并。"""


class SchemaError(IngestError):
    """列配置无法在输入文件上解析。"""


class ShardReadError(IngestError):
    """分片文件读取失败。"""

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


class RejectionCapExceeded(IngestError):
    """拒绝记录比例超过上限，整个摄取过程中止。"""

    def __init__(self, rejected: int, total: int, cap: float) -> None:
        super().__init__(f"拒绝记录 {rejected}/{total} 超过上限 {cap:.2%}，摄取中止")
        self.rejected = rejected
        self.total = total
        self.cap = cap


class CheckpointError(IngestError):
    """统计量检查点格式或版本不兼容。"""


__all__ = [
    "IngestError",
    "RejectedRecordError",
    "IncompatibleStatsError",
    "SchemaError",
    "ShardReadError",
    "RejectionCapExceeded",
    "CheckpointError",
]
