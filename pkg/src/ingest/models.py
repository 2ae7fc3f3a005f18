"""摄取相关的配置与数据模型。"""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

ColumnRef = Union[int, str]

_DELIMITER_ALIASES = {"\\t": "\t", "tab": "\t", "TAB": "\t"}


def normalize_delimiter(value: str) -> str:
    """把 ``\\t``/``tab`` 等写法还原为实际字符，并检查是否为单字节。"""

    value = _DELIMITER_ALIASES.get(value, value)
    if not isinstance(value, str) or len(value.encode("utf-8")) != 1:
        raise ValueError("分隔符必须是单字节字符")
    return value


class IngestConfig(BaseModel):
    """一次摄取（map + reduce）所需的全部参数。"""

    model_config = ConfigDict(extra="forbid")

    k: int = Field(5, ge=2, description="交叉验证折数")
    seed: int = Field(0, ge=0, le=(1 << 64) - 1, description="折键哈希种子（无符号 64 位）")
    response_column: ColumnRef = Field(..., description="响应列名或下标，负下标从末尾计数")
    feature_columns: Optional[List[ColumnRef]] = Field(
        None, description="按顺序列出的特征列；None 表示除响应列外的所有列"
    )
    delimiter: str = Field(",", description="单字节分隔符")
    has_header: bool = Field(True, description="每个分片首行是否为表头")
    shards: List[Path] = Field(..., min_length=1, description="输入分片路径，顺序决定全局序号")
    rejection_cap: float = Field(0.01, ge=0.0, le=1.0, description="允许的拒绝记录比例上限")
    batch_size: int = Field(4096, ge=1, description="combiner 每折缓冲的行数")
    compensated: bool = Field(False, description="是否启用补偿求和")
    threads: int = Field(1, ge=1, description="并发 worker 数")

    @field_validator("delimiter", mode="before")
    def _normalise_delimiter(cls, value: str) -> str:  # noqa: N805
        return normalize_delimiter(value)

    @field_validator("feature_columns")
    def _non_empty_features(cls, value: Optional[List[ColumnRef]]) -> Optional[List[ColumnRef]]:  # noqa: N805
        if value is not None and not value:
            raise ValueError("特征列不能为空")
        if value is not None and len(set(value)) != len(value):
            raise ValueError("特征列存在重复")
        return value

    @model_validator(mode="after")
    def _response_not_feature(self) -> "IngestConfig":
        if self.feature_columns is not None and self.response_column in self.feature_columns:
            raise ValueError("响应列不能同时作为特征列")
        return self


class RecordSchema(BaseModel):
    """在首个分片上解析出的列布局。"""

    delimiter: str = ","
    has_header: bool = True
    header: Optional[List[str]] = None
    n_fields: int = Field(..., ge=2)
    response_index: int = Field(..., ge=0)
    response_name: str
    feature_indices: List[int] = Field(..., min_length=1)
    feature_names: List[str] = Field(..., min_length=1)

    @property
    def p(self) -> int:
        return len(self.feature_indices)


__all__ = ["ColumnRef", "IngestConfig", "RecordSchema", "normalize_delimiter"]
