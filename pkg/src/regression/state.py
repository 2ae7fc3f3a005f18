"""训练运行的全局状态与元数据模型。"""

from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional
from uuid import uuid4

from pydantic import BaseModel, ConfigDict, Field

from src.ingest.models import IngestConfig, RecordSchema
from src.ingest.stats import FoldedStats

from .artifact import ModelArtifact, PredictionSummary
from .domain import CvReport, FittedModel, PenaltySpec, SolveControl, TrainOptions


class FailureStage(str, Enum):
    """失败阶段；命令行据此决定退出码。"""

    USAGE = "usage"
    INGEST = "ingest"
    SOLVE = "solve"
    SCHEMA = "schema"


EXIT_CODES: Dict[Optional[FailureStage], int] = {
    None: 0,
    FailureStage.USAGE: 2,
    FailureStage.INGEST: 3,
    FailureStage.SOLVE: 4,
    FailureStage.SCHEMA: 5,
}


class TrainState(BaseModel):
    """流水线各阶段之间传递的状态。"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    run_id: str = Field(default_factory=lambda: uuid4().hex[:12])

    # 输入
    ingest_config: Optional[IngestConfig] = None
    from_stats: Optional[Path] = None
    expected_k: Optional[int] = Field(None, description="显式给出的 k；从检查点恢复时用于校验")
    penalty: PenaltySpec = Field(default_factory=PenaltySpec)
    control: SolveControl = Field(default_factory=SolveControl)
    options: TrainOptions = Field(default_factory=TrainOptions)
    metrics_log: Optional[Path] = None

    # 中间结果
    folds: Optional[FoldedStats] = Field(default=None, exclude=True)
    record_schema: Optional[RecordSchema] = None
    seed: int = 0
    report: Optional[CvReport] = Field(default=None, exclude=True)
    model: Optional[FittedModel] = Field(default=None, exclude=True)

    # 输出
    artifact: Optional[ModelArtifact] = None
    output_path: Optional[Path] = None
    prediction: Optional[PredictionSummary] = None
    metrics: Dict[str, Any] = Field(default_factory=dict)

    # 元数据
    elapsed_seconds: float = 0.0
    warnings: List[str] = Field(default_factory=list)
    errors: List[str] = Field(default_factory=list)
    failure_stage: Optional[FailureStage] = None

    def record_error(self, message: str, stage: FailureStage) -> None:
        self.errors.append(message)
        if self.failure_stage is None:
            self.failure_stage = stage

    def record_warning(self, message: str) -> None:
        self.warnings.append(message)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.failure_stage]

    def succeed(self) -> bool:
        return not self.errors


__all__ = ["EXIT_CODES", "FailureStage", "TrainState"]
