"""模型文件：版本化 JSON 的读写与基于模型文件的逐行预测。"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, TextIO, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.ingest.errors import RejectionCapExceeded
from src.ingest.loaders import iter_lines, parse_decimal
from src.ingest.models import RecordSchema, normalize_delimiter
from src.ingest.stats import FoldedStats

from .domain import FittedModel
from .errors import RegressionError, SchemaMismatchError
from .utils import ensure_directory, logger

ARTIFACT_FORMAT_VERSION = 1


class ArtifactError(RegressionError):
    """模型文件版本不符或内容损坏。"""


def _finite_or_none(value: float) -> Optional[float]:
    value = float(value)
    return value if math.isfinite(value) else None


# ---------------------------------------------------------------------------
# 模型文件结构
# ---------------------------------------------------------------------------


class CoefficientEntry(BaseModel):
    name: str
    value: float


class PenaltyRecord(BaseModel):
    family: str
    mix: float


class GridRecord(BaseModel):
    """自动网格的来源参数，足以单凭模型文件复现网格。"""

    source: str
    lambda_max: float
    lambda_min_ratio: Optional[float] = None
    n_lambdas: int


class CvRecord(BaseModel):
    """交叉验证曲线；缺失的单元记为 null。"""

    mean_mse: List[Optional[float]]
    fold_mse: List[List[Optional[float]]]
    fold_sizes: List[int]
    opt_index: int
    skipped_folds: List[int] = Field(default_factory=list)
    excluded_cells: List[Tuple[int, int]] = Field(default_factory=list)


class StandardizationRecord(BaseModel):
    means: List[float]
    norms: List[float]
    y_mean: float
    active_index: List[int]
    dropped: List[int]
    fit_intercept: bool


class IngestSummary(BaseModel):
    """训练数据的摄取摘要与列布局，预测时据此定位特征列。"""

    n: int = Field(..., description="参与最终拟合的记录数")
    total_records: int
    rejected_records: int
    seed: int
    k: int
    exclude_last_fold: bool = False
    response: str
    response_index: int
    feature_names: List[str]
    feature_indices: List[int]
    n_fields: int
    has_header: bool
    delimiter: str


class ModelArtifact(BaseModel):
    """``train`` 的输出：原始尺度的 (α, β, λ_opt) 及复现所需的全部元数据。"""

    model_config = ConfigDict(extra="forbid")

    format_version: int = ARTIFACT_FORMAT_VERSION
    penalty: PenaltyRecord
    lambdas: List[float]
    grid: GridRecord
    lambda_opt: float
    intercept: float
    coefficients: List[CoefficientEntry]
    cv: CvRecord
    standardization: StandardizationRecord
    ingest: IngestSummary
    in_sample_mse: float
    converged: bool
    kkt_residual: Optional[float] = None

    @property
    def coefficient_vector(self) -> np.ndarray:
        return np.array([entry.value for entry in self.coefficients], dtype=np.float64)

    @property
    def feature_names(self) -> List[str]:
        return [entry.name for entry in self.coefficients]

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return self.intercept + x @ self.coefficient_vector


def build_artifact(
    model: FittedModel,
    schema: RecordSchema,
    folds: FoldedStats,
    seed: int,
    *,
    exclude_last_fold: bool = False,
) -> ModelArtifact:
    """把拟合结果与摄取元数据组装成模型文件。"""

    report = model.cv
    return ModelArtifact(
        penalty=PenaltyRecord(**model.penalty.penalty_summary()),
        lambdas=[float(lam) for lam in report.lambdas],
        grid=GridRecord(
            source=report.grid.source.value,
            lambda_max=float(report.grid.lambda_max),
            lambda_min_ratio=report.grid.lambda_min_ratio,
            n_lambdas=report.grid.n_lambdas,
        ),
        lambda_opt=float(model.lambda_opt),
        intercept=float(model.intercept),
        coefficients=[
            CoefficientEntry(name=name, value=float(value))
            for name, value in zip(schema.feature_names, model.coefficients)
        ],
        cv=CvRecord(
            mean_mse=[_finite_or_none(value) for value in report.mean_mse],
            fold_mse=[[_finite_or_none(value) for value in row] for row in report.fold_mse],
            fold_sizes=list(report.fold_sizes),
            opt_index=report.opt_index,
            skipped_folds=list(report.skipped_folds),
            excluded_cells=list(report.excluded_cells),
        ),
        standardization=StandardizationRecord(
            means=[float(value) for value in model.means],
            norms=[float(value) for value in model.norms],
            y_mean=float(model.y_mean),
            active_index=list(model.active_index),
            dropped=[column.index for column in model.dropped],
            fit_intercept=model.fit_intercept,
        ),
        ingest=IngestSummary(
            n=model.n_train,
            total_records=folds.total_records,
            rejected_records=folds.rejected_records,
            seed=seed,
            k=folds.k,
            exclude_last_fold=exclude_last_fold,
            response=schema.response_name,
            response_index=schema.response_index,
            feature_names=list(schema.feature_names),
            feature_indices=list(schema.feature_indices),
            n_fields=schema.n_fields,
            has_header=schema.has_header,
            delimiter=schema.delimiter,
        ),
        in_sample_mse=float(model.in_sample_mse),
        converged=model.converged,
        kkt_residual=_finite_or_none(model.kkt_residual),
    )


def dumps_artifact(artifact: ModelArtifact) -> str:
    """排序键、固定缩进的 JSON 文本；写 → 读 → 写字节一致。"""

    payload = artifact.model_dump(mode="json")
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_artifact(path: Path, artifact: ModelArtifact) -> Path:
    ensure_directory(path.parent)
    path.write_text(dumps_artifact(artifact), encoding="utf-8")
    logger.info("已保存模型文件: %s", path)
    return path


def read_artifact(path: Path) -> ModelArtifact:
    """读取模型文件。

    Raises:
        FileNotFoundError: 文件不存在。
        ArtifactError: 版本不符或内容损坏。
    """

    if not path.exists():
        raise FileNotFoundError(f"模型文件不存在: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"模型文件不是合法 JSON: {exc}") from exc
    version = data.get("format_version") if isinstance(data, dict) else None
    if version != ARTIFACT_FORMAT_VERSION:
        raise ArtifactError(f"不支持的模型文件版本: {version}")
    try:
        return ModelArtifact.model_validate(data)
    except ValidationError as exc:
        raise ArtifactError(f"模型文件内容损坏: {exc}") from exc


# ---------------------------------------------------------------------------
# 预测
# ---------------------------------------------------------------------------


@dataclass
class PredictionSummary:
    rows: int = 0
    rejected: int = 0
    scored: int = 0
    squared_error: float = 0.0

    @property
    def mse(self) -> Optional[float]:
        if self.scored == 0:
            return None
        return self.squared_error / self.scored


@dataclass(frozen=True)
class _InputLayout:
    """预测输入中特征列与响应列的位置。"""

    n_fields: int
    feature_positions: Tuple[int, ...]
    response_position: Optional[int]


def _resolve_layout(artifact: ModelArtifact, header: Optional[Sequence[str]]) -> List[_InputLayout]:
    ingest = artifact.ingest
    if header is not None:
        positions = {name: idx for idx, name in enumerate(header)}
        missing = [name for name in artifact.feature_names if name not in positions]
        if missing:
            raise SchemaMismatchError(missing)
        return [
            _InputLayout(
                n_fields=len(header),
                feature_positions=tuple(positions[name] for name in artifact.feature_names),
                response_position=positions.get(ingest.response),
            )
        ]
    # 无表头：完整训练布局（含响应列），或仅按顺序给出特征列
    return [
        _InputLayout(
            n_fields=ingest.n_fields,
            feature_positions=tuple(ingest.feature_indices),
            response_position=ingest.response_index,
        ),
        _InputLayout(
            n_fields=len(ingest.feature_indices),
            feature_positions=tuple(range(len(ingest.feature_indices))),
            response_position=None,
        ),
    ]


def _parse_row(
    fields: List[str], layouts: Sequence[_InputLayout]
) -> Tuple[Optional[np.ndarray], Optional[float]]:
    layout = next((item for item in layouts if item.n_fields == len(fields)), None)
    if layout is None:
        return None, None
    try:
        x = np.array([parse_decimal(fields[idx]) for idx in layout.feature_positions], dtype=np.float64)
    except ValueError:
        return None, None
    if not np.all(np.isfinite(x)):
        return None, None
    y: Optional[float] = None
    if layout.response_position is not None:
        try:
            y = parse_decimal(fields[layout.response_position])
        except ValueError:
            y = None
        if y is not None and not math.isfinite(y):
            y = None
    return x, y


def predict_lines(
    artifact: ModelArtifact,
    lines: Iterable[bytes],
    out: TextIO,
    *,
    delimiter: Optional[str] = None,
    has_header: Optional[bool] = None,
    append: bool = False,
    rejection_cap: float = 0.01,
) -> PredictionSummary:
    """对每条输入记录输出一行 ``α + xᵀβ``。

    格式错误的记录输出空预测并告警；拒绝比例超过 ``rejection_cap`` 时报错。
    输入含响应列时同时累计 MSE。

    Raises:
        SchemaMismatchError: 表头缺少模型需要的列。
        RejectionCapExceeded: 拒绝比例超过上限。
    """

    delimiter = normalize_delimiter(delimiter) if delimiter else artifact.ingest.delimiter
    has_header = artifact.ingest.has_header if has_header is None else has_header
    summary = PredictionSummary()
    beta = artifact.coefficient_vector
    layouts: Optional[List[_InputLayout]] = None if has_header else _resolve_layout(artifact, None)

    for raw in lines:
        if not raw.strip():
            continue
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            text = None
        if layouts is None:
            if text is None:
                raise SchemaMismatchError(artifact.feature_names)
            header = [name.strip() for name in text.split(delimiter)]
            layouts = _resolve_layout(artifact, header)
            if append:
                out.write(f"{text}{delimiter}prediction\n")
            continue

        summary.rows += 1
        x: Optional[np.ndarray] = None
        y: Optional[float] = None
        if text is not None:
            x, y = _parse_row(text.split(delimiter), layouts)
        if x is None:
            summary.rejected += 1
            logger.warning("第 %s 条记录格式错误，输出空预测", summary.rows)
            value = ""
        else:
            prediction = float(artifact.intercept + x @ beta)
            value = repr(prediction)
            if y is not None:
                summary.scored += 1
                summary.squared_error += (y - prediction) ** 2
        if append:
            echo = text if text is not None else raw.decode("utf-8", errors="replace")
            out.write(f"{echo}{delimiter}{value}\n")
        else:
            out.write(f"{value}\n")

    if summary.rows and summary.rejected > rejection_cap * summary.rows:
        raise RejectionCapExceeded(summary.rejected, summary.rows, rejection_cap)
    return summary


def predict_file(
    artifact: ModelArtifact,
    path: Path,
    output: Optional[Path] = None,
    **kwargs,
) -> PredictionSummary:
    """预测单个文件；``output`` 为空时写到标准输出。"""

    lines = (line for line, _ in iter_lines(Path(path)))
    if output is None:
        return predict_lines(artifact, lines, sys.stdout, **kwargs)
    ensure_directory(output.parent)
    with output.open("w", encoding="utf-8") as handle:
        summary = predict_lines(artifact, lines, handle, **kwargs)
    logger.info("已写出 %s 条预测: %s", summary.rows, output)
    return summary


__all__ = [
    "ARTIFACT_FORMAT_VERSION",
    "ArtifactError",
    "CoefficientEntry",
    "CvRecord",
    "GridRecord",
    "IngestSummary",
    "ModelArtifact",
    "PenaltyRecord",
    "PredictionSummary",
    "StandardizationRecord",
    "build_artifact",
    "dumps_artifact",
    "predict_file",
    "predict_lines",
    "read_artifact",
    "write_artifact",
]
