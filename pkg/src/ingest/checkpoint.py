"""折统计量检查点：版本化 JSON，求解与交叉验证可据此重跑而无需重读原始数据。"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict

import numpy as np
from pydantic import ValidationError

from .errors import CheckpointError
from .models import RecordSchema
from .stats import FoldedStats, SufficientStats, packed_size

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class StatsCheckpoint:
    """检查点内容：折统计量、列布局与生成它的种子。"""

    folds: FoldedStats
    schema: RecordSchema
    seed: int

    @property
    def k(self) -> int:
        return self.folds.k


def _fold_payload(stats: SufficientStats) -> Dict[str, Any]:
    # 字段顺序固定为 n, sum_y, sum_yy, sum_x, xty, xtx_upper
    return {
        "n": stats.n,
        "sum_y": float(stats.sum_y),
        "sum_yy": float(stats.sum_yy),
        "sum_x": stats.sum_x.tolist(),
        "xty": stats.xty.tolist(),
        "xtx_upper": stats.xtx_upper.tolist(),
    }


def _fold_from_payload(data: Dict[str, Any], p: int) -> SufficientStats:
    sum_x = np.asarray(data["sum_x"], dtype=np.float64)
    xty = np.asarray(data["xty"], dtype=np.float64)
    xtx_upper = np.asarray(data["xtx_upper"], dtype=np.float64)
    if sum_x.shape != (p,) or xty.shape != (p,) or xtx_upper.shape != (packed_size(p),):
        raise CheckpointError(f"折统计量维度与 p={p} 不符")
    return SufficientStats(
        n=int(data["n"]),
        sum_y=float(data["sum_y"]),
        sum_yy=float(data["sum_yy"]),
        sum_x=sum_x,
        xty=xty,
        xtx_upper=xtx_upper,
    )


def dumps_checkpoint(checkpoint: StatsCheckpoint) -> str:
    folds = checkpoint.folds
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "k": folds.k,
        "p": folds.p,
        "seed": checkpoint.seed,
        "total_records": folds.total_records,
        "rejected_records": folds.rejected_records,
        "schema": checkpoint.schema.model_dump(mode="json"),
        "folds": [_fold_payload(fold) for fold in folds.folds],
    }
    return json.dumps(payload, ensure_ascii=False, indent=2) + "\n"


def save_checkpoint(path: Path, checkpoint: StatsCheckpoint) -> Path:
    """将检查点写入磁盘。"""

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_checkpoint(checkpoint), encoding="utf-8")
    return path


def load_checkpoint(path: Path) -> StatsCheckpoint:
    """从磁盘读取检查点。

    Raises:
        FileNotFoundError: 文件不存在。
        CheckpointError: 版本不符或内容损坏。
    """

    if not path.exists():
        raise FileNotFoundError(f"检查点文件不存在: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"检查点不是合法 JSON: {exc}") from exc

    version = data.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"不支持的检查点版本: {version}")
    try:
        schema = RecordSchema.model_validate(data["schema"])
        k, p = int(data["k"]), int(data["p"])
        folds = tuple(_fold_from_payload(item, p) for item in data["folds"])
        seed = int(data["seed"])
        total_records = int(data["total_records"])
        rejected_records = int(data["rejected_records"])
    except (KeyError, TypeError, ValueError, ValidationError) as exc:
        raise CheckpointError(f"检查点内容损坏: {exc}") from exc
    if len(folds) != k or schema.p != p:
        raise CheckpointError(f"检查点折数或维度不一致: k={k}, p={p}")

    folded = FoldedStats(folds=folds, total_records=total_records, rejected_records=rejected_records)
    if not folded.is_consistent():
        raise CheckpointError("检查点记录计数不一致")
    return StatsCheckpoint(folds=folded, schema=schema, seed=seed)


__all__ = [
    "CHECKPOINT_FORMAT_VERSION",
    "StatsCheckpoint",
    "dumps_checkpoint",
    "load_checkpoint",
    "save_checkpoint",
]
