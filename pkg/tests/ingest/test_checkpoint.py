"""测试折统计量检查点的持久化。"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from src.ingest.checkpoint import (
    CHECKPOINT_FORMAT_VERSION,
    StatsCheckpoint,
    dumps_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from src.ingest.errors import CheckpointError
from src.ingest.loaders import ingest_shards
from src.ingest.models import IngestConfig


@pytest.fixture
def checkpoint(tmp_path: Path, make_regression, write_csv) -> StatsCheckpoint:
    x, y = make_regression(60, 3, seed=12)
    source = write_csv(tmp_path / "data.csv", x, y)
    result = ingest_shards(IngestConfig(response_column="y", shards=[source], seed=21, k=4))
    return StatsCheckpoint(folds=result.folds, schema=result.schema, seed=21)


def test_checkpoint_save_and_load(tmp_path: Path, checkpoint: StatsCheckpoint) -> None:
    path = save_checkpoint(tmp_path / "out" / "stats.json", checkpoint)
    loaded = load_checkpoint(path)

    assert loaded.k == 4
    assert loaded.seed == 21
    assert loaded.schema == checkpoint.schema
    assert loaded.folds.total_records == checkpoint.folds.total_records
    for original, restored in zip(checkpoint.folds.folds, loaded.folds.folds):
        assert original.n == restored.n
        np.testing.assert_array_equal(original.as_vector(), restored.as_vector())
    assert dumps_checkpoint(loaded) == path.read_text(encoding="utf-8")


def test_checkpoint_field_order(checkpoint: StatsCheckpoint) -> None:
    payload = json.loads(dumps_checkpoint(checkpoint))
    assert payload["format_version"] == CHECKPOINT_FORMAT_VERSION
    assert list(payload["folds"][0]) == ["n", "sum_y", "sum_yy", "sum_x", "xty", "xtx_upper"]
    assert len(payload["folds"][0]["xtx_upper"]) == 6
    assert sum(fold["n"] for fold in payload["folds"]) == 60


def test_checkpoint_missing_file(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        load_checkpoint(tmp_path / "missing.json")


def test_checkpoint_rejects_unknown_version(tmp_path: Path, checkpoint: StatsCheckpoint) -> None:
    payload = json.loads(dumps_checkpoint(checkpoint))
    payload["format_version"] = 99
    path = tmp_path / "stats.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_rejects_inconsistent_counts(tmp_path: Path, checkpoint: StatsCheckpoint) -> None:
    payload = json.loads(dumps_checkpoint(checkpoint))
    payload["total_records"] += 5
    path = tmp_path / "stats.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_checkpoint_rejects_corrupt_json(tmp_path: Path) -> None:
    path = tmp_path / "stats.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
