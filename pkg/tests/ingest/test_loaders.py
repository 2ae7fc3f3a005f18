"""验证记录解析、分片 map 与按折 reduce。"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from src.ingest.errors import (
    IncompatibleStatsError,
    RejectedRecordError,
    RejectionCapExceeded,
    SchemaError,
    ShardReadError,
)
from src.ingest.folds import assign_fold
from src.ingest.loaders import (
    count_records,
    ingest_shards,
    map_shard,
    parse_decimal,
    parse_record,
    reduce_folds,
    resolve_schema,
)
from src.ingest.metrics import IngestMetricsLogger, RejectionReason
from src.ingest.models import IngestConfig, RecordSchema
from src.ingest.stats import FoldedStats, Sample, SufficientStats, stats_of_sample


def _schema(n_fields: int = 3) -> RecordSchema:
    return RecordSchema(
        n_fields=n_fields,
        response_index=n_fields - 1,
        response_name="y",
        feature_indices=list(range(n_fields - 1)),
        feature_names=[f"x{j}" for j in range(n_fields - 1)],
    )


def _assert_folds_close(a: FoldedStats, b: FoldedStats) -> None:
    assert a.k == b.k
    assert a.fold_sizes == b.fold_sizes
    assert a.total_records == b.total_records
    for left, right in zip(a.folds, b.folds):
        np.testing.assert_allclose(left.as_vector(), right.as_vector(), rtol=1e-12, atol=1e-12)


def test_parse_record_extracts_response_last() -> None:
    sample = parse_record(b"1.0,2.0,3.0", _schema())
    np.testing.assert_array_equal(sample.x, [1.0, 2.0])
    assert sample.y == 3.0


def test_parse_record_reports_bad_column() -> None:
    with pytest.raises(RejectedRecordError) as excinfo:
        parse_record(b"1.0,abc,3.0", _schema())
    assert excinfo.value.reason is RejectionReason.UNPARSEABLE
    assert excinfo.value.column == 1


@pytest.mark.parametrize(
    "line, reason",
    [
        (b"1.0,2.0", RejectionReason.FIELD_COUNT),
        (b"1.0,nan,3.0", RejectionReason.NON_FINITE),
        (b"1.0,inf,3.0", RejectionReason.NON_FINITE),
        (b"1.0,\xff,3.0", RejectionReason.ENCODING),
    ],
)
def test_parse_record_rejections(line: bytes, reason: RejectionReason) -> None:
    with pytest.raises(RejectedRecordError) as excinfo:
        parse_record(line, _schema())
    assert excinfo.value.reason is reason


@pytest.mark.parametrize(
    "token, reason",
    [
        ("1_000", RejectionReason.UNPARSEABLE),
        (" 2", RejectionReason.UNPARSEABLE),
        ("2 ", RejectionReason.UNPARSEABLE),
        ("0x10", RejectionReason.UNPARSEABLE),
        ("", RejectionReason.UNPARSEABLE),
        ("infinity", RejectionReason.NON_FINITE),
        ("-Infinity", RejectionReason.NON_FINITE),
    ],
)
def test_parse_record_rejects_non_decimal_tokens(token: str, reason: RejectionReason) -> None:
    with pytest.raises(RejectedRecordError) as excinfo:
        parse_record(f"1.0,{token},3.0".encode("utf-8"), _schema())
    assert excinfo.value.reason is reason
    assert excinfo.value.column == 1


@pytest.mark.parametrize("token, value", [("1e3", 1000.0), ("-.5", -0.5), ("+2.", 2.0), ("7E-1", 0.7)])
def test_parse_decimal_accepts_plain_notation(token: str, value: float) -> None:
    assert parse_decimal(token) == value
    assert parse_record(f"{token},0,1".encode("utf-8"), _schema()).x[0] == value


def test_resolve_schema_by_name_and_negative_index(tmp_path: Path) -> None:
    shard = tmp_path / "data.csv"
    shard.write_text("a,b,target,c\n1,2,3,4\n", encoding="utf-8")
    schema = resolve_schema(IngestConfig(response_column="target", feature_columns=["c", "a"], shards=[shard]))
    assert schema.response_index == 2
    assert schema.feature_indices == [3, 0]
    assert schema.feature_names == ["c", "a"]

    headerless = tmp_path / "raw.csv"
    headerless.write_text("1,2,3\n", encoding="utf-8")
    schema = resolve_schema(IngestConfig(response_column="-1", has_header=False, shards=[headerless]))
    assert schema.response_index == 2
    assert schema.feature_names == ["c0", "c1"]


def test_resolve_schema_rejects_unknown_column(tmp_path: Path) -> None:
    shard = tmp_path / "data.csv"
    shard.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        resolve_schema(IngestConfig(response_column="missing", shards=[shard]))


def test_header_is_skipped_and_not_counted(tmp_path: Path) -> None:
    shard = tmp_path / "data.csv"
    shard.write_text("x0,x1,y\n1.0,2.0,3.0\n\n4.0,5.0,6.0\n", encoding="utf-8")
    assert count_records(shard, has_header=True)[0] == 2

    metrics = IngestMetricsLogger()
    partial = map_shard(shard, IngestConfig(response_column="y", shards=[shard]), metrics=metrics)
    assert partial.total_records == 2
    assert partial.n == 2
    assert metrics.summary()["header_lines"] == 1


def test_map_shard_empty_file(tmp_path: Path) -> None:
    shard = tmp_path / "empty.csv"
    shard.write_text("", encoding="utf-8")
    config = IngestConfig(response_column="-1", has_header=False, shards=[shard])
    partial = map_shard(shard, config, schema=_schema())
    assert partial.total_records == 0
    assert partial.fold_sizes == (0, 0, 0, 0, 0)


def test_map_shard_single_record(tmp_path: Path) -> None:
    shard = tmp_path / "one.csv"
    shard.write_text("x0,x1,y\n1.5,-2.0,4.0\n", encoding="utf-8")
    config = IngestConfig(response_column="y", shards=[shard], seed=9)
    partial = map_shard(shard, config)
    key = assign_fold(0, 9, 5)
    expected = stats_of_sample(Sample(x=np.array([1.5, -2.0]), y=4.0))
    assert [fold.n for fold in partial.folds] == [1 if i == key else 0 for i in range(5)]
    np.testing.assert_array_equal(partial.folds[key].as_vector(), expected.as_vector())


def test_map_shard_rejection_cap_aborts(tmp_path: Path) -> None:
    shard = tmp_path / "dirty.csv"
    shard.write_text("x,y\n1,2\nbad,3\n4,oops\n5,6\n", encoding="utf-8")
    config = IngestConfig(response_column="y", shards=[shard])
    with pytest.raises(RejectionCapExceeded):
        map_shard(shard, config, rejection_limit=1, expected_total=4)


def test_map_shard_missing_file(tmp_path: Path) -> None:
    missing = tmp_path / "missing.csv"
    config = IngestConfig(response_column="-1", has_header=False, shards=[missing])
    with pytest.raises(ShardReadError) as excinfo:
        map_shard(missing, config, schema=_schema())
    assert excinfo.value.path == str(missing)


def test_split_shards_match_unsplit(tmp_path: Path, make_regression, write_csv, split_csv) -> None:
    x, y = make_regression(100, 3, seed=1)
    source = write_csv(tmp_path / "full.csv", x, y)
    whole = map_shard(source, IngestConfig(response_column="y", shards=[source], seed=3))

    first, second = split_csv(source, 2)
    config = IngestConfig(response_column="y", shards=[first, second], seed=3)
    left = map_shard(first, config)
    right = map_shard(second, config, ordinal_base=left.total_records)
    _assert_folds_close(reduce_folds([left, right]), whole)


def test_reduce_identity_and_permutation(tmp_path: Path, make_regression, write_csv, split_csv) -> None:
    x, y = make_regression(120, 2, seed=4)
    source = write_csv(tmp_path / "full.csv", x, y)
    shards = split_csv(source, 3)
    config = IngestConfig(response_column="y", shards=shards)
    partials = []
    base = 0
    for shard in shards:
        partial = map_shard(shard, config, ordinal_base=base)
        base += partial.total_records
        partials.append(partial)

    assert reduce_folds(partials[:1]) is partials[0]
    _assert_folds_close(reduce_folds(partials), reduce_folds(list(reversed(partials))))


def test_reduce_rejects_incompatible_partials() -> None:
    with pytest.raises(IncompatibleStatsError):
        reduce_folds([FoldedStats.empty(5, 2), FoldedStats.empty(3, 2)])
    with pytest.raises(IncompatibleStatsError):
        reduce_folds([FoldedStats.empty(5, 2), FoldedStats.empty(5, 4)])


@pytest.mark.parametrize("threads", [1, 4])
def test_eight_shards_equal_single_file(tmp_path: Path, make_regression, write_csv, split_csv, threads: int) -> None:
    x, y = make_regression(400, 4, seed=8)
    source = write_csv(tmp_path / "full.csv", x, y)
    single = ingest_shards(IngestConfig(response_column="y", shards=[source], seed=5))
    sharded = ingest_shards(
        IngestConfig(response_column="y", shards=split_csv(source, 8), seed=5, threads=threads, batch_size=16)
    )
    _assert_folds_close(sharded.folds, single.folds)
    assert sharded.schema == single.schema


def test_ingest_counts_reconcile(tmp_path: Path) -> None:
    rows = ["x,y"] + [f"{i},{2 * i}" for i in range(150)] + ["bad,1"]
    shard = tmp_path / "data.csv"
    shard.write_text("\n".join(rows) + "\n", encoding="utf-8")
    metrics = IngestMetricsLogger()
    result = ingest_shards(IngestConfig(response_column="y", shards=[shard]), metrics=metrics)
    folds = result.folds
    assert folds.total_records == 151
    assert folds.rejected_records == 1
    assert folds.is_consistent()
    summary = metrics.summary()
    assert summary["records_parsed"] == 151
    assert summary["rejection_counts"] == {"unparseable": 1}


def test_ingest_rejection_cap_breach(tmp_path: Path) -> None:
    shard = tmp_path / "dirty.csv"
    shard.write_text("x,y\n1,2\nbad,3\n", encoding="utf-8")
    with pytest.raises(RejectionCapExceeded) as excinfo:
        ingest_shards(IngestConfig(response_column="y", shards=[shard]))
    assert excinfo.value.rejected == 1
    assert excinfo.value.total == 2


def test_ingest_rejects_mismatched_headers(tmp_path: Path) -> None:
    first = tmp_path / "a.csv"
    second = tmp_path / "b.csv"
    first.write_text("x,y\n1,2\n", encoding="utf-8")
    second.write_text("z,y\n1,2\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        ingest_shards(IngestConfig(response_column="y", shards=[first, second]))


def test_tab_delimiter_and_crlf(tmp_path: Path) -> None:
    shard = tmp_path / "data.tsv"
    shard.write_bytes(b"\xef\xbb\xbfa\tb\ty\r\n1\t2\t3\r\n4\t5\t6\r\n")
    result = ingest_shards(IngestConfig(response_column="y", delimiter="\\t", shards=[shard]))
    assert result.schema.feature_names == ["a", "b"]
    combined = result.folds.combined()
    expected = SufficientStats.from_rows(np.array([[1.0, 2.0], [4.0, 5.0]]), np.array([3.0, 6.0]))
    np.testing.assert_allclose(combined.as_vector(), expected.as_vector())
