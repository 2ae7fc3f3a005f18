"""分隔文本加载器：解析记录、按分片执行 map、按折键 reduce。"""

from __future__ import annotations

import logging
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    IncompatibleStatsError,
    RejectedRecordError,
    RejectionCapExceeded,
    SchemaError,
    ShardReadError,
)
from .folds import assign_fold
from .metrics import IngestMetricsLogger, RejectionReason, ShardReport
from .models import ColumnRef, IngestConfig, RecordSchema
from .stats import FoldedStats, Sample, StatsAccumulator, SufficientStats

logger = logging.getLogger(__name__)

_BOM = b"\xef\xbb\xbf"

# 仅接受十进制记数（可带符号与指数）以及 nan / inf 记号；拒绝下划线与首尾空白
_DECIMAL = re.compile(r"[+-]?(?:(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|(?i:inf|infinity|nan))")


@dataclass(frozen=True, eq=False)
class IngestResult:
    """一次完整摄取的输出。"""

    folds: FoldedStats
    schema: RecordSchema


# ---------------------------------------------------------------------------
# 行读取
# ---------------------------------------------------------------------------


def _sanitize_line(raw: bytes) -> bytes:
    """去除行尾换行与回车。"""

    return raw.rstrip(b"\r\n")


def iter_lines(path: Path) -> Iterator[Tuple[bytes, int]]:
    """按行产出 ``(去换行后的内容, 原始字节数)``，跳过文件开头的 BOM。"""

    with path.open("rb") as handle:
        first = True
        for raw in handle:
            size = len(raw)
            if first:
                first = False
                if raw.startswith(_BOM):
                    raw = raw[len(_BOM) :]
            yield _sanitize_line(raw), size


def _data_lines(path: Path, has_header: bool) -> Iterator[Tuple[Optional[bytes], bytes, int]]:
    """产出 ``(表头或 None, 行, 字节数)``；空行不计为记录。"""

    header_seen = not has_header
    for line, size in iter_lines(path):
        if not line.strip():
            yield None, b"", size
            continue
        if not header_seen:
            header_seen = True
            yield line, b"", size
            continue
        yield None, line, size


def count_records(path: Path, has_header: bool) -> Tuple[int, int]:
    """只数行不解析，返回 ``(记录数, 字节数)``，用于确定分片的全局序号基址。"""

    records = 0
    scanned = 0
    try:
        for header, line, size in _data_lines(path, has_header):
            scanned += size
            if header is None and line:
                records += 1
    except OSError as exc:
        raise ShardReadError(str(path), f"读取失败: {exc}") from exc
    return records, scanned


# ---------------------------------------------------------------------------
# 列布局
# ---------------------------------------------------------------------------


def _split_fields(line: bytes, delimiter: str) -> List[str]:
    return line.decode("utf-8").split(delimiter)


def _first_line(path: Path) -> bytes:
    try:
        for line, _ in iter_lines(path):
            if line.strip():
                return line
    except OSError as exc:
        raise ShardReadError(str(path), f"读取失败: {exc}") from exc
    raise SchemaError(f"分片 {path} 为空，无法确定列布局")


def _resolve_column(ref: ColumnRef, header: Optional[List[str]], n_fields: int) -> int:
    if isinstance(ref, str) and header is not None:
        if ref in header:
            return header.index(ref)
        if not ref.lstrip("-").isdigit():
            raise SchemaError(f"表头中不存在列 {ref!r}")
    if isinstance(ref, str):
        if not ref.lstrip("-").isdigit():
            raise SchemaError(f"无表头文件只能按下标引用列，收到 {ref!r}")
        ref = int(ref)
    index = ref + n_fields if ref < 0 else ref
    if not 0 <= index < n_fields:
        raise SchemaError(f"列下标 {ref} 超出范围 [0, {n_fields})")
    return index


def resolve_schema(config: IngestConfig) -> RecordSchema:
    """在首个分片上确定响应列与特征列的位置和名称。"""

    first = _first_line(Path(config.shards[0]))
    try:
        fields = _split_fields(first, config.delimiter)
    except UnicodeDecodeError as exc:
        raise SchemaError(f"首行不是合法的 UTF-8: {exc}") from exc
    n_fields = len(fields)
    header = [name.strip() for name in fields] if config.has_header else None
    if n_fields < 2:
        raise SchemaError("至少需要一列特征和一列响应")

    response_index = _resolve_column(config.response_column, header, n_fields)
    if config.feature_columns is None:
        feature_indices = [idx for idx in range(n_fields) if idx != response_index]
    else:
        feature_indices = [_resolve_column(ref, header, n_fields) for ref in config.feature_columns]
    if response_index in feature_indices:
        raise SchemaError("响应列不能同时作为特征列")
    if len(set(feature_indices)) != len(feature_indices):
        raise SchemaError("特征列存在重复")

    if header is not None:
        feature_names = [header[idx] for idx in feature_indices]
        response_name = header[response_index]
    else:
        feature_names = [f"c{pos}" for pos in range(len(feature_indices))]
        response_name = f"col{response_index}"

    return RecordSchema(
        delimiter=config.delimiter,
        has_header=config.has_header,
        header=header,
        n_fields=n_fields,
        response_index=response_index,
        response_name=response_name,
        feature_indices=feature_indices,
        feature_names=feature_names,
    )


# ---------------------------------------------------------------------------
# 记录解析
# ---------------------------------------------------------------------------


def parse_decimal(text: str) -> float:
    """严格的十进制解析；``float`` 额外接受的 ``1_000``、带空白的字段等一律视为无法解析。

    Raises:
        ValueError: 不是十进制数值记号。
    """

    if _DECIMAL.fullmatch(text) is None:
        raise ValueError(f"不是十进制数值: {text!r}")
    return float(text)


def _parse_number(text: str, column: int) -> float:
    try:
        value = parse_decimal(text)
    except ValueError:
        raise RejectedRecordError(
            RejectionReason.UNPARSEABLE, f"第 {column} 列无法解析为数值: {text!r}", column=column
        ) from None
    if not math.isfinite(value):
        raise RejectedRecordError(RejectionReason.NON_FINITE, f"第 {column} 列为非有限值: {text!r}", column=column)
    return value


def parse_record(line: bytes, schema: RecordSchema) -> Sample:
    """将一行分隔文本解析为 Sample；数值解析与区域设置无关（小数点）。"""

    try:
        fields = _split_fields(line, schema.delimiter)
    except UnicodeDecodeError:
        raise RejectedRecordError(RejectionReason.ENCODING, "记录不是合法的 UTF-8") from None
    if len(fields) != schema.n_fields:
        raise RejectedRecordError(
            RejectionReason.FIELD_COUNT, f"字段数 {len(fields)} 与期望的 {schema.n_fields} 不符"
        )
    x = np.array([_parse_number(fields[idx], idx) for idx in schema.feature_indices], dtype=np.float64)
    y = _parse_number(fields[schema.response_index], schema.response_index)
    return Sample(x=x, y=y)


# ---------------------------------------------------------------------------
# map / reduce
# ---------------------------------------------------------------------------


class _FoldBuffers:
    """每折的行缓冲；满 batch_size 行即折算为块统计量并入累加器。"""

    def __init__(self, k: int, p: int, batch_size: int, compensated: bool) -> None:
        self.batch_size = batch_size
        self.rows: List[List[np.ndarray]] = [[] for _ in range(k)]
        self.responses: List[List[float]] = [[] for _ in range(k)]
        self.accumulators = [StatsAccumulator(p, compensated=compensated) for _ in range(k)]

    def add(self, fold: int, sample: Sample) -> None:
        self.rows[fold].append(sample.x)
        self.responses[fold].append(sample.y)
        if len(self.rows[fold]) >= self.batch_size:
            self._flush(fold)

    def _flush(self, fold: int) -> None:
        if not self.rows[fold]:
            return
        block = SufficientStats.from_rows(np.vstack(self.rows[fold]), np.asarray(self.responses[fold]))
        self.accumulators[fold].add(block)
        self.rows[fold] = []
        self.responses[fold] = []

    def finish(self) -> Tuple[SufficientStats, ...]:
        for fold in range(len(self.rows)):
            self._flush(fold)
        return tuple(acc.result() for acc in self.accumulators)


def map_shard(
    shard: Path,
    config: IngestConfig,
    *,
    schema: Optional[RecordSchema] = None,
    ordinal_base: int = 0,
    rejection_limit: Optional[int] = None,
    expected_total: Optional[int] = None,
    metrics: Optional[IngestMetricsLogger] = None,
) -> FoldedStats:
    """扫描单个分片一次，按折键在本地累加统计量（combiner 语义）。

    Args:
        shard: 分片路径。
        config: 摄取配置。
        schema: 列布局；省略时由配置解析。
        ordinal_base: 本分片首条记录的全局序号。
        rejection_limit: 本分片拒绝数超过该值时立即中止。
        expected_total: 全部分片的记录总数，仅用于中止时的报告。
        metrics: 可选的指标记录器。

    Raises:
        ShardReadError: 分片读取失败。
        RejectionCapExceeded: 拒绝数超过 rejection_limit。
    """

    shard = Path(shard)
    schema = schema or resolve_schema(config)
    buffers = _FoldBuffers(config.k, schema.p, config.batch_size, config.compensated)
    report = ShardReport(path=str(shard))
    start = time.perf_counter()
    logger.debug("开始扫描分片 %s，序号基址 %s", shard, ordinal_base)

    try:
        for header, line, size in _data_lines(shard, config.has_header):
            report.bytes_read += size
            if header is not None:
                report.header_lines += 1
                _check_header(header, schema, shard)
                continue
            if not line:
                continue
            ordinal = ordinal_base + report.records
            report.records += 1
            try:
                sample = parse_record(line, schema)
            except RejectedRecordError as exc:
                report.count_rejection(exc.reason)
                logger.debug("拒绝记录 %s#%s: %s", shard, ordinal, exc)
                if rejection_limit is not None and report.rejected > rejection_limit:
                    raise RejectionCapExceeded(
                        report.rejected, expected_total or report.records, config.rejection_cap
                    ) from exc
                continue
            buffers.add(assign_fold(ordinal, config.seed, config.k), sample)
    except OSError as exc:
        raise ShardReadError(str(shard), f"读取失败: {exc}") from exc

    report.elapsed_ms = (time.perf_counter() - start) * 1000
    if metrics is not None:
        metrics.record_shard(report)
    if report.rejected:
        logger.warning("分片 %s 拒绝记录 %s/%s", shard, report.rejected, report.records)
    return FoldedStats(
        folds=buffers.finish(),
        total_records=report.records,
        rejected_records=report.rejected,
    )


def _check_header(line: bytes, schema: RecordSchema, shard: Path) -> None:
    try:
        header = [name.strip() for name in _split_fields(line, schema.delimiter)]
    except UnicodeDecodeError as exc:
        raise SchemaError(f"分片 {shard} 表头不是合法的 UTF-8") from exc
    if header != schema.header:
        raise SchemaError(f"分片 {shard} 的表头与首个分片不一致")


def reduce_folds(partials: Sequence[FoldedStats], *, compensated: bool = False) -> FoldedStats:
    """按折合并所有分片的局部统计量，并汇总记录计数。"""

    if not partials:
        raise IncompatibleStatsError("没有可合并的分片结果")
    k, p = partials[0].k, partials[0].p
    for partial in partials:
        if partial.k != k or partial.p != p:
            raise IncompatibleStatsError(
                f"分片结果不兼容: k={partial.k}, p={partial.p}，期望 k={k}, p={p}"
            )
    if len(partials) == 1:
        return partials[0]

    accumulators = [StatsAccumulator(p, compensated=compensated) for _ in range(k)]
    for partial in partials:
        for fold, stats in enumerate(partial.folds):
            accumulators[fold].add(stats)
    return FoldedStats(
        folds=tuple(acc.result() for acc in accumulators),
        total_records=sum(partial.total_records for partial in partials),
        rejected_records=sum(partial.rejected_records for partial in partials),
    )


def ingest_shards(config: IngestConfig, *, metrics: Optional[IngestMetricsLogger] = None) -> IngestResult:
    """完整的一遍扫描：map 所有分片后按折 reduce。

    单 worker 时按配置顺序流式处理并累加序号基址；多 worker 时先数行确定
    各分片基址，再并发 map。两种方式得到相同的折键。
    """

    schema = resolve_schema(config)
    shards = [Path(path) for path in config.shards]
    start = time.perf_counter()

    if config.threads == 1 or len(shards) == 1:
        partials: List[FoldedStats] = []
        base = 0
        for shard in shards:
            partial = map_shard(shard, config, schema=schema, ordinal_base=base, metrics=metrics)
            base += partial.total_records
            partials.append(partial)
    else:
        bases: List[int] = []
        total = 0
        for shard in shards:
            bases.append(total)
            records, scanned = count_records(shard, config.has_header)
            total += records
            if metrics is not None:
                metrics.record_prescan(scanned)
        limit = math.floor(config.rejection_cap * total)
        with ThreadPoolExecutor(max_workers=config.threads) as executor:
            futures = [
                executor.submit(
                    map_shard,
                    shard,
                    config,
                    schema=schema,
                    ordinal_base=base,
                    rejection_limit=limit,
                    expected_total=total,
                    metrics=metrics,
                )
                for shard, base in zip(shards, bases)
            ]
            partials = [future.result() for future in futures]

    folds = reduce_folds(partials, compensated=config.compensated)
    if folds.total_records and folds.rejected_records > config.rejection_cap * folds.total_records:
        raise RejectionCapExceeded(folds.rejected_records, folds.total_records, config.rejection_cap)

    logger.info(
        "摄取完成：分片=%s，记录=%s，拒绝=%s，折大小=%s，耗时 %.2fs",
        len(shards),
        folds.total_records,
        folds.rejected_records,
        list(folds.fold_sizes),
        time.perf_counter() - start,
    )
    return IngestResult(folds=folds, schema=schema)


__all__ = [
    "IngestResult",
    "count_records",
    "ingest_shards",
    "iter_lines",
    "map_shard",
    "parse_decimal",
    "parse_record",
    "reduce_folds",
    "resolve_schema",
]
