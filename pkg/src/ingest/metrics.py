"""摄取链路指标记录模块。"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Dict, Optional


class RejectionReason(str, Enum):
    """记录被拒绝的原因。"""

    FIELD_COUNT = "field_count"
    UNPARSEABLE = "unparseable"
    NON_FINITE = "non_finite"
    ENCODING = "encoding"


@dataclass
class ShardReport:
    """单个分片一次扫描的计数结果。"""

    path: str
    records: int = 0
    rejected: int = 0
    header_lines: int = 0
    bytes_read: int = 0
    elapsed_ms: float = 0.0
    rejections: Dict[RejectionReason, int] = field(default_factory=dict)

    def count_rejection(self, reason: RejectionReason) -> None:
        self.rejected += 1
        self.rejections[reason] = self.rejections.get(reason, 0) + 1


@dataclass
class IngestRunStats:
    """摄取运行期指标累计值。"""

    shards: int = 0
    records_parsed: int = 0
    records_rejected: int = 0
    header_lines: int = 0
    bytes_read: int = 0
    bytes_prescanned: int = 0
    total_latency_ms: float = 0.0
    rejection_counts: Dict[RejectionReason, int] = field(default_factory=dict)

    @property
    def rejection_rate(self) -> float:
        """拒绝记录占比。"""

        if self.records_parsed == 0:
            return 0.0
        return self.records_rejected / self.records_parsed

    def to_dict(self) -> Dict[str, object]:
        """以字典形式返回指标摘要。"""

        return {
            "shards": self.shards,
            "records_parsed": self.records_parsed,
            "records_rejected": self.records_rejected,
            "rejection_rate": round(self.rejection_rate, 6),
            "header_lines": self.header_lines,
            "bytes_read": self.bytes_read,
            "bytes_prescanned": self.bytes_prescanned,
            "total_latency_ms": round(self.total_latency_ms, 3),
            "rejection_counts": {
                reason.value: count for reason, count in sorted(self.rejection_counts.items(), key=lambda item: item[0].value)
            },
        }


class IngestMetricsLogger:
    """记录每个分片的扫描指标，可选写入 JSONL 日志。

    多个分片 worker 并发回报，内部以锁保护累计值。
    """

    def __init__(self, log_path: Optional[Path] = None, *, ensure_dir: bool = True) -> None:
        self.log_path = log_path
        self.stats = IngestRunStats()
        self._lock = threading.Lock()
        if log_path is not None and ensure_dir:
            log_path.parent.mkdir(parents=True, exist_ok=True)

    def record_prescan(self, bytes_scanned: int) -> None:
        with self._lock:
            self.stats.bytes_prescanned += int(bytes_scanned)

    def record_shard(self, report: ShardReport, *, timestamp: Optional[datetime] = None) -> None:
        """记录单个分片的扫描结果。"""

        with self._lock:
            self._update_stats(report)
            if self.log_path is None:
                return
            event_time = timestamp or datetime.now(timezone.utc)
            payload = {
                "timestamp": event_time.isoformat(),
                "shard": report.path,
                "records": report.records,
                "rejected": report.rejected,
                "header_lines": report.header_lines,
                "bytes_read": report.bytes_read,
                "elapsed_ms": round(report.elapsed_ms, 3),
                "rejections": {reason.value: count for reason, count in report.rejections.items()},
            }
            with self.log_path.open("a", encoding="utf-8") as log_file:
                log_file.write(json.dumps(payload, ensure_ascii=False) + "\n")

    def _update_stats(self, report: ShardReport) -> None:
        self.stats.shards += 1
        self.stats.records_parsed += report.records
        self.stats.records_rejected += report.rejected
        self.stats.header_lines += report.header_lines
        self.stats.bytes_read += report.bytes_read
        self.stats.total_latency_ms += report.elapsed_ms
        for reason, count in report.rejections.items():
            self.stats.rejection_counts[reason] = self.stats.rejection_counts.get(reason, 0) + count

    def summary(self) -> Dict[str, object]:
        """返回当前累计指标摘要。"""

        with self._lock:
            return self.stats.to_dict()


__all__ = ["RejectionReason", "ShardReport", "IngestRunStats", "IngestMetricsLogger"]
