"""一遍扫描的数据摄取：充分统计量、折键分配与 map/reduce 聚合。"""

from .checkpoint import StatsCheckpoint, load_checkpoint, save_checkpoint
from .folds import assign_fold
from .loaders import IngestResult, ingest_shards, map_shard, parse_record, reduce_folds, resolve_schema
from .metrics import IngestMetricsLogger, RejectionReason
from .models import IngestConfig, RecordSchema
from .stats import FoldedStats, Sample, SufficientStats, merge, stats_of_sample

__all__ = [
    "FoldedStats",
    "IngestConfig",
    "IngestMetricsLogger",
    "IngestResult",
    "RecordSchema",
    "RejectionReason",
    "Sample",
    "StatsCheckpoint",
    "SufficientStats",
    "assign_fold",
    "ingest_shards",
    "load_checkpoint",
    "map_shard",
    "merge",
    "parse_record",
    "reduce_folds",
    "resolve_schema",
    "save_checkpoint",
    "stats_of_sample",
]
