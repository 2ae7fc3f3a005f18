"""惩罚线性回归的完整工作流：摄取 → 交叉验证 → 最终拟合 → 模型文件。"""

from __future__ import annotations

import time
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from src.ingest.checkpoint import StatsCheckpoint, load_checkpoint, save_checkpoint
from src.ingest.errors import IngestError
from src.ingest.loaders import ingest_shards
from src.ingest.metrics import IngestMetricsLogger

from .artifact import ArtifactError, build_artifact, predict_file, read_artifact, write_artifact
from .cv import cross_validate, train
from .errors import RegressionError, SchemaMismatchError
from .state import FailureStage, TrainState
from .utils import logger


class PenalizedRegressionPipeline:
    """一遍扫描数据，之后的所有阶段只消费折统计量。"""

    def __init__(self, metrics: Optional[IngestMetricsLogger] = None) -> None:
        self.metrics = metrics

    # ------------------------------------------------------------------
    # 对外接口
    # ------------------------------------------------------------------

    def run(self, state: TrainState) -> TrainState:
        """训练并写出模型文件；失败记录在 state 中而不抛出。"""

        logger.info("启动训练流程：RunId=%s", state.run_id)
        start_time = time.perf_counter()

        self._load_folds(state)
        if state.errors:
            return state

        self._cross_validate(state)
        if state.errors:
            return state

        self._fit(state)
        if state.errors:
            return state

        self._persist(state)
        state.elapsed_seconds = time.perf_counter() - start_time
        logger.info("训练流程完成，耗时 %.2fs", state.elapsed_seconds)
        return state

    def dump_stats(self, state: TrainState) -> TrainState:
        """只执行摄取并写出折统计量检查点。"""

        start_time = time.perf_counter()
        self._ingest(state)
        if state.errors:
            return state
        if state.output_path is None:
            state.record_error("未指定检查点输出路径", FailureStage.USAGE)
            return state
        checkpoint = StatsCheckpoint(folds=state.folds, schema=state.record_schema, seed=state.seed)
        try:
            save_checkpoint(state.output_path, checkpoint)
        except OSError as exc:
            state.record_error(f"检查点写入失败: {exc}", FailureStage.INGEST)
            return state
        state.elapsed_seconds = time.perf_counter() - start_time
        logger.info("已保存折统计量检查点: %s (k=%s, n=%s)", state.output_path, checkpoint.k, state.folds.n)
        return state

    def predict(
        self,
        state: TrainState,
        model_path: Path,
        input_path: Path,
        **kwargs: Any,
    ) -> TrainState:
        """用已保存的模型对新数据逐行预测。"""

        try:
            state.artifact = read_artifact(model_path)
        except (FileNotFoundError, ArtifactError) as exc:
            state.record_error(f"模型文件读取失败: {exc}", FailureStage.USAGE)
            return state
        try:
            state.prediction = predict_file(state.artifact, input_path, state.output_path, **kwargs)
        except SchemaMismatchError as exc:
            state.record_error(str(exc), FailureStage.SCHEMA)
            return state
        except (IngestError, OSError) as exc:
            state.record_error(f"预测输入读取失败: {exc}", FailureStage.INGEST)
            return state
        except ValueError as exc:
            state.record_error(f"参数错误: {exc}", FailureStage.USAGE)
            return state
        if state.prediction.rejected:
            state.record_warning(f"{state.prediction.rejected} 条记录格式错误，已输出空预测")
        return state

    # ------------------------------------------------------------------
    # 辅助步骤
    # ------------------------------------------------------------------

    def _load_folds(self, state: TrainState) -> None:
        if state.from_stats is None:
            self._ingest(state)
            return
        try:
            checkpoint = load_checkpoint(state.from_stats)
        except (FileNotFoundError, IngestError) as exc:
            state.record_error(f"检查点读取失败: {exc}", FailureStage.INGEST)
            return
        if state.expected_k is not None and state.expected_k != checkpoint.k:
            state.record_error(
                f"检查点的 k={checkpoint.k} 与 --k={state.expected_k} 不一致", FailureStage.USAGE
            )
            return
        state.folds = checkpoint.folds
        state.record_schema = checkpoint.schema
        state.seed = checkpoint.seed
        logger.info("从检查点恢复折统计量：k=%s，n=%s", checkpoint.k, checkpoint.folds.n)

    def _ingest(self, state: TrainState) -> None:
        config = state.ingest_config
        if config is None:
            state.record_error("缺少输入分片配置", FailureStage.USAGE)
            return
        metrics = self.metrics or IngestMetricsLogger(state.metrics_log)
        try:
            result = ingest_shards(config, metrics=metrics)
        except (IngestError, OSError) as exc:
            state.record_error(f"摄取失败: {exc}", FailureStage.INGEST)
            return
        finally:
            state.metrics = metrics.summary()
        state.folds = result.folds
        state.record_schema = result.schema
        state.seed = config.seed
        if result.folds.rejected_records:
            state.record_warning(f"拒绝记录 {result.folds.rejected_records}/{result.folds.total_records}")

    def _cross_validate(self, state: TrainState) -> None:
        try:
            state.report = cross_validate(state.folds, state.penalty, state.control, state.options)
        except RegressionError as exc:
            state.record_error(f"交叉验证失败: {exc}", FailureStage.SOLVE)
            return
        for i in state.report.skipped_folds:
            state.record_warning(f"折 {i} 为空，已跳过")
        if state.report.excluded_cells:
            state.record_warning(f"{len(state.report.excluded_cells)} 个 (折, λ) 单元未收敛")

    def _fit(self, state: TrainState) -> None:
        try:
            state.model = train(state.folds, state.penalty, state.control, state.options, state.report)
        except RegressionError as exc:
            state.record_error(f"最终拟合失败: {exc}", FailureStage.SOLVE)
            return
        if not state.model.converged:
            state.record_warning(f"最终拟合未收敛，KKT 残差 {state.model.kkt_residual:.3g}")

    def _persist(self, state: TrainState) -> None:
        state.artifact = build_artifact(
            state.model,
            state.record_schema,
            state.folds,
            state.seed,
            exclude_last_fold=state.options.exclude_last_fold,
        )
        if state.output_path is None:
            return
        try:
            write_artifact(state.output_path, state.artifact)
        except OSError as exc:
            state.record_error(f"模型文件写入失败: {exc}", FailureStage.USAGE)


def run_training(state: TrainState, metrics: Optional[IngestMetricsLogger] = None) -> TrainState:
    return PenalizedRegressionPipeline(metrics).run(state)


def summarize(state: TrainState) -> Dict[str, Any]:
    """训练结果的简要摘要，供命令行打印。"""

    if state.model is None or state.report is None:
        return {}
    report = state.report
    best = report.mean_mse[report.opt_index]
    return {
        "lambda_opt": state.model.lambda_opt,
        "opt_index": report.opt_index,
        "n_lambdas": len(report.lambdas),
        "nonzero": state.model.nonzero_count,
        "p": len(state.model.coefficients),
        "cv_mse": float(best),
        "cv_mse_range": (float(np.nanmin(report.mean_mse)), float(np.nanmax(report.mean_mse))),
        "in_sample_mse": state.model.in_sample_mse,
        "converged": state.model.converged,
        "fold_sizes": list(report.fold_sizes),
    }


__all__ = ["PenalizedRegressionPipeline", "run_training", "summarize"]
