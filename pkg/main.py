#!/usr/bin/env python3
"""惩罚线性回归 CLI：train / predict / stats。"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from pydantic import ValidationError  # noqa: E402

from src.ingest.models import IngestConfig  # noqa: E402
from src.regression.domain import PenaltySpec, SolveControl, TrainOptions  # noqa: E402
from src.regression.pipeline import PenalizedRegressionPipeline, summarize  # noqa: E402
from src.regression.state import EXIT_CODES, FailureStage, TrainState  # noqa: E402
from src.regression.utils import configure_logging, load_env_settings, logger, resolve_thread_count  # noqa: E402

USAGE_EXIT = EXIT_CODES[FailureStage.USAGE]


def _add_input_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", action="append", default=[], help="输入分片，可重复指定，顺序决定记录序号")
    parser.add_argument("--response", help="响应列名或下标（负下标从末尾计数）")
    parser.add_argument("--features", help="逗号分隔的特征列；默认除响应列外全部列")
    parser.add_argument("--k", type=int, help="交叉验证折数（默认 5）")
    parser.add_argument("--seed", type=int, default=0, help="折键哈希种子")
    parser.add_argument("--delimiter", default=",", help="单字节分隔符，\\t 表示制表符")
    parser.add_argument("--no-header", action="store_true", help="输入文件没有表头")
    parser.add_argument("--threads", type=int, help="并发 worker 数（默认读取 PENREG_THREADS）")
    parser.add_argument("--rejection-cap", type=float, default=0.01, help="允许的拒绝记录比例上限")
    parser.add_argument("--compensated", action="store_true", help="累加时启用补偿求和")
    parser.add_argument("--metrics-log", type=Path, help="分片指标 JSONL 输出路径")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Penalized Regression - 一遍扫描的 Lasso/Ridge/弹性网训练器")
    parser.add_argument("--verbose", action="store_true", help="显示调试日志")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="交叉验证选择 λ 并写出模型文件")
    _add_input_arguments(train)
    train.add_argument("--penalty", choices=["lasso", "ridge", "elastic-net"], default="lasso", help="惩罚族")
    train.add_argument("--mix", type=float, help="弹性网中 L1 部分的占比（默认 0.5）")
    train.add_argument("--lambdas", help="逗号分隔的 λ 网格，覆盖自动网格")
    train.add_argument("--n-lambdas", type=int, help="自动网格点数（默认 100）")
    train.add_argument("--lambda-min-ratio", type=float, help="自动网格最小值与 λ_max 之比")
    train.add_argument("--no-intercept", action="store_true", help="不拟合截距")
    train.add_argument("--from-stats", type=Path, help="从折统计量检查点恢复，不再读取原始数据")
    train.add_argument("--exclude-last-fold", action="store_true", help="兼容模式：平均与最终拟合都排除折 k-1")
    train.add_argument("--max-sweeps", type=int, default=10_000, help="坐标下降最大扫描轮数")
    train.add_argument("--tol", type=float, default=1e-9, help="坐标下降收敛阈值")
    train.add_argument("--output", type=Path, default=Path("model.json"), help="模型文件输出路径")

    predict = commands.add_parser("predict", help="用模型文件对新数据逐行预测")
    predict.add_argument("--model", type=Path, required=True, help="train 写出的模型文件")
    predict.add_argument("--input", type=Path, required=True, help="待预测的分隔文本文件")
    predict.add_argument("--output", type=Path, help="预测输出路径（默认标准输出）")
    predict.add_argument("--append", action="store_true", help="在原始记录后追加预测列")
    predict.add_argument("--delimiter", help="分隔符（默认与训练时一致）")
    predict.add_argument("--no-header", action="store_true", help="输入文件没有表头")
    predict.add_argument("--rejection-cap", type=float, default=0.01, help="允许的格式错误记录比例上限")

    stats = commands.add_parser("stats", help="只执行摄取并写出折统计量检查点")
    _add_input_arguments(stats)
    stats.add_argument("--output", type=Path, default=Path("fold_stats.json"), help="检查点输出路径")
    return parser


def _split_list(raw: Optional[str]) -> Optional[List[str]]:
    if raw is None:
        return None
    return [item.strip() for item in raw.split(",") if item.strip()]


def _ingest_config(args: argparse.Namespace, threads: int) -> IngestConfig:
    if not args.input:
        raise ValueError("至少需要一个 --input")
    if args.response is None:
        raise ValueError("缺少 --response")
    return IngestConfig(
        k=args.k if args.k is not None else 5,
        seed=args.seed,
        response_column=args.response,
        feature_columns=_split_list(args.features),
        delimiter=args.delimiter,
        has_header=not args.no_header,
        shards=[Path(path) for path in args.input],
        rejection_cap=args.rejection_cap,
        compensated=args.compensated,
        threads=threads,
    )


def _penalty_spec(args: argparse.Namespace) -> PenaltySpec:
    lambdas = _split_list(args.lambdas)
    if lambdas is not None and (args.n_lambdas is not None or args.lambda_min_ratio is not None):
        raise ValueError("--lambdas 与 --n-lambdas/--lambda-min-ratio 不能同时使用")
    payload = {"family": args.penalty, "mix": args.mix}
    if lambdas is not None:
        payload["lambdas"] = [float(item) for item in lambdas]
    if args.n_lambdas is not None:
        payload["n_lambdas"] = args.n_lambdas
    if args.lambda_min_ratio is not None:
        payload["lambda_min_ratio"] = args.lambda_min_ratio
    return PenaltySpec(**payload)


def _report_failure(state: TrainState) -> int:
    logger.error("运行失败: %s", "; ".join(state.errors))
    return state.exit_code


def cmd_train(args: argparse.Namespace) -> int:
    threads = resolve_thread_count(args.threads)
    try:
        state = TrainState(
            ingest_config=None if args.from_stats else _ingest_config(args, threads),
            from_stats=args.from_stats,
            expected_k=args.k,
            penalty=_penalty_spec(args),
            control=SolveControl(max_sweeps=args.max_sweeps, tol=args.tol),
            options=TrainOptions(
                intercept=not args.no_intercept,
                threads=threads,
                exclude_last_fold=args.exclude_last_fold,
            ),
            metrics_log=args.metrics_log,
            output_path=args.output,
        )
    except (ValidationError, ValueError) as exc:
        logger.error("参数错误: %s", exc)
        return USAGE_EXIT

    PenalizedRegressionPipeline().run(state)
    if state.errors:
        return _report_failure(state)

    summary = summarize(state)
    low, high = summary["cv_mse_range"]
    print("✅ 训练完成")
    print(f"λ_opt: {summary['lambda_opt']:.6g} (网格第 {summary['opt_index'] + 1}/{summary['n_lambdas']} 个)")
    print(f"非零系数: {summary['nonzero']}/{summary['p']}")
    print(f"交叉验证 MSE: {summary['cv_mse']:.6g} (曲线范围 {low:.6g} ~ {high:.6g})")
    print(f"训练集 MSE: {summary['in_sample_mse']:.6g}")
    print(f"折大小: {summary['fold_sizes']}")
    if not summary["converged"]:
        print("⚠️ 最终拟合未收敛")
    print(f"模型文件: {state.output_path}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    state = TrainState(output_path=args.output)
    PenalizedRegressionPipeline().predict(
        state,
        args.model,
        args.input,
        delimiter=args.delimiter,
        has_header=False if args.no_header else None,
        append=args.append,
        rejection_cap=args.rejection_cap,
    )
    if state.errors:
        return _report_failure(state)
    prediction = state.prediction
    if prediction.mse is not None:
        print(f"MSE: {prediction.mse!r} ({prediction.scored} 条)", file=sys.stderr)
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    threads = resolve_thread_count(args.threads)
    try:
        state = TrainState(
            ingest_config=_ingest_config(args, threads),
            metrics_log=args.metrics_log,
            output_path=args.output,
        )
    except (ValidationError, ValueError) as exc:
        logger.error("参数错误: %s", exc)
        return USAGE_EXIT

    PenalizedRegressionPipeline().dump_stats(state)
    if state.errors:
        return _report_failure(state)
    print(f"✅ 已写出折统计量: {state.output_path}")
    print(f"记录数: {state.folds.total_records}，拒绝: {state.folds.rejected_records}，折大小: {list(state.folds.fold_sizes)}")
    return 0


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "stats": cmd_stats}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_EXIT if exc.code else 0

    load_env_settings()
    configure_logging()
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
