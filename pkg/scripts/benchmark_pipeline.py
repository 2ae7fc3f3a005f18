"""训练链路基准测试脚本。

生成稀疏线性模型的合成数据并写成若干分片，执行完整的摄取 → 交叉验证 →
最终拟合，输出各阶段耗时、摄取指标与系数恢复情况，并在运行过程中写入
`logs/ingest_metrics.jsonl` 便于持续监控。
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Dict, List

import numpy as np

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from src.ingest.loaders import ingest_shards  # noqa: E402
from src.ingest.metrics import IngestMetricsLogger  # noqa: E402
from src.ingest.models import IngestConfig  # noqa: E402
from src.regression.cv import cross_validate, train  # noqa: E402
from src.regression.domain import PenaltySpec, SolveControl, TrainOptions  # noqa: E402


def parse_args() -> argparse.Namespace:
    """解析命令行参数。"""

    parser = argparse.ArgumentParser(description="训练链路监控与性能回归")
    parser.add_argument("--rows", type=int, default=20_000, help="合成数据的记录数。")
    parser.add_argument("--features", type=int, default=10, help="特征列数。")
    parser.add_argument("--nonzero", type=int, default=4, help="真实模型的非零系数个数。")
    parser.add_argument("--noise", type=float, default=0.5, help="噪声标准差。")
    parser.add_argument("--shards", type=int, default=4, help="写出的分片数。")
    parser.add_argument("--k", type=int, default=5, help="交叉验证折数。")
    parser.add_argument("--seed", type=int, default=7, help="数据与折键的随机种子。")
    parser.add_argument(
        "--penalty",
        choices=["lasso", "ridge", "elastic-net"],
        default="lasso",
        help="惩罚族。",
    )
    parser.add_argument("--threads", type=int, default=1, help="摄取与交叉验证的并发数。")
    parser.add_argument(
        "--workdir",
        type=Path,
        default=Path("cache/benchmark"),
        help="合成分片的写出目录。",
    )
    parser.add_argument(
        "--log-path",
        type=Path,
        default=Path("logs/ingest_metrics.jsonl"),
        help="指标 JSONL 日志输出路径。",
    )
    parser.add_argument(
        "--summary-output",
        type=Path,
        help="若提供，则将汇总结果写入指定 JSON 文件。",
    )
    return parser.parse_args()


def write_shards(
    workdir: Path,
    x: np.ndarray,
    y: np.ndarray,
    shards: int,
) -> List[Path]:
    """把数据按行均分写成带表头的 CSV 分片。"""

    workdir.mkdir(parents=True, exist_ok=True)
    header = ",".join([f"x{j}" for j in range(x.shape[1])] + ["y"])
    paths: List[Path] = []
    for index, rows in enumerate(np.array_split(np.arange(len(y)), shards)):
        path = workdir / f"part-{index:03d}.csv"
        block = np.column_stack([x[rows], y[rows]])
        np.savetxt(path, block, delimiter=",", header=header, comments="", fmt="%.17g")
        paths.append(path)
    return paths


def main() -> int:
    """脚本主入口。"""

    args = parse_args()
    rng = np.random.default_rng(args.seed)
    beta_true = np.zeros(args.features)
    beta_true[: args.nonzero] = rng.choice([-1.0, 1.0], size=args.nonzero) * rng.uniform(1.0, 3.0, args.nonzero)
    x = rng.standard_normal((args.rows, args.features))
    y = 1.5 + x @ beta_true + args.noise * rng.standard_normal(args.rows)
    shards = write_shards(args.workdir, x, y, args.shards)
    print(f"[INFO] 写出合成数据 {args.rows} 行 × {args.features} 列，分片 {len(shards)} 个。")

    config = IngestConfig(
        k=args.k,
        seed=args.seed,
        response_column="y",
        shards=shards,
        threads=args.threads,
    )
    metrics_logger = IngestMetricsLogger(args.log_path)
    start_ingest = time.perf_counter()
    result = ingest_shards(config, metrics=metrics_logger)
    ingest_time = time.perf_counter() - start_ingest

    spec = PenaltySpec(family=args.penalty)
    options = TrainOptions(threads=args.threads)
    control = SolveControl()
    start_cv = time.perf_counter()
    report = cross_validate(result.folds, spec, control, options)
    cv_time = time.perf_counter() - start_cv
    start_fit = time.perf_counter()
    model = train(result.folds, spec, control, options, report)
    fit_time = time.perf_counter() - start_fit

    support_true = set(np.flatnonzero(beta_true).tolist())
    support_fit = set(np.flatnonzero(model.coefficients).tolist())
    summary: Dict[str, object] = {
        "ingest": metrics_logger.summary(),
        "timings_s": {
            "ingest": round(ingest_time, 4),
            "cross_validate": round(cv_time, 4),
            "final_fit": round(fit_time, 4),
        },
        "lambda_opt": model.lambda_opt,
        "n_lambdas": len(report.lambdas),
        "cv_mse": float(report.mean_mse[report.opt_index]),
        "in_sample_mse": model.in_sample_mse,
        "nonzero": model.nonzero_count,
        "support_recovered": support_true <= support_fit,
        "max_coefficient_error": float(np.max(np.abs(model.coefficients - beta_true))),
        "intercept_error": abs(model.intercept - 1.5),
    }

    print("\n=== 训练基准结果 ===")
    print(f"记录数: {summary['ingest']['records_parsed']}，拒绝: {summary['ingest']['records_rejected']}")
    for stage, seconds in summary["timings_s"].items():
        print(f"{stage} 耗时: {seconds:.3f} s")
    print(f"λ_opt: {model.lambda_opt:.6g}，交叉验证 MSE: {summary['cv_mse']:.6g}")
    print(f"非零系数: {model.nonzero_count}/{args.features}")
    print(f"最大系数误差: {summary['max_coefficient_error']:.4f}")

    if args.summary_output:
        args.summary_output.parent.mkdir(parents=True, exist_ok=True)
        with args.summary_output.open("w", encoding="utf-8") as file:
            json.dump(summary, file, ensure_ascii=False, indent=2)
        print(f"[INFO] 汇总结果已写入 {args.summary_output}")

    if summary["support_recovered"]:
        print("\n[INFO] 真实非零系数全部被选中。")
    else:
        missed = sorted(support_true - support_fit)
        print(f"\n[WARN] 未选中的真实系数下标: {missed}")

    return 0


if __name__ == "__main__":
    sys.exit(main())
