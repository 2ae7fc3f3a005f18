"""交叉验证阶段：折补集训练、仅凭统计量的测试误差、λ 选择与最终拟合。"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple, Union

import numpy as np

from src.ingest.stats import FoldedStats, SufficientStats

from .domain import (
    CvReport,
    FittedModel,
    GridSource,
    GridSummary,
    PenaltySpec,
    SolveControl,
    TrainOptions,
)
from .errors import DegenerateGridError, InsufficientDataError, SolverFaultError
from .solver import lambda_grid, solve_path
from .standardize import StandardizedProblem, standardize
from .utils import logger

# λ_max = 0 时 β=0 对任意 λ 都最优，网格退化为单点
NULL_MODEL_GRID = (1.0,)


def fold_complement(folds: FoldedStats, i: int) -> SufficientStats:
    """除折 i 以外所有折的合并统计量（训练集）。"""

    if not 0 <= i < folds.k:
        raise IndexError(f"折下标 {i} 超出范围 [0, {folds.k})")
    complement = folds.combined(exclude=[i])
    if complement.n == 0:
        raise InsufficientDataError(f"折 {i} 的补集为空，全部数据都落在该折")
    return complement


def test_mse_from_stats(
    test: SufficientStats,
    model: Union[FittedModel, float],
    beta: Optional[np.ndarray] = None,
) -> float:
    """仅凭测试折统计量计算 ``‖Y - α1 - Xβ‖² / n``。

    ``model`` 可以是 FittedModel，也可以是截距 α（此时需同时给出 β）。
    """

    if isinstance(model, FittedModel):
        alpha, beta = model.intercept, model.coefficients
    else:
        if beta is None:
            raise ValueError("仅给出截距时必须同时提供系数 β")
        alpha = float(model)
    if test.n == 0:
        raise InsufficientDataError("测试折为空")
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (test.p,):
        raise ValueError(f"系数维度 {beta.shape} 与统计量维度 {test.p} 不符")
    n = test.n
    energy = (
        test.sum_yy
        - 2.0 * alpha * test.sum_y
        - 2.0 * float(beta @ test.xty)
        + n * alpha * alpha
        + 2.0 * alpha * float(beta @ test.sum_x)
        + float(beta @ test.xtx @ beta)
    )
    return max(energy, 0.0) / n


def back_transform(beta_std: np.ndarray, problem: StandardizedProblem) -> Tuple[float, np.ndarray]:
    """标准化尺度的 β̂ 变换回原始尺度：``β_j = β̂_j / d_j``，``α = ȳ - x̄ᵀβ``。

    被丢弃的列系数恒为 0；无截距模式下 α 固定为 0。
    """

    beta_std = np.asarray(beta_std, dtype=np.float64)
    if beta_std.shape != (problem.p_active,):
        raise ValueError(f"系数维度 {beta_std.shape} 与活动列数 {problem.p_active} 不符")
    beta = np.zeros(problem.p)
    active = np.asarray(problem.active_index, dtype=int)
    if active.size:
        beta[active] = beta_std / problem.norms[active]
    if not problem.intercept:
        return 0.0, beta
    return float(problem.y_bar - problem.means @ beta), beta


def shared_grid(
    folds: FoldedStats, spec: PenaltySpec, options: TrainOptions
) -> Tuple[np.ndarray, GridSummary]:
    """用全部数据的 λ_max 生成各折共享的网格。"""

    problem = standardize(
        folds.combined(), intercept=options.intercept, epsilon=options.epsilon, allow_empty=True
    )
    try:
        return lambda_grid(problem, spec)
    except DegenerateGridError as exc:
        logger.warning("%s，退化为仅含截距的模型", exc)
        return np.asarray(NULL_MODEL_GRID), GridSummary(GridSource.NULL, 0.0, None, len(NULL_MODEL_GRID))


def _score_fold(
    folds: FoldedStats,
    i: int,
    grid: np.ndarray,
    spec: PenaltySpec,
    control: SolveControl,
    options: TrainOptions,
) -> Tuple[np.ndarray, List[int]]:
    train = fold_complement(folds, i)
    problem = standardize(train, intercept=options.intercept, epsilon=options.epsilon, allow_empty=True)
    path = solve_path(problem, spec, control, grid)
    scores = np.full(len(grid), np.nan)
    failed: List[int] = []
    for index, solution in enumerate(path):
        if not solution.converged:
            failed.append(index)
            continue
        alpha, beta = back_transform(solution.beta_std, problem)
        scores[index] = test_mse_from_stats(folds.folds[i], alpha, beta)
    return scores, failed


def cross_validate(
    folds: FoldedStats,
    spec: PenaltySpec,
    control: Optional[SolveControl] = None,
    options: Optional[TrainOptions] = None,
) -> CvReport:
    """k 折交叉验证：每折以补集统计量重新标准化并沿共享网格求解，
    在该折上计算测试 MSE；``pre(λ)`` 为非空折的平均，取最小者，并列时取较大的 λ。

    Raises:
        InsufficientDataError: 非空折少于 2 个。
        SolverFaultError: 所有 λ 上都没有可用的误差。
    """

    control = control or SolveControl()
    options = options or TrainOptions()
    nonempty = [i for i, fold in enumerate(folds.folds) if fold.n > 0]
    if len(nonempty) < 2:
        raise InsufficientDataError(f"非空折只有 {len(nonempty)} 个，至少需要 2 个")
    skipped = [i for i in range(folds.k) if i not in nonempty]
    if skipped:
        logger.warning("跳过空折: %s", skipped)

    grid, summary = shared_grid(folds, spec, options)
    fold_mse = np.full((folds.k, len(grid)), np.nan)
    excluded: List[Tuple[int, int]] = []

    def job(i: int) -> Tuple[int, np.ndarray, List[int]]:
        scores, failed = _score_fold(folds, i, grid, spec, control, options)
        return i, scores, failed

    if options.threads > 1:
        with ThreadPoolExecutor(max_workers=options.threads) as executor:
            results = list(executor.map(job, nonempty))
    else:
        results = [job(i) for i in nonempty]

    for i, scores, failed in results:
        fold_mse[i] = scores
        excluded.extend((i, index) for index in failed)
    if excluded:
        logger.warning("%s 个 (折, λ) 单元未收敛，已从平均中排除", len(excluded))

    counted = [i for i in nonempty if not (options.exclude_last_fold and i == folds.k - 1)]
    block = fold_mse[counted]
    valid = ~np.isnan(block)
    counts = valid.sum(axis=0)
    totals = np.where(valid, block, 0.0).sum(axis=0)
    mean_mse = np.full(len(grid), np.nan)
    np.divide(totals, counts, out=mean_mse, where=counts > 0)

    if not np.any(counts > 0):
        raise SolverFaultError("所有 λ 上的交叉验证误差均不可用")
    best = np.nanmin(mean_mse)
    opt_index = int(np.flatnonzero(mean_mse == best)[0])
    lambda_opt = float(grid[opt_index])
    logger.info("交叉验证完成：λ_opt=%.6g (第 %s/%s 个)，pre(λ_opt)=%.6g", lambda_opt, opt_index + 1, len(grid), best)

    return CvReport(
        lambdas=grid,
        fold_mse=fold_mse,
        mean_mse=mean_mse,
        lambda_opt=lambda_opt,
        opt_index=opt_index,
        fold_sizes=folds.fold_sizes,
        grid=summary,
        skipped_folds=skipped,
        excluded_cells=excluded,
    )


def train(
    folds: FoldedStats,
    spec: PenaltySpec,
    control: Optional[SolveControl] = None,
    options: Optional[TrainOptions] = None,
    report: Optional[CvReport] = None,
) -> FittedModel:
    """合并全部折后在 λ_opt 上拟合并变换回原始尺度，附带交叉验证报告。

    沿网格从 λ_max 热启动求解到 λ_opt；最终解未收敛时模型标记为未收敛。
    """

    control = control or SolveControl()
    options = options or TrainOptions()
    report = report or cross_validate(folds, spec, control, options)

    exclude = [folds.k - 1] if options.exclude_last_fold else None
    data = folds.combined(exclude=exclude)
    problem = standardize(data, intercept=options.intercept, epsilon=options.epsilon, allow_empty=True)
    path = solve_path(problem, spec, control, report.lambdas[: report.opt_index + 1])
    final = path[-1]
    if not np.all(np.isfinite(final.beta_std)):
        raise SolverFaultError(f"最终拟合在 λ={report.lambda_opt:.6g} 出现数值故障")
    if not final.converged:
        logger.warning("最终拟合在 %s 轮内未收敛，KKT 残差 %.3g", final.sweeps_used, final.kkt_residual)

    intercept, coefficients = back_transform(final.beta_std, problem)
    in_sample = test_mse_from_stats(data, intercept, coefficients)
    model = FittedModel(
        intercept=intercept,
        coefficients=coefficients,
        lambda_opt=report.lambda_opt,
        penalty=spec,
        cv=report,
        means=problem.means,
        norms=problem.norms,
        y_mean=problem.y_bar,
        active_index=problem.active_index,
        dropped=problem.dropped,
        fit_intercept=options.intercept,
        converged=final.converged,
        kkt_residual=final.kkt_residual,
        n_train=data.n,
        in_sample_mse=in_sample,
    )
    logger.info(
        "最终模型：λ_opt=%.6g，非零系数 %s/%s，训练 MSE=%.6g",
        model.lambda_opt,
        model.nonzero_count,
        problem.p,
        in_sample,
    )
    return model


__all__ = [
    "NULL_MODEL_GRID",
    "back_transform",
    "cross_validate",
    "fold_complement",
    "shared_grid",
    "test_mse_from_stats",
    "train",
]
