"""标准化 Gram 系统上的弹性网坐标下降。

目标函数 ``tss - 2bᵀβ + βᵀgβ + λ(mix·‖β‖₁ + (1-mix)·‖β‖₂²)``。
坐标更新只依赖 g 与 b，维护残差相关向量 ``r = b - gβ``（协方差式更新）。
"""

from __future__ import annotations

import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .domain import GridSource, GridSummary, PenaltySpec, SolveControl, StdSolution
from .errors import DegenerateGridError, NumericalError, SolverFaultError
from .standardize import StandardizedProblem, loss_from_stats
from .utils import logger

SweepCallback = Callable[[int, np.ndarray], None]


def soft_threshold(z: float, t: float) -> float:
    """``S(z, t) = sign(z)·max(|z| - t, 0)``，``|z| = t`` 时取 0。"""

    magnitude = abs(z) - t
    if magnitude <= 0.0:
        return 0.0
    return math.copysign(magnitude, z)


def penalty_value(spec: PenaltySpec, lam: float, beta: np.ndarray) -> float:
    """``λ(mix·‖β‖₁ + (1-mix)·‖β‖₂²)``；lasso 与 ridge 是 mix=1/0 的特例。"""

    beta = np.asarray(beta, dtype=np.float64)
    l1 = float(np.abs(beta).sum())
    l2 = float(beta @ beta)
    if spec.mix == 1.0:
        return lam * l1
    if spec.mix == 0.0:
        return lam * l2
    return lam * (spec.mix * l1 + (1.0 - spec.mix) * l2)


def objective(problem: StandardizedProblem, spec: PenaltySpec, lam: float, beta_std: np.ndarray) -> float:
    return loss_from_stats(problem, beta_std) + penalty_value(spec, lam, beta_std)


def _l1_lambda_max(top: float, mix: float) -> float:
    """最小的 λ 使浮点乘积 ``λ·mix`` 不小于 ``top``；``top / mix`` 舍入后可能差一个 ulp。"""

    lam = top / mix
    while lam * mix < top:
        lam = float(np.nextafter(lam, np.inf))
    return lam


def _zero_lambda(problem: StandardizedProblem) -> float:
    if problem.p_active == 0:
        return 0.0
    return 2.0 * float(np.max(np.abs(problem.b)))


def lambda_max(problem: StandardizedProblem, spec: PenaltySpec) -> float:
    """使 β=0 成为最优解的最小 λ：``2·max|b_j| / mix``。

    纯 ridge（mix=0）不存在有限的 λ_max，此时退回同一 b 的 lasso λ_max 并告警。
    """

    top = _zero_lambda(problem)
    if spec.mix == 0.0:
        logger.warning("ridge 不存在使系数全零的有限 λ，网格改用 lasso 的 λ_max=%.6g", top)
        return top
    return _l1_lambda_max(top, spec.mix)


def lambda_grid(problem: StandardizedProblem, spec: PenaltySpec) -> Tuple[np.ndarray, GridSummary]:
    """返回降序 λ 网格及其来源摘要。

    Raises:
        DegenerateGridError: 需要自动网格但 λ_max 为 0。
    """

    if spec.lambdas is not None:
        top = _zero_lambda(problem)
        if spec.mix > 0.0:
            top = _l1_lambda_max(top, spec.mix)
        grid = np.asarray(spec.lambdas, dtype=np.float64)
        return grid, GridSummary(GridSource.USER, top, None, len(grid))

    top = lambda_max(problem, spec)
    if top <= 0.0:
        raise DegenerateGridError("λ_max 为 0：响应与所有活动列正交")
    ratio = spec.lambda_min_ratio
    if ratio is None:
        ratio = 1e-2 if problem.n < problem.p else 1e-3
    if spec.n_lambdas == 1:
        grid = np.array([top])
    else:
        grid = np.geomspace(top, top * ratio, spec.n_lambdas)
        grid[0] = top
    return grid, GridSummary(GridSource.AUTO, top, ratio, spec.n_lambdas)


def response_scale(problem: StandardizedProblem) -> float:
    """响应的均方根尺度 ``sqrt(tss / n)``；常数响应或空问题取 1。"""

    if problem.tss > 0.0 and problem.n > 0:
        return math.sqrt(problem.tss / problem.n)
    return 1.0


def kkt_residual(problem: StandardizedProblem, mix: float, lam: float, beta_std: np.ndarray) -> float:
    """次梯度最优性条件的最大违背量。"""

    if problem.p_active == 0:
        return 0.0
    grad = 2.0 * (problem.b - problem.g @ beta_std) - 2.0 * lam * (1.0 - mix) * beta_std
    threshold = lam * mix
    nonzero = beta_std != 0.0
    residual = np.where(
        nonzero,
        np.abs(grad - threshold * np.sign(beta_std)),
        np.maximum(np.abs(grad) - threshold, 0.0),
    )
    return float(residual.max())


def coordinate_descent(
    problem: StandardizedProblem,
    spec: PenaltySpec,
    lam: float,
    warm_start: Optional[np.ndarray] = None,
    control: Optional[SolveControl] = None,
    *,
    on_sweep: Optional[SweepCallback] = None,
) -> StdSolution:
    """循环坐标下降求解单个 λ。

    阈值按响应尺度 ``s = sqrt(tss / n)`` 缩放：每轮扫描后若最大系数变化不超过
    ``tol·s`` 且 KKT 残差不超过 ``10·tol·s`` 即判定收敛，响应整体换单位不改变停止点。
    开启 active_set 时，完整扫描之后只在非零坐标上迭代至稳定，再回到完整扫描确认。
    达到 ``max_sweeps`` 仍未收敛时返回 ``converged=False``。

    Raises:
        SolverFaultError: 迭代中出现非有限值。
    """

    if lam < 0:
        raise ValueError("λ 不能为负")
    control = control or SolveControl()
    p = problem.p_active
    if p == 0:
        return StdSolution(beta_std=np.zeros(0), lam=lam, sweeps_used=0, converged=True, kkt_residual=0.0)

    if warm_start is None:
        beta = np.zeros(p)
    else:
        beta = np.array(warm_start, dtype=np.float64)
        if beta.shape != (p,):
            raise ValueError(f"热启动维度 {beta.shape} 与活动列数 {p} 不符")

    g = problem.g
    mix = spec.mix
    l1 = lam * mix
    diag = np.diag(g)
    denom = 2.0 * diag + 2.0 * lam * (1.0 - mix)
    residual = problem.b - g @ beta
    everything = range(p)
    step_tol = control.tol * response_scale(problem)

    def sweep(coords: Sequence[int]) -> float:
        max_change = 0.0
        for j in coords:
            old = beta[j]
            z = 2.0 * (residual[j] + diag[j] * old)
            new = soft_threshold(z, l1) / denom[j]
            if not math.isfinite(new):
                raise SolverFaultError(f"坐标 {j} 出现非有限值 (λ={lam:.6g})")
            if new != old:
                delta = new - old
                np.subtract(residual, g[j] * delta, out=residual)
                beta[j] = new
                if abs(delta) > max_change:
                    max_change = abs(delta)
        return max_change

    sweeps = 0
    converged = False
    kkt = math.inf
    while sweeps < control.max_sweeps:
        change = sweep(everything)
        sweeps += 1
        if on_sweep is not None:
            on_sweep(sweeps, beta.copy())
        if change > step_tol:
            if control.active_set:
                while sweeps < control.max_sweeps:
                    inner = sweep(np.flatnonzero(beta))
                    sweeps += 1
                    if on_sweep is not None:
                        on_sweep(sweeps, beta.copy())
                    if inner <= step_tol:
                        break
            continue
        kkt = kkt_residual(problem, mix, lam, beta)
        if kkt <= 10.0 * step_tol:
            converged = True
            break

    if not converged:
        kkt = kkt_residual(problem, mix, lam, beta)
        logger.debug("λ=%.6g 在 %s 轮内未收敛，KKT 残差 %.3g", lam, sweeps, kkt)
    return StdSolution(beta_std=beta, lam=lam, sweeps_used=sweeps, converged=converged, kkt_residual=kkt)


def solve_path(
    problem: StandardizedProblem,
    spec: PenaltySpec,
    control: Optional[SolveControl] = None,
    lambdas: Optional[Sequence[float]] = None,
) -> List[StdSolution]:
    """沿降序 λ 网格求解，每个 λ 以前一个解热启动。

    某个 λ 出现数值故障时记录为未收敛的 NaN 解，其余 λ 继续求解。
    """

    if lambdas is None:
        lambdas, _ = lambda_grid(problem, spec)
    grid = [float(lam) for lam in lambdas]
    if not grid:
        raise ValueError("λ 网格不能为空")
    if any(later >= earlier for earlier, later in zip(grid, grid[1:])):
        raise ValueError("λ 网格必须严格降序")

    solutions: List[StdSolution] = []
    warm: Optional[np.ndarray] = None
    for lam in grid:
        try:
            solution = coordinate_descent(problem, spec, lam, warm, control)
        except SolverFaultError as exc:
            logger.error("求解失败: %s", exc)
            solutions.append(
                StdSolution(
                    beta_std=np.full(problem.p_active, np.nan),
                    lam=lam,
                    sweeps_used=0,
                    converged=False,
                    kkt_residual=math.nan,
                )
            )
            continue
        solutions.append(solution)
        warm = solution.beta_std
    return solutions


def ridge_closed_form(problem: StandardizedProblem, lam: float) -> np.ndarray:
    """``(g + λI)⁻¹ b``，即 ``tss - 2bᵀβ + βᵀgβ + λβᵀβ`` 的精确极小点。

    Raises:
        NumericalError: Cholesky 分解失败。
    """

    if lam <= 0:
        raise ValueError("ridge 闭式解要求 λ > 0")
    p = problem.p_active
    if p == 0:
        return np.zeros(0)
    system = problem.g + lam * np.eye(p)
    try:
        factor = linalg.cho_factor(system)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"(g + λI) 分解失败 (λ={lam:.6g}): {exc}") from exc
    return linalg.cho_solve(factor, problem.b)


__all__ = [
    "coordinate_descent",
    "kkt_residual",
    "lambda_grid",
    "lambda_max",
    "objective",
    "penalty_value",
    "response_scale",
    "ridge_closed_form",
    "soft_threshold",
    "solve_path",
]
