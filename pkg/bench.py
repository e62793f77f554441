"""
벤치마크 모듈
품질 게이트, 반복 측정 벤치마크 하니스, 성능 프로파일 계산,
결과 CSV 입출력과 프로파일 그래프를 제공합니다.
"""

import logging
import math
import time
from dataclasses import replace
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, model_validator

from config import config
from errors import ConfigurationError
from logger_config import (
    log_benchmark_record, log_benchmark_start, log_dropped_problem, log_error, log_profile_summary,
    log_system_info,
)
from problem_corpus import TestProblem
from solvers import (
    make_bfgs, make_dogleg, make_gauss_newton, make_gradient_descent, make_hybrid_minimiser,
    make_indirect_levenberg_marquardt, make_levenberg_marquardt, make_nonlinear_cg,
)
from descents import SolveMode

# 로거 설정
logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["solver", "problem", "min_runtime_s", "converged", "iterations", "final_f"]
PROFILE_COLUMNS = ["solver", "tau", "rho"]


class ProfileMetric(str, Enum):
    RUNTIME = "runtime"

    def __str__(self):
        return self.value


class BenchRecord(BaseModel):
    """(솔버, 문제) 한 쌍의 벤치마크 결과"""
    solver: str
    problem: str
    min_runtime: float = Field(ge=0.0)
    converged: bool
    iterations: int = Field(ge=0)
    final_f: float

    @model_validator(mode="after")
    def _runtime_matches_status(self):
        if math.isinf(self.min_runtime) == self.converged:
            raise ValueError("min_runtime 은 수렴 실패일 때만 무한대여야 합니다")
        return self


class ProfileCurve(BaseModel):
    """솔버 하나의 성능 프로파일 계단 함수"""
    solver: str
    taus: List[float]
    rho: List[float]
    ratios: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_shape(self):
        if len(self.taus) != len(self.rho):
            raise ValueError("taus 와 rho 의 길이가 다릅니다")
        if any(t <= 0 for t in self.taus) or any(b <= a for a, b in zip(self.taus, self.taus[1:])):
            raise ValueError("taus 는 양수이고 증가해야 합니다")
        if any(not 0.0 <= r <= 1.0 for r in self.rho) or any(b < a for a, b in zip(self.rho, self.rho[1:])):
            raise ValueError("rho 는 [0, 1] 범위의 비감소 수열이어야 합니다")
        return self


def quality_gate(f_final: float, f_star: float, eps_a: float, eps_r: float) -> bool:
    """|f_final − f*| / (ε_a + ε_r·|f*|) < 1"""
    if f_final is None or not math.isfinite(f_final):
        return False
    scale = eps_a + eps_r * abs(f_star)
    diff = abs(f_final - f_star)
    if scale <= 0:
        return diff == 0.0
    return diff / scale < 1.0


def default_taus() -> np.ndarray:
    """[1, 2⁷] 의 로그 간격 τ 격자"""
    return 2.0 ** np.linspace(0.0, 7.0, 71)


# 솔버 레지스트리

SOLVER_REGISTRY: Dict[str, Callable] = {
    "bfgs": lambda rtol, atol, n: make_bfgs(rtol, atol, max_iters=n),
    "bfgs-inv": lambda rtol, atol, n: make_bfgs(rtol, atol, use_inverse=True, max_iters=n),
    "ncg": lambda rtol, atol, n: make_nonlinear_cg(rtol, atol, max_iters=n),
    "lm": lambda rtol, atol, n: make_levenberg_marquardt(rtol, atol, max_iters=n, name="lm"),
    "lm2": lambda rtol, atol, n: make_levenberg_marquardt(rtol, atol, max_iters=n),
    "lm1": lambda rtol, atol, n: make_levenberg_marquardt(rtol, atol, SolveMode.NORMAL_EQUATIONS, max_iters=n),
    "lm-indirect": lambda rtol, atol, n: make_indirect_levenberg_marquardt(rtol, atol, max_iters=n),
    "gn": lambda rtol, atol, n: make_gauss_newton(rtol, atol, max_iters=n),
    "gn-cg": lambda rtol, atol, n: make_gauss_newton(rtol, atol, SolveMode.NORMAL_EQUATIONS, max_iters=n),
    "dogleg": lambda rtol, atol, n: make_dogleg(rtol, atol, max_iters=n),
    "hybrid": lambda rtol, atol, n: make_hybrid_minimiser(rtol, atol, max_iters=n),
    "gd": lambda rtol, atol, n: make_gradient_descent(rtol=rtol, atol=atol, max_iters=n),
}


def make_solver(name: str, rtol: float = None, atol: float = None, max_iters: int = None):
    """레지스트리 이름으로 솔버 생성"""
    if name not in SOLVER_REGISTRY:
        raise ConfigurationError(f"알 수 없는 솔버: {name} (사용 가능: {', '.join(SOLVER_REGISTRY)})")
    return SOLVER_REGISTRY[name](rtol, atol, max_iters or config.BENCH_MAX_ITERS)


def _with_budget(solver, max_iters: int):
    termination = solver.termination.model_copy(update={"max_iters": max_iters})
    return replace(solver, termination=termination)


def _passes(problem: TestProblem, solution, gate_atol: float, gate_rtol: float) -> bool:
    if not math.isfinite(solution.objective):
        return False
    if problem.f_star is not None:
        return quality_gate(solution.objective, problem.f_star, gate_atol, gate_rtol)
    return solution.converged


def run_benchmark(problems: Sequence[TestProblem], solvers: Sequence, repeats: int = None,
                  timer: Callable[[], float] = time.perf_counter, max_iters: int = None,
                  gate_atol: float = None, gate_rtol: float = None) -> List[BenchRecord]:
    """
    (솔버, 문제) 쌍마다 repeats 번 풀이해 최소 실행 시간을 기록

    f* 가 알려진 문제는 품질 게이트로, 아니면 Converged 여부로 수렴을 판정합니다.
    실패한 쌍은 min_runtime = +inf 이며 문제/솔버 유형 불일치도 실패로 기록합니다.
    iterations 는 가장 빠른 반복 측정의 반복 횟수입니다.
    """
    repeats = config.BENCH_REPEATS if repeats is None else repeats
    if repeats < 1:
        raise ConfigurationError(f"repeats 는 1 이상이어야 합니다: {repeats}")
    max_iters = config.BENCH_MAX_ITERS if max_iters is None else max_iters
    gate_atol = config.BENCH_GATE_ATOL if gate_atol is None else gate_atol
    gate_rtol = config.BENCH_GATE_RTOL if gate_rtol is None else gate_rtol

    log_system_info()
    log_benchmark_start(len(solvers), len(problems), repeats)
    records: List[BenchRecord] = []
    for solver in solvers:
        budgeted = _with_budget(solver, max_iters)
        for problem in problems:
            best_time = math.inf
            best_solution = None
            try:
                for _ in range(repeats):
                    start = timer()
                    solution = problem.solve(budgeted)
                    elapsed = timer() - start
                    if elapsed < best_time or best_solution is None:
                        best_time, best_solution = elapsed, solution
            except ConfigurationError as e:
                logger.info(f"유형 불일치로 실패 처리: {solver.name} / {problem.name} ({e})")
            except Exception as e:
                log_error(type(e).__name__, str(e), context=f"{solver.name} / {problem.name}")

            if best_solution is None:
                record = BenchRecord(solver=solver.name, problem=problem.name, min_runtime=math.inf,
                                     converged=False, iterations=0, final_f=math.nan)
            else:
                converged = _passes(problem, best_solution, gate_atol, gate_rtol)
                record = BenchRecord(
                    solver=solver.name,
                    problem=problem.name,
                    min_runtime=max(best_time, 0.0) if converged else math.inf,
                    converged=converged,
                    iterations=best_solution.stats.iterations,
                    final_f=best_solution.objective,
                )
            log_benchmark_record(record)
            records.append(record)
    return records


def failure_summary(records: Iterable[BenchRecord]) -> Dict[str, Tuple[int, int]]:
    """솔버별 (실패 수, 전체 수)"""
    summary: Dict[str, Tuple[int, int]] = {}
    for record in records:
        failed, total = summary.get(record.solver, (0, 0))
        summary[record.solver] = (failed + (not record.converged), total + 1)
    for solver, (failed, total) in summary.items():
        logger.info(f"솔버 {solver}: 실패 {failed}/{total}")
    return summary


def records_to_frame(records: Iterable[BenchRecord]) -> pd.DataFrame:
    rows = [
        {
            "solver": r.solver,
            "problem": r.problem,
            "min_runtime_s": r.min_runtime,
            "converged": r.converged,
            "iterations": r.iterations,
            "final_f": r.final_f,
        }
        for r in records
    ]
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


def performance_ratios(records: Sequence[BenchRecord],
                       metric: ProfileMetric = ProfileMetric.RUNTIME) -> Tuple[pd.DataFrame, List[str]]:
    """
    성능 비율 r_{s,p} = R_{s,p} / min_s R_{s,p}

    모든 솔버가 실패한 문제는 제외하고 그 이름 목록을 함께 반환합니다.
    """
    if ProfileMetric(metric) != ProfileMetric.RUNTIME:
        raise ConfigurationError(f"지원하지 않는 지표: {metric}")
    frame = records_to_frame(records)
    if frame.empty:
        raise ConfigurationError("성능 프로파일에는 최소 하나의 레코드가 필요합니다")
    table = frame.pivot_table(index="problem", columns="solver", values="min_runtime_s", aggfunc="min")
    table = table.fillna(math.inf)

    best = table.min(axis=1)
    dropped = [str(p) for p in best.index[~np.isfinite(best.to_numpy())]]
    for problem in dropped:
        log_dropped_problem(problem)
    table = table.loc[np.isfinite(best.to_numpy())]
    best = best.loc[table.index]

    values = table.to_numpy(dtype=float)
    best_values = best.to_numpy(dtype=float)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(best_values > 0, values / best_values, np.where(values == 0.0, 1.0, math.inf))
    return pd.DataFrame(ratios, index=table.index, columns=table.columns), dropped


def performance_profile(records: Sequence[BenchRecord], metric: ProfileMetric = ProfileMetric.RUNTIME,
                        taus: Sequence[float] = None, solvers: Sequence[str] = None) -> List[ProfileCurve]:
    """
    솔버별 성능 프로파일 ρ_s(τ) = |{p : r_{s,p} ≤ τ}| / |P|

    solvers 를 주면 그 솔버들로 비교 집합을 제한합니다 (두 솔버 쌍 비교 등).
    """
    records = list(records)
    if solvers is not None:
        wanted = list(solvers)
        missing = [s for s in wanted if s not in {r.solver for r in records}]
        if missing:
            raise ConfigurationError(f"결과에 없는 솔버: {', '.join(missing)}")
        records = [r for r in records if r.solver in wanted]
    if len({r.solver for r in records}) < 2:
        raise ConfigurationError("성능 프로파일에는 최소 두 개의 솔버가 필요합니다")

    ratios, _ = performance_ratios(records, metric)
    if ratios.empty:
        raise ConfigurationError("모든 문제가 제외되어 프로파일을 계산할 수 없습니다")
    grid = np.asarray(default_taus() if taus is None else taus, dtype=float)

    curves = []
    for solver in ratios.columns:
        r = np.sort(ratios[solver].to_numpy(dtype=float))
        rho = np.searchsorted(r, grid, side="right") / r.size
        curves.append(ProfileCurve(solver=str(solver), taus=grid.tolist(), rho=rho.tolist(), ratios=r.tolist()))
    log_profile_summary(curves)
    return curves


def profile_value(curve: ProfileCurve, tau: float) -> float:
    """임의의 τ 에서 계단 함수 값"""
    if curve.ratios:
        r = np.asarray(curve.ratios)
        return float(np.count_nonzero(r <= tau) / r.size)
    idx = np.searchsorted(np.asarray(curve.taus), tau, side="right") - 1
    return float(curve.rho[idx]) if idx >= 0 else 0.0


# CSV 입출력

def write_results(records: Iterable[BenchRecord], path) -> Path:
    path = Path(path)
    records_to_frame(records).to_csv(path, index=False)
    logger.info(f"결과 저장: {path}")
    return path


def read_results(path) -> List[BenchRecord]:
    frame = pd.read_csv(path)
    missing = [c for c in RESULT_COLUMNS if c not in frame.columns]
    if missing:
        raise ConfigurationError(f"결과 CSV 에 필요한 열이 없습니다: {', '.join(missing)}")
    records = []
    for row in frame.itertuples(index=False):
        converged = row.converged if isinstance(row.converged, (bool, np.bool_)) else str(row.converged).lower() == "true"
        records.append(BenchRecord(
            solver=str(row.solver),
            problem=str(row.problem),
            min_runtime=float(row.min_runtime_s),
            converged=bool(converged),
            iterations=int(row.iterations),
            final_f=float(row.final_f),
        ))
    return records


def profile_to_frame(curves: Iterable[ProfileCurve]) -> pd.DataFrame:
    rows = [
        {"solver": c.solver, "tau": tau, "rho": rho}
        for c in curves
        for tau, rho in zip(c.taus, c.rho)
    ]
    return pd.DataFrame(rows, columns=PROFILE_COLUMNS)


def write_profile(curves: Iterable[ProfileCurve], path) -> Path:
    path = Path(path)
    profile_to_frame(curves).to_csv(path, index=False)
    logger.info(f"프로파일 저장: {path}")
    return path


def read_profile(path) -> List[ProfileCurve]:
    frame = pd.read_csv(path)
    return [
        ProfileCurve(solver=str(solver), taus=group["tau"].tolist(), rho=group["rho"].tolist())
        for solver, group in frame.groupby("solver", sort=False)
    ]


def plot_profile(curves: Sequence[ProfileCurve], path) -> Path:
    """log₂ τ 축 계단 그래프를 SVG/PNG 로 저장"""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    for curve in curves:
        ax.step(curve.taus, curve.rho, where="post", label=curve.solver)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("τ")
    ax.set_ylabel("ρ(τ)")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    logger.info(f"프로파일 그래프 저장: {path}")
    return path
