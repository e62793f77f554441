"""
최적화 핵심 모듈
문제/해 데이터 모델, 코시 종료 조건, 벡터 노름, 유한 차분 도함수,
그리고 서치와 디센트를 하나의 루프로 묶는 스텝 거절 반복 드라이버를 제공합니다.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config import config
from errors import ConfigurationError, LinearSolveFailed, RootFindStalled
from logger_config import log_solve_result, log_solve_start, log_step_rejected

# 로거 설정
logger = logging.getLogger(__name__)

Vector = np.ndarray
Matrix = np.ndarray


class ProblemKind(str, Enum):
    """네 가지 비선형 최적화 문제 유형"""
    MINIMISE = "Minimise"
    LEAST_SQUARES = "LeastSquares"
    ROOT_FIND = "RootFind"
    FIXED_POINT = "FixedPoint"

    def __str__(self):
        return self.value


class SolveResult(str, Enum):
    """솔브 종료 사유"""
    CONVERGED = "Converged"
    MAX_ITERS_REACHED = "MaxItersReached"
    NONFINITE_ENCOUNTERED = "NonFiniteEncountered"
    LINEAR_SOLVE_FAILED = "LinearSolveFailed"
    SUBPROBLEM_STALLED = "SubproblemStalled"

    def __str__(self):
        return self.value


def max_norm(v: Vector) -> float:
    """∞-노름 (NaN은 그대로 전파)"""
    v = np.asarray(v, dtype=float)
    return float(np.max(np.abs(v)))


def euclidean(norm: Callable[[Vector], float]) -> Callable[[Vector], float]:
    """norm 에 유클리드 노름 표시를 붙여 반환 (도그레그의 닫힌 형식 교점 사용)"""
    norm.is_euclidean = True
    return norm


def is_euclidean(norm: Callable[[Vector], float]) -> bool:
    return bool(getattr(norm, "is_euclidean", False))


@euclidean
def two_norm(v: Vector) -> float:
    """유클리드 노름"""
    return float(np.linalg.norm(np.asarray(v, dtype=float)))


def rms_norm(v: Vector) -> float:
    """제곱 평균 제곱근 노름 (차원에 무관한 종료 조건용)"""
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(np.mean(v ** 2)))


class TerminationConfig(BaseModel):
    """코시 종료 조건 설정 (생성 후 변경 불가)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    rtol: float = Field(ge=0.0)
    atol: float = Field(ge=0.0)
    norm: Callable[[Vector], float] = max_norm
    # 0은 "스텝을 하나도 제안하지 않음"을 뜻합니다
    max_iters: int = Field(ge=0)

    @model_validator(mode="after")
    def _check_tolerances(self):
        if self.rtol <= 0 and self.atol <= 0:
            raise ValueError("rtol과 atol 중 하나는 양수여야 합니다")
        return self


def make_termination(rtol: float = None, atol: float = None, norm: Callable = max_norm,
                     max_iters: int = None) -> TerminationConfig:
    """설정 기본값을 채워 TerminationConfig 생성 (검증 실패 시 ConfigurationError)"""
    try:
        return TerminationConfig(
            rtol=config.DEFAULT_RTOL if rtol is None else rtol,
            atol=config.DEFAULT_ATOL if atol is None else atol,
            norm=norm,
            max_iters=config.DEFAULT_MAX_ITERS if max_iters is None else max_iters,
        )
    except ValidationError as e:
        raise ConfigurationError(f"종료 조건 설정 오류: {e}") from e


def _scaled_ratio(diff, scale):
    diff = np.abs(np.asarray(diff, dtype=float))
    scale = np.asarray(scale, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(diff == 0.0, 0.0, diff / scale)
    return ratio


def cauchy_termination(x_prev: Vector, x_next: Vector, f_prev: float, f_next: float,
                       cfg: TerminationConfig) -> bool:
    """
    코시 종료 조건

    |f_next − f_prev| / (ε_a + ε_r·|f_prev|) < 1 이고
    ‖(x_next − x_prev) ⊘ (ε_a + ε_r·|x_prev|)‖ < 1 이면 True.
    """
    x_prev = np.asarray(x_prev, dtype=float)
    x_next = np.asarray(x_next, dtype=float)
    f_ratio = float(_scaled_ratio(f_next - f_prev, cfg.atol + cfg.rtol * abs(f_prev)))
    return bool(f_ratio < 1.0 and step_within_tolerance(x_prev, x_next - x_prev, cfg))


def step_within_tolerance(x: Vector, step: Vector, cfg: TerminationConfig) -> bool:
    """‖step ⊘ (ε_a + ε_r·|x|)‖ < 1"""
    x_ratio = _scaled_ratio(step, cfg.atol + cfg.rtol * np.abs(np.asarray(x, dtype=float)))
    return bool(cfg.norm(x_ratio) < 1.0)


def flatten_output(out: Any) -> np.ndarray:
    """잔차 컨테이너를 깊이 우선, 왼쪽에서 오른쪽 순서로 1차원 벡터로 평탄화"""
    if isinstance(out, (list, tuple)):
        parts = [flatten_output(item) for item in out]
        if not parts:
            return np.zeros(0)
        return np.concatenate(parts)
    return np.atleast_1d(np.asarray(out, dtype=float)).ravel()


# 유한 차분 도함수

def _steps(x: Vector, step: float) -> Vector:
    return step * (1.0 + np.abs(x))


def fd_gradient(f: Callable[[Vector], float], x: Vector, step: float = None) -> Vector:
    """스칼라 함수의 중앙 차분 기울기 (스텝 step·(1+|x_i|))"""
    step = config.FD_STEP if step is None else step
    x = np.asarray(x, dtype=float)
    h = _steps(x, step)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h[i])
    return g


def fd_jacobian(F: Callable[[Vector], Vector], x: Vector, step: float = None) -> Matrix:
    """벡터 함수의 중앙 차분 야코비안 (M×N)"""
    step = config.FD_STEP if step is None else step
    x = np.asarray(x, dtype=float)
    h = _steps(x, step)
    columns = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        columns.append((flatten_output(F(x + e)) - flatten_output(F(x - e))) / (2.0 * h[i]))
    return np.column_stack(columns)


def fd_hessian(grad: Callable[[Vector], Vector], x: Vector, step: float = None) -> Matrix:
    """기울기의 중앙 차분으로 계산한 대칭 헤시안"""
    step = config.FD_HESSIAN_STEP if step is None else step
    H = fd_jacobian(grad, x, step)
    return 0.5 * (H + H.T)


def fd_value_hessian(f: Callable[[Vector], float], x: Vector, step: float = 1e-4) -> Matrix:
    """함수값만으로 계산한 2차 중앙 차분 헤시안"""
    x = np.asarray(x, dtype=float)
    n = x.size
    h = _steps(x, step)
    H = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            H[i, j] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4.0 * h[i] * h[j])
            H[j, i] = H[i, j]
    return H


@dataclass(frozen=True)
class Problem:
    """
    최적화 문제 정의

    fn(x, args)는 Minimise이면 스칼라, 그 외에는 잔차 컨테이너를 반환합니다.
    grad/jac/hess는 선택 사항이며 없으면 유한 차분으로 채웁니다.
    """
    kind: ProblemKind
    fn: Callable
    args: Any = None
    dim_in: int = 1
    dim_out: int = 1
    grad: Optional[Callable] = None
    jac: Optional[Callable] = None
    hess: Optional[Callable] = None
    name: str = ""

    def __post_init__(self):
        if self.dim_in < 1:
            raise ConfigurationError(f"입력 차원은 1 이상이어야 합니다: {self.dim_in}")
        if self.kind == ProblemKind.MINIMISE and self.dim_out != 1:
            raise ConfigurationError(f"Minimise 문제의 출력 차원은 1이어야 합니다: {self.dim_out}")
        if self.kind == ProblemKind.FIXED_POINT and self.dim_out != self.dim_in:
            raise ConfigurationError(
                f"고정점 문제는 입력/출력 차원이 같아야 합니다: {self.dim_in} != {self.dim_out}"
            )

    @property
    def is_scalar(self) -> bool:
        return self.kind == ProblemKind.MINIMISE

    def output(self, x: Vector) -> Union[float, Vector]:
        """fn 한 번 평가 (스칼라 또는 평탄화된 잔차)"""
        out = self.fn(x, self.args)
        if self.is_scalar:
            return float(np.asarray(out, dtype=float).reshape(()))
        return flatten_output(out)

    def objective_from_output(self, out) -> float:
        if self.is_scalar:
            return float(out)
        return float(np.dot(out, out))

    def objective(self, x: Vector) -> float:
        return self.objective_from_output(self.output(x))

    def jacobian(self, x: Vector) -> Matrix:
        """잔차 야코비안 (M×N)"""
        if self.jac is not None:
            return np.atleast_2d(np.asarray(self.jac(x, self.args), dtype=float))
        return fd_jacobian(lambda z: flatten_output(self.fn(z, self.args)), x)

    def gradient(self, x: Vector, residual: Vector = None, jacobian: Matrix = None) -> Vector:
        """목적 함수 기울기 (잔차형이면 2Jᵀr)"""
        if self.is_scalar:
            if self.grad is not None:
                return np.asarray(self.grad(x, self.args), dtype=float).ravel()
            return fd_gradient(self.objective, x)
        r = self.output(x) if residual is None else residual
        J = self.jacobian(x) if jacobian is None else jacobian
        return 2.0 * J.T @ r

    def hessian(self, x: Vector) -> Matrix:
        """목적 함수 헤시안 (제공되지 않으면 기울기의 유한 차분)"""
        if self.hess is not None:
            return np.atleast_2d(np.asarray(self.hess(x, self.args), dtype=float))
        return fd_hessian(self.gradient, x)


@dataclass(frozen=True)
class FnInfo:
    """반복점 x_k 에서의 국소 정보 d_k"""
    value: Optional[float] = None
    grad: Optional[Vector] = None
    residual: Optional[Vector] = None
    jacobian: Optional[Matrix] = None
    hessian: Optional[Matrix] = None
    hessian_is_inverse: bool = False

    def validate(self, dim: int = None):
        """필드 존재 및 차원 일관성 검사"""
        populated = [f for f in ("value", "grad", "residual", "jacobian", "hessian")
                     if getattr(self, f) is not None]
        if not populated:
            raise ConfigurationError("FnInfo에는 최소 하나의 필드가 필요합니다")
        n = dim
        if self.grad is not None:
            n = n or self.grad.shape[0]
            if self.grad.shape != (n,):
                raise ConfigurationError(f"기울기 차원 불일치: {self.grad.shape}")
        if self.jacobian is not None:
            n = n or self.jacobian.shape[1]
            if self.jacobian.shape[1] != n:
                raise ConfigurationError(f"야코비안 열 수 불일치: {self.jacobian.shape}")
            if self.residual is not None and self.jacobian.shape[0] != self.residual.shape[0]:
                raise ConfigurationError(f"야코비안 행 수 불일치: {self.jacobian.shape}")
        if self.hessian is not None:
            n = n or self.hessian.shape[0]
            H = self.hessian
            if H.shape != (n, n):
                raise ConfigurationError(f"헤시안 차원 불일치: {H.shape}")
            if np.max(np.abs(H - H.T)) > 1e-8 * max(1.0, float(np.max(np.abs(H)))):
                raise ConfigurationError("헤시안이 대칭이 아닙니다")
        return self

    @property
    def has_residual_model(self) -> bool:
        return self.residual is not None and self.jacobian is not None

    @property
    def has_second_order(self) -> bool:
        return self.hessian is not None or self.has_residual_model

    def gradient(self) -> Vector:
        if self.grad is not None:
            return self.grad
        if self.has_residual_model:
            return 2.0 * self.jacobian.T @ self.residual
        raise ConfigurationError("기울기 정보가 없습니다")

    def hessian_matvec(self, v: Vector) -> Vector:
        """모델 헤시안과 벡터의 곱"""
        if self.hessian is not None:
            if self.hessian_is_inverse:
                from linalg import solve_cholesky
                return solve_cholesky(self.hessian, v)
            return self.hessian @ v
        if self.has_residual_model:
            return 2.0 * self.jacobian.T @ (self.jacobian @ v)
        raise ConfigurationError("2차 모델 정보가 없습니다")

    def hessian_matrix(self) -> Matrix:
        """모델 헤시안 행렬 (역행렬로 저장된 경우 역변환)"""
        if self.hessian is not None:
            if self.hessian_is_inverse:
                from linalg import solve_cholesky
                return solve_cholesky(self.hessian, np.eye(self.hessian.shape[0]))
            return self.hessian
        if self.has_residual_model:
            return 2.0 * self.jacobian.T @ self.jacobian
        raise ConfigurationError("2차 모델 정보가 없습니다")

    def predicted_reduction(self, step: Vector, linear: bool = False) -> float:
        """모델 감소량 m(0) − m(step)"""
        step = np.asarray(step, dtype=float)
        if linear:
            return float(-self.gradient() @ step)
        if self.hessian is None and self.has_residual_model:
            # ‖r‖² − ‖r + Jδ‖² 를 소거 오차 없이 전개
            Jp = self.jacobian @ step
            return float(-(2.0 * self.residual @ Jp + Jp @ Jp))
        if self.hessian is None:
            return float(-self.gradient() @ step)
        g = self.gradient()
        return float(-(g @ step + 0.5 * step @ self.hessian_matvec(step)))

    def replace(self, **changes) -> "FnInfo":
        return replace(self, **changes)


@dataclass
class SolveStats:
    """솔브 카운터"""
    iterations: int = 0
    fn_evals: int = 0
    grad_evals: int = 0
    accepted_steps: int = 0
    rejected_steps: int = 0
    residual_check: Optional[float] = None

    def as_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


@dataclass
class Solution:
    """솔브 결과"""
    value: Vector
    fval: Union[float, Vector]
    result: SolveResult
    stats: SolveStats
    objective: float = float("nan")
    lowering: Tuple[ProblemKind, ...] = ()
    state: Dict[str, Any] = field(default_factory=dict)
    solver: str = ""

    @property
    def converged(self) -> bool:
        return self.result == SolveResult.CONVERGED

    @property
    def kind(self) -> Tuple[ProblemKind, ...]:
        return self.lowering


def check_initial_point(problem: Problem, x0: Sequence[float]) -> Vector:
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    if x.ndim != 1 or x.shape[0] != problem.dim_in:
        raise ConfigurationError(f"초기점 차원이 문제와 맞지 않습니다: {x.shape} vs {problem.dim_in}")
    if not np.all(np.isfinite(x)):
        raise ConfigurationError("초기점에 유한하지 않은 값이 있습니다")
    return x


def _fval(problem: Problem, info: FnInfo):
    return info.residual if info.residual is not None and not problem.is_scalar else info.value


def _fresh_step_within_tolerance(solver, x: Vector, info: FnInfo, cfg: TerminationConfig) -> bool:
    """x 에서 초기 상태로 다시 시작한 솔버의 첫 제안이 허용 오차 안이면 True"""
    fresh = solver.attach(info, solver.init_policy(info))
    alpha = solver.search.initial_alpha(solver.search.init())
    try:
        step, _ = solver.descent.step(alpha, fresh, solver.descent.init())
    except (LinearSolveFailed, RootFindStalled) as e:
        logger.debug(f"초기 상태 스텝 계산 실패: {e}")
        return False
    return bool(np.all(np.isfinite(step))) and step_within_tolerance(x, step, cfg)


def iterate(problem: Problem, solver, x0: Sequence[float], cfg: TerminationConfig = None,
            output0=None) -> Solution:
    """
    스텝 거절 반복 드라이버

    매 반복: 제안점 평가 → 서치가 (α, 수락 여부) 결정 → 수락 시 커밋 후 직전
    수락점과 코시 종료 검사 → 디센트가 다음 제안 생성. 제안점마다 목적 함수는
    정확히 한 번 평가됩니다.

    수렴은 스텝이 코시 조건을 만족하고, 그 점에서 초기 상태로 다시 시작한 솔버의
    첫 제안도 x 허용 오차 안일 때입니다. 스텝은 수락된 스텝이거나, 반올림 수준이라
    거절된 유한한 제안입니다 (이때는 현재 점을 반환).
    """
    cfg = cfg or solver.termination
    x = check_initial_point(problem, x0)
    stats = SolveStats()
    floor = config.ALPHA_FLOOR
    log_solve_start(problem.kind, solver.name, problem.dim_in)

    info = solver.evaluate(problem, x, output0)
    stats.fn_evals += 1
    state: Dict[str, Any] = {}

    def _finish(result):
        solution = Solution(value=x, fval=_fval(problem, info), result=result, stats=stats,
                            objective=float(info.value), state=state, solver=solver.name)
        log_solve_result(solver.name, result, stats)
        return solution

    if not np.isfinite(info.value):
        logger.warning("초기점에서 목적 함수가 유한하지 않습니다")
        return _finish(SolveResult.NONFINITE_ENCOUNTERED)
    if cfg.max_iters == 0:
        return _finish(SolveResult.MAX_ITERS_REACHED)

    result = SolveResult.MAX_ITERS_REACHED
    try:
        info = solver.linearise(problem, x, info)
        stats.grad_evals += 1
        policy_state = solver.init_policy(info)
        base = info
        info = solver.attach(info, policy_state)
        info.validate(problem.dim_in)
        # 현재 점에서 초기 상태 솔버의 첫 제안이 허용 오차 안인지 (None: 아직 모름)
        certified = None
        search_state = solver.search.init()
        cache = solver.descent.init()
        state.update(search=search_state, descent=cache, policy=policy_state)

        alpha = solver.search.initial_alpha(search_state)
        delta, cache = solver.descent.step(alpha, info, cache)

        for _ in range(cfg.max_iters):
            stats.iterations += 1
            x_new = x + delta
            info_new = solver.evaluate(problem, x_new)
            stats.fn_evals += 1
            finite = bool(np.isfinite(info_new.value))

            verdict, search_state = solver.search.step(info_new, info, delta, search_state)
            # 현재 반복점과 같은 제안은 서치 판정과 무관하게 커밋
            accept = verdict.accept or (finite and not np.any(delta))

            if accept and finite:
                stats.accepted_steps += 1
                linearised = solver.linearise(problem, x_new, info_new)
                stats.grad_evals += 1
                policy_state = solver.update_policy(policy_state, delta, info, linearised)
                info_new = solver.attach(linearised, policy_state)
                small = cauchy_termination(x, x_new, info.value, info_new.value, cfg)
                certified = _fresh_step_within_tolerance(solver, x_new, linearised, cfg) if small else None
                x, info, base = x_new, info_new, linearised
                cache = solver.descent.invalidate(cache)
                logger.debug(f"스텝 수락 - 반복 {stats.iterations}, f={info.value:.6e}")
                if small and certified:
                    result = SolveResult.CONVERGED
                    break
            elif accept:
                logger.warning("서치가 유한하지 않은 제안점을 수락했습니다")
                result = SolveResult.NONFINITE_ENCOUNTERED
                break
            else:
                stats.rejected_steps += 1
                log_step_rejected(stats.iterations, verdict.alpha, info_new.value)
                if finite and cauchy_termination(x, x_new, info.value, info_new.value, cfg):
                    if certified is None:
                        certified = _fresh_step_within_tolerance(solver, x, base, cfg)
                    if certified:
                        logger.debug(f"거절된 제안이 허용 오차 안입니다 - 반복 {stats.iterations}")
                        result = SolveResult.CONVERGED
                        break
                if verdict.alpha < floor:
                    logger.warning(f"스텝 크기가 하한 {floor:.0e} 아래로 줄었습니다")
                    result = SolveResult.NONFINITE_ENCOUNTERED
                    break

            alpha = verdict.alpha
            delta, cache = solver.descent.step(alpha, info, cache)
            if not np.all(np.isfinite(delta)):
                result = SolveResult.NONFINITE_ENCOUNTERED
                break
        state.update(search=search_state, descent=cache, policy=policy_state)
    except LinearSolveFailed as e:
        logger.warning(f"선형 풀이 실패로 솔브를 중단합니다: {e}")
        result = SolveResult.LINEAR_SOLVE_FAILED
    except RootFindStalled as e:
        logger.warning(f"신뢰 영역 부분 문제가 정체되었습니다: {e}")
        result = SolveResult.SUBPROBLEM_STALLED

    return _finish(result)
