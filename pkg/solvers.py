"""
솔버 조립 모듈
정보 정책(매 스텝 FnInfo 를 어떻게 만드는지), 서치, 디센트를 묶어 완전한 최적화기를
만들고, 뉴턴/코드/이분법/고정점 반복 같은 고전적인 근 찾기 스텝퍼를 제공합니다.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, FrozenSet, Optional, Sequence, Tuple

import numpy as np

import linalg
from core import (
    FnInfo, Problem, ProblemKind, Solution, SolveResult, SolveStats, TerminationConfig,
    cauchy_termination, check_initial_point, fd_jacobian, flatten_output, iterate,
    make_termination, max_norm,
)
from descents import (
    DampedNewtonDescent, DoglegDescent, IndirectDampedNewtonDescent, NewtonDescent,
    NonlinearCGDescent, SolveMode, SteepestDescent,
)
from errors import ConfigurationError, LinearSolveFailed
from logger_config import log_solve_result, log_solve_start
from searches import BacktrackingArmijo, ClassicalTrustRegion, LearningRate

# 로거 설정
logger = logging.getLogger(__name__)

CURVATURE_TOL = 1e-10


class InfoPolicy(str, Enum):
    """FnInfo 생성 정책"""
    GRADIENT_ONLY = "GradientOnly"
    GRADIENT_PLUS_BFGS = "GradientPlusBFGS"
    RESIDUAL_JACOBIAN = "ResidualJacobian"
    GRADIENT_PLUS_TRUE_HESSIAN = "GradientPlusTrueHessian"

    def __str__(self):
        return self.value


class JacobianMode(str, Enum):
    NEWTON = "Newton"
    CHORD = "Chord"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SolverCapability:
    """솔버가 직접 풀 수 있는 문제 유형 집합"""
    native_kinds: FrozenSet[ProblemKind]

    def __post_init__(self):
        if not self.native_kinds:
            raise ConfigurationError("솔버는 최소 하나의 문제 유형을 지원해야 합니다")

    def supports(self, kind: ProblemKind) -> bool:
        return kind in self.native_kinds


@dataclass(frozen=True)
class BfgsState:
    """BFGS 근사 행렬 (inverse=True 이면 B⁻¹)"""
    approx: np.ndarray
    inverse: bool = False

    @classmethod
    def identity(cls, n: int, inverse: bool = False) -> "BfgsState":
        return cls(approx=np.eye(n), inverse=inverse)


def bfgs_update(state: BfgsState, s: np.ndarray, y: np.ndarray) -> BfgsState:
    """
    BFGS 갱신

    yᵀs ≤ 1e-10·‖s‖‖y‖ 이면 곡률 조건 위반으로 갱신하지 않습니다.
    직접 모드: B' = B − (Bs)(Bs)ᵀ/(sᵀBs) + yyᵀ/(yᵀs)
    역 모드: H' = (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ, ρ = 1/(yᵀs)
    """
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    sy = float(s @ y)
    if not np.isfinite(sy) or sy <= CURVATURE_TOL * np.linalg.norm(s) * np.linalg.norm(y):
        return state

    M = state.approx
    if state.inverse:
        rho = 1.0 / sy
        left = np.eye(s.size) - rho * np.outer(s, y)
        updated = left @ M @ left.T + rho * np.outer(s, s)
    else:
        Bs = M @ s
        sBs = float(s @ Bs)
        if sBs <= 0:
            return state
        updated = M - np.outer(Bs, Bs) / sBs + np.outer(y, y) / sy
    return BfgsState(approx=0.5 * (updated + updated.T), inverse=state.inverse)


@dataclass(frozen=True)
class ComposedSolver:
    """
    정보 정책 + 서치 + 디센트 조립 솔버

    생성 시 디센트가 요구하는 정보를 정책이 만들 수 있는지 검사합니다.
    """
    info_policy: InfoPolicy
    search: Any
    descent: Any
    termination: TerminationConfig
    use_inverse: bool = False
    name: str = "composed"

    def __post_init__(self):
        if self.descent.requires_model and self.info_policy == InfoPolicy.GRADIENT_ONLY:
            raise ConfigurationError(
                f"{type(self.descent).__name__}는 2차 모델 정보가 필요하지만 정책 {self.info_policy}는 기울기만 제공합니다"
            )
        if self.descent.owns_direction and self.info_policy != InfoPolicy.GRADIENT_ONLY:
            raise ConfigurationError(
                f"{type(self.descent).__name__}는 자체 방향을 관리하므로 {InfoPolicy.GRADIENT_ONLY} 정책과만 조합할 수 있습니다"
            )
        if self.use_inverse and self.info_policy != InfoPolicy.GRADIENT_PLUS_BFGS:
            raise ConfigurationError("use_inverse는 BFGS 정책에서만 사용할 수 있습니다")

    @property
    def capability(self) -> SolverCapability:
        if self.info_policy == InfoPolicy.RESIDUAL_JACOBIAN:
            return SolverCapability(frozenset({ProblemKind.LEAST_SQUARES}))
        return SolverCapability(frozenset({ProblemKind.MINIMISE}))

    def evaluate(self, problem: Problem, x: np.ndarray, output=None) -> FnInfo:
        """함수값(과 잔차)만 평가"""
        out = problem.output(x) if output is None else output
        if problem.is_scalar:
            return FnInfo(value=float(out))
        out = np.asarray(out, dtype=float)
        return FnInfo(value=problem.objective_from_output(out), residual=out)

    def linearise(self, problem: Problem, x: np.ndarray, info: FnInfo) -> FnInfo:
        """수락된 점에서 정책에 맞는 도함수 정보 추가"""
        if self.info_policy == InfoPolicy.RESIDUAL_JACOBIAN:
            J = problem.jacobian(x)
            return info.replace(jacobian=J, grad=2.0 * J.T @ info.residual)
        grad = problem.gradient(x, residual=info.residual)
        if self.info_policy == InfoPolicy.GRADIENT_PLUS_TRUE_HESSIAN:
            return info.replace(grad=grad, hessian=problem.hessian(x))
        return info.replace(grad=grad)

    def init_policy(self, info: FnInfo) -> Optional[BfgsState]:
        if self.info_policy == InfoPolicy.GRADIENT_PLUS_BFGS:
            return BfgsState.identity(info.gradient().size, self.use_inverse)
        return None

    def update_policy(self, state: Optional[BfgsState], step: np.ndarray,
                      info_old: FnInfo, info_new: FnInfo) -> Optional[BfgsState]:
        if state is None:
            return None
        return bfgs_update(state, step, info_new.gradient() - info_old.gradient())

    def attach(self, info: FnInfo, state: Optional[BfgsState]) -> FnInfo:
        if state is None:
            return info
        return info.replace(hessian=state.approx, hessian_is_inverse=state.inverse)

    def check_problem(self, problem: Problem):
        """조립 솔버는 유형 외의 추가 제약이 없음"""
        return problem

    def solve(self, problem: Problem, x0: Sequence[float], output0=None) -> Solution:
        self.check_problem(problem)
        return iterate(problem, self, x0, self.termination, output0)


def _termination(rtol, atol, norm, max_iters) -> TerminationConfig:
    if rtol is not None and rtol < 0 or atol is not None and atol < 0:
        raise ConfigurationError(f"허용 오차는 음수일 수 없습니다: rtol={rtol}, atol={atol}")
    return make_termination(rtol, atol, norm, max_iters)


def make_bfgs(rtol: float = None, atol: float = None, use_inverse: bool = False, search=None,
              descent=None, norm: Callable = max_norm, max_iters: int = None,
              name: str = None) -> ComposedSolver:
    """BFGS: 기본값은 백트래킹 Armijo + BFGS 행렬 뉴턴 디센트. 서치/디센트 교체 가능"""
    return ComposedSolver(
        info_policy=InfoPolicy.GRADIENT_PLUS_BFGS,
        search=search if search is not None else BacktrackingArmijo(),
        descent=descent if descent is not None else NewtonDescent(),
        termination=_termination(rtol, atol, norm, max_iters),
        use_inverse=use_inverse,
        name=name or ("bfgs-inv" if use_inverse else "bfgs"),
    )


def make_gauss_newton(rtol: float = None, atol: float = None,
                      solve_mode: SolveMode = SolveMode.AUGMENTED_LSTSQ, norm: Callable = max_norm,
                      max_iters: int = None, name: str = None) -> ComposedSolver:
    """가우스-뉴턴: 잔차/야코비안 + 뉴턴 디센트 + 고정 학습률 1.0"""
    return ComposedSolver(
        info_policy=InfoPolicy.RESIDUAL_JACOBIAN,
        search=LearningRate(1.0),
        descent=NewtonDescent(SolveMode(solve_mode)),
        termination=_termination(rtol, atol, norm, max_iters),
        name=name or ("gn-cg" if solve_mode == SolveMode.NORMAL_EQUATIONS else "gn"),
    )


def make_levenberg_marquardt(rtol: float = None, atol: float = None,
                             solve_mode: SolveMode = SolveMode.AUGMENTED_LSTSQ, norm: Callable = max_norm,
                             max_iters: int = None, name: str = None) -> ComposedSolver:
    """레벤버그-마쿼트: 잔차/야코비안 + 직접 감쇠 뉴턴 + 2차 모델 신뢰 영역"""
    return ComposedSolver(
        info_policy=InfoPolicy.RESIDUAL_JACOBIAN,
        search=ClassicalTrustRegion(),
        descent=DampedNewtonDescent(SolveMode(solve_mode)),
        termination=_termination(rtol, atol, norm, max_iters),
        name=name or ("lm1" if solve_mode == SolveMode.NORMAL_EQUATIONS else "lm2"),
    )


def make_nonlinear_cg(rtol: float = None, atol: float = None, norm: Callable = max_norm,
                      max_iters: int = None, name: str = "ncg") -> ComposedSolver:
    """비선형 CG: 기울기 + PR+ 방향 + 백트래킹 Armijo"""
    return ComposedSolver(
        info_policy=InfoPolicy.GRADIENT_ONLY,
        search=BacktrackingArmijo(),
        descent=NonlinearCGDescent(),
        termination=_termination(rtol, atol, norm, max_iters),
        name=name,
    )


def make_gradient_descent(learning_rate: float = 1e-3, rtol: float = None, atol: float = None,
                          norm: Callable = max_norm, max_iters: int = None,
                          name: str = "gd") -> ComposedSolver:
    return ComposedSolver(
        info_policy=InfoPolicy.GRADIENT_ONLY,
        search=LearningRate(learning_rate),
        descent=SteepestDescent(),
        termination=_termination(rtol, atol, norm, max_iters),
        name=name,
    )


def make_newton_minimiser(rtol: float = None, atol: float = None, norm: Callable = max_norm,
                          max_iters: int = None, name: str = "newton") -> ComposedSolver:
    """유한 차분 헤시안 + 뉴턴 디센트 + 백트래킹 Armijo"""
    return ComposedSolver(
        info_policy=InfoPolicy.GRADIENT_PLUS_TRUE_HESSIAN,
        search=BacktrackingArmijo(),
        descent=NewtonDescent(),
        termination=_termination(rtol, atol, norm, max_iters),
        name=name,
    )


def make_dogleg(rtol: float = None, atol: float = None, norm: Callable = max_norm,
                max_iters: int = None, name: str = "dogleg") -> ComposedSolver:
    return ComposedSolver(
        info_policy=InfoPolicy.RESIDUAL_JACOBIAN,
        search=ClassicalTrustRegion(),
        descent=DoglegDescent(),
        termination=_termination(rtol, atol, norm, max_iters),
        name=name,
    )


def make_indirect_levenberg_marquardt(rtol: float = None, atol: float = None, norm: Callable = max_norm,
                                      max_iters: int = None, name: str = "lm-indirect") -> ComposedSolver:
    return ComposedSolver(
        info_policy=InfoPolicy.RESIDUAL_JACOBIAN,
        search=ClassicalTrustRegion(),
        descent=IndirectDampedNewtonDescent(),
        termination=_termination(rtol, atol, norm, max_iters),
        name=name,
    )


def make_hybrid_minimiser(rtol: float = 1e-8, atol: float = 1e-9, use_inverse: bool = False,
                          norm: Callable = max_norm, max_iters: int = None,
                          name: str = "hybrid") -> ComposedSolver:
    """BFGS 정보 + 도그레그 디센트 + 학습률 0.1 (새 솔버 코드 없이 make_bfgs 조합만 사용)"""
    return make_bfgs(rtol=rtol, atol=atol, use_inverse=use_inverse, search=LearningRate(0.1),
                     descent=DoglegDescent(), norm=norm, max_iters=max_iters, name=name)


# 고전적인 근 찾기 / 고정점 스텝퍼

def _jacobian_at(f: Callable, x: np.ndarray, jac: Callable = None) -> np.ndarray:
    if jac is not None:
        return np.atleast_2d(np.asarray(jac(x), dtype=float))
    return fd_jacobian(f, x)


def newton_root_step(f: Callable, x: np.ndarray, jac_mode: JacobianMode = JacobianMode.NEWTON,
                     frozen_jac: np.ndarray = None, jac: Callable = None, fx: np.ndarray = None) -> np.ndarray:
    """
    뉴턴/코드 스텝 x − J⁻¹f(x)

    Newton 은 x 에서 J 를 계산하고, Chord 는 frozen_jac(보통 x₀ 에서의 J)를 씁니다.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    fx = flatten_output(f(x)) if fx is None else fx
    if fx.size != x.size:
        raise ConfigurationError(f"뉴턴 근 찾기에는 정방 시스템이 필요합니다: {fx.size} != {x.size}")
    if jac_mode == JacobianMode.CHORD:
        if frozen_jac is None:
            raise ConfigurationError("코드 스텝에는 고정 야코비안이 필요합니다")
        J = frozen_jac
    else:
        J = _jacobian_at(f, x, jac)
    return x - linalg.factor_lu(J).solve(fx)


def bisection_step(f: Callable, interval: Tuple[float, float]) -> Tuple[Tuple[float, float], float]:
    """
    이분법 한 스텝

    중점을 평가해 부호 변화를 유지하는 반 구간과 중점을 반환합니다.
    중점이 정확히 근이면 (mid, mid) 구간을 반환합니다.
    """
    lo, hi = float(interval[0]), float(interval[1])
    f_lo, f_hi = float(f(lo)), float(f(hi))
    if not f_lo * f_hi < 0:
        raise ConfigurationError(f"구간 양 끝에서 부호가 바뀌어야 합니다: f({lo})={f_lo}, f({hi})={f_hi}")
    mid = 0.5 * (lo + hi)
    f_mid = float(f(mid))
    if f_mid == 0.0:
        return (mid, mid), mid
    if f_lo * f_mid < 0:
        return (lo, mid), mid
    return (mid, hi), mid


def fixed_point_step(f: Callable, x: np.ndarray) -> np.ndarray:
    """x ← f(x)"""
    return flatten_output(f(x))


def _native_solution(x, F, result, stats, name, state=None) -> Solution:
    log_solve_result(name, result, stats)
    return Solution(value=x, fval=F, result=result, stats=stats, objective=float(np.dot(F, F)),
                    state=state or {}, solver=name)


@dataclass(frozen=True)
class NewtonRoot:
    """뉴턴(또는 코드) 근 찾기"""
    termination: TerminationConfig = field(default_factory=make_termination)
    jac_mode: JacobianMode = JacobianMode.NEWTON
    name: str = "newton-root"

    @property
    def capability(self) -> SolverCapability:
        return SolverCapability(frozenset({ProblemKind.ROOT_FIND}))

    def check_problem(self, problem: Problem):
        if problem.dim_out != problem.dim_in:
            raise ConfigurationError(
                f"뉴턴 근 찾기에는 정방 시스템이 필요합니다: {problem.dim_out} != {problem.dim_in}"
            )
        return problem

    def solve(self, problem: Problem, x0: Sequence[float], output0=None) -> Solution:
        self.check_problem(problem)
        cfg = self.termination
        x = check_initial_point(problem, x0)
        f = problem.output
        jac = problem.jacobian
        stats = SolveStats()

        F = f(x) if output0 is None else np.asarray(output0, dtype=float)
        stats.fn_evals += 1
        if F.size != x.size:
            raise ConfigurationError(f"뉴턴 근 찾기에는 정방 시스템이 필요합니다: {F.size} != {x.size}")
        log_solve_start(problem.kind, self.name, problem.dim_in)
        if not np.all(np.isfinite(F)):
            return _native_solution(x, F, SolveResult.NONFINITE_ENCOUNTERED, stats, self.name)
        if not np.any(F):
            return _native_solution(x, F, SolveResult.CONVERGED, stats, self.name)

        frozen = None
        try:
            if self.jac_mode == JacobianMode.CHORD:
                frozen = jac(x)
                stats.grad_evals += 1
            result = SolveResult.MAX_ITERS_REACHED
            for _ in range(cfg.max_iters):
                stats.iterations += 1
                if self.jac_mode == JacobianMode.NEWTON:
                    stats.grad_evals += 1
                x_new = newton_root_step(f, x, self.jac_mode, frozen_jac=frozen, jac=jac, fx=F)
                F_new = f(x_new)
                stats.fn_evals += 1
                stats.accepted_steps += 1
                if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(F_new))):
                    result = SolveResult.NONFINITE_ENCOUNTERED
                    break
                done = cauchy_termination(x, x_new, max_norm(F), max_norm(F_new), cfg) or not np.any(F_new)
                x, F = x_new, F_new
                if done:
                    result = SolveResult.CONVERGED
                    break
        except LinearSolveFailed as e:
            logger.warning(f"야코비안 풀이 실패: {e}")
            result = SolveResult.LINEAR_SOLVE_FAILED
        return _native_solution(x, F, result, stats, self.name, {"jacobian": frozen})


def make_newton_root(rtol: float = None, atol: float = None, chord: bool = False,
                     norm: Callable = max_norm, max_iters: int = None) -> NewtonRoot:
    mode = JacobianMode.CHORD if chord else JacobianMode.NEWTON
    return NewtonRoot(termination=_termination(rtol, atol, norm, max_iters), jac_mode=mode,
                      name="chord" if chord else "newton-root")


@dataclass(frozen=True)
class Bisection:
    """1차원 이분법 (초기 구간 [lower, upper] 에서 부호가 바뀌어야 함)"""
    lower: float
    upper: float
    termination: TerminationConfig = field(default_factory=make_termination)
    name: str = "bisection"

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ConfigurationError(f"구간이 잘못되었습니다: [{self.lower}, {self.upper}]")

    @property
    def capability(self) -> SolverCapability:
        return SolverCapability(frozenset({ProblemKind.ROOT_FIND}))

    def check_problem(self, problem: Problem):
        """1차원 문제이고 초기 구간 양 끝에서 부호가 바뀌는지 검사"""
        if problem.dim_in != 1 or problem.dim_out != 1:
            raise ConfigurationError("이분법은 1차원 문제에만 사용할 수 있습니다")
        f_lo = float(problem.output(np.array([self.lower]))[0])
        f_hi = float(problem.output(np.array([self.upper]))[0])
        if not f_lo * f_hi < 0:
            raise ConfigurationError(
                f"구간 양 끝에서 부호가 바뀌어야 합니다: f({self.lower})={f_lo}, f({self.upper})={f_hi}"
            )
        return problem

    def solve(self, problem: Problem, x0: Sequence[float], output0=None) -> Solution:
        self.check_problem(problem)
        cfg = self.termination
        stats = SolveStats()
        log_solve_start(problem.kind, self.name, 1)

        def f(t: float) -> float:
            stats.fn_evals += 1
            return float(problem.output(np.array([t]))[0])

        interval = (self.lower, self.upper)
        mid = 0.5 * (self.lower + self.upper)
        result = SolveResult.MAX_ITERS_REACHED
        for _ in range(cfg.max_iters):
            stats.iterations += 1
            stats.accepted_steps += 1
            interval, mid = bisection_step(f, interval)
            width = interval[1] - interval[0]
            if width == 0.0 or width < cfg.atol + cfg.rtol * abs(mid):
                result = SolveResult.CONVERGED
                break
        x = np.array([mid])
        F = problem.output(x)
        return _native_solution(x, F, result, stats, self.name, {"interval": interval})


@dataclass(frozen=True)
class FixedPointIteration:
    """고정점 반복 x ← f(x)"""
    termination: TerminationConfig = field(default_factory=make_termination)
    name: str = "fixed-point"

    @property
    def capability(self) -> SolverCapability:
        return SolverCapability(frozenset({ProblemKind.FIXED_POINT}))

    def check_problem(self, problem: Problem):
        return problem

    def solve(self, problem: Problem, x0: Sequence[float], output0=None) -> Solution:
        self.check_problem(problem)
        cfg = self.termination
        x = check_initial_point(problem, x0)
        stats = SolveStats()
        log_solve_start(problem.kind, self.name, problem.dim_in)

        x_new = problem.output(x) if output0 is None else np.asarray(output0, dtype=float)
        stats.fn_evals += 1
        result = SolveResult.MAX_ITERS_REACHED
        for k in range(cfg.max_iters):
            if not np.all(np.isfinite(x_new)):
                result = SolveResult.NONFINITE_ENCOUNTERED
                break
            stats.iterations += 1
            stats.accepted_steps += 1
            scaled = (x_new - x) / (cfg.atol + cfg.rtol * np.abs(x))
            x_prev, x = x, x_new
            if not np.any(x - x_prev) or cfg.norm(scaled) < 1.0:
                result = SolveResult.CONVERGED
                break
            if k + 1 < cfg.max_iters:
                x_new = problem.output(x)
                stats.fn_evals += 1
        F = problem.output(x) - x
        return _native_solution(x, F, result, stats, self.name)


def make_fixed_point_iteration(rtol: float = None, atol: float = None, norm: Callable = max_norm,
                               max_iters: int = None) -> FixedPointIteration:
    return FixedPointIteration(termination=_termination(rtol, atol, norm, max_iters))


def make_bisection(lower: float, upper: float, rtol: float = None, atol: float = None,
                   max_iters: int = None) -> Bisection:
    return Bisection(lower=lower, upper=upper, termination=_termination(rtol, atol, max_norm, max_iters))
