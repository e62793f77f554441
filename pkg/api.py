"""
사용자 진입점 모듈
minimise / least_squares / root_find / fixed_point 네 가지 진입점을 제공합니다.
솔버가 직접 풀 수 없는 문제 유형은 고정점 → 근 찾기 → 최소 제곱 → 최소화 순서로
자동 변환(lowering)한 뒤 해당 솔버로 풉니다.
"""

import logging
from typing import Any, Callable, List, Sequence, Tuple

import numpy as np

from core import Problem, ProblemKind, Solution, SolveResult, flatten_output
from errors import ConfigurationError, SolveFailed
from logger_config import log_error, log_lowering
from solvers import SolverCapability

# 로거 설정
logger = logging.getLogger(__name__)

LOWERING_ORDER = (
    ProblemKind.FIXED_POINT,
    ProblemKind.ROOT_FIND,
    ProblemKind.LEAST_SQUARES,
    ProblemKind.MINIMISE,
)

__all__ = [
    "SolverCapability", "LOWERING_ORDER", "lowering_chain", "lower",
    "minimise", "least_squares", "root_find", "fixed_point",
]


def lowering_chain(kind: ProblemKind, capability: SolverCapability) -> Tuple[ProblemKind, ...]:
    """
    kind 에서 솔버가 직접 지원하는 첫 유형까지의 변환 경로

    변환은 한 방향으로만 진행하므로 경로가 없으면 ConfigurationError 입니다.
    """
    start = LOWERING_ORDER.index(kind)
    chain: List[ProblemKind] = []
    for target in LOWERING_ORDER[start:]:
        chain.append(target)
        if capability.supports(target):
            return tuple(chain)
    supported = ", ".join(sorted(str(k) for k in capability.native_kinds))
    raise ConfigurationError(f"{kind} 문제를 지원하는 변환 경로가 없습니다 (솔버 지원 유형: {supported})")


def _fixed_point_to_root(problem: Problem, x0=None, output0=None) -> Problem:
    fn, jac = problem.fn, problem.jac

    def residual(x, args):
        return flatten_output(fn(x, args)) - x

    lowered_jac = None
    if jac is not None:
        def lowered_jac(x, args):
            J = np.atleast_2d(np.asarray(jac(x, args), dtype=float))
            return J - np.eye(J.shape[0])

    return Problem(ProblemKind.ROOT_FIND, residual, problem.args, problem.dim_in, problem.dim_out,
                   jac=lowered_jac, name=problem.name)


def _root_to_least_squares(problem: Problem, x0=None, output0=None) -> Problem:
    return Problem(ProblemKind.LEAST_SQUARES, problem.fn, problem.args, problem.dim_in, problem.dim_out,
                   jac=problem.jac, name=problem.name)


def _least_squares_to_minimise(problem: Problem, x0=None, output0=None) -> Problem:
    """
    g(x) = Σrᵢ², ∇g = 2Jᵀr

    마지막으로 평가한 잔차를 보관해 같은 점의 기울기 계산에서 fn 을 다시 부르지 않습니다.
    """
    fn = problem.fn
    last = {}
    if x0 is not None and output0 is not None:
        last.update(x=np.array(x0, dtype=float), r=np.asarray(output0, dtype=float))

    def objective(x, args):
        r = flatten_output(fn(x, args))
        last.update(x=np.array(x, dtype=float), r=r)
        return float(np.dot(r, r))

    def gradient(x, args):
        if "x" in last and np.array_equal(last["x"], x):
            return problem.gradient(x, residual=last["r"])
        return problem.gradient(x)

    return Problem(ProblemKind.MINIMISE, objective, problem.args, problem.dim_in, 1,
                   grad=gradient, name=problem.name)


_LOWER_ONCE = {
    ProblemKind.FIXED_POINT: (_fixed_point_to_root, lambda x, out: out - x),
    ProblemKind.ROOT_FIND: (_root_to_least_squares, lambda x, out: out),
    ProblemKind.LEAST_SQUARES: (_least_squares_to_minimise, lambda x, out: float(np.dot(out, out))),
}


def lower(problem: Problem, chain: Sequence[ProblemKind], x0: np.ndarray, output0):
    """변환 경로를 따라 문제와 x0 에서의 출력값을 함께 변환"""
    for kind in chain[:-1]:
        transform, convert = _LOWER_ONCE[kind]
        problem = transform(problem, x0, output0)
        output0 = convert(x0, output0)
    return problem, output0


def _as_vector(x0) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    if x.ndim != 1 or x.size < 1:
        raise ConfigurationError(f"초기점은 1차원 벡터여야 합니다: shape={x.shape}")
    if not np.all(np.isfinite(x)):
        raise ConfigurationError("초기점에 유한하지 않은 값이 있습니다")
    return x


def _solve(kind: ProblemKind, fn: Callable, solver, x0, args: Any, grad=None, jac=None, hess=None,
           throw: bool = False) -> Solution:
    capability = getattr(solver, "capability", None)
    if capability is None:
        raise ConfigurationError(f"솔버가 아닙니다: {solver!r}")
    chain = lowering_chain(kind, capability)

    x = _as_vector(x0)
    raw = fn(x, args)
    if kind == ProblemKind.MINIMISE:
        if np.size(raw) != 1:
            raise ConfigurationError(f"최소화 목적 함수는 스칼라를 반환해야 합니다: size={np.size(raw)}")
        output0 = float(np.asarray(raw, dtype=float).reshape(()))
        dim_out = 1
    else:
        output0 = flatten_output(raw)
        dim_out = output0.size
    problem = Problem(kind, fn, args, x.size, dim_out, grad=grad, jac=jac, hess=hess)

    if len(chain) > 1:
        log_lowering(chain, solver.name)
    lowered, output0 = lower(problem, chain, x, output0)
    # 디스패치 단계에서 문제 제약 확인
    solver.check_problem(lowered)
    solution = solver.solve(lowered, x, output0)
    solution.lowering = chain

    if kind in (ProblemKind.ROOT_FIND, ProblemKind.FIXED_POINT) and chain[-1] != kind:
        out = flatten_output(fn(solution.value, args))
        check = out - solution.value if kind == ProblemKind.FIXED_POINT else out
        solution.stats.residual_check = float(np.max(np.abs(check)))

    if throw and solution.result != SolveResult.CONVERGED:
        log_error("SolveFailed", f"{solution.result}", context=f"{kind} / {solver.name}")
        raise SolveFailed(f"{kind} 솔브가 수렴하지 않았습니다: {solution.result}", solution=solution)
    return solution


def minimise(fn: Callable, solver, x0, args: Any = None, *, grad: Callable = None,
             hess: Callable = None, throw: bool = False) -> Solution:
    """
    스칼라 함수 최소화

    grad(x, args), hess(x, args) 를 주지 않으면 중앙 유한 차분을 사용합니다.
    """
    return _solve(ProblemKind.MINIMISE, fn, solver, x0, args, grad=grad, hess=hess, throw=throw)


def least_squares(fn: Callable, solver, x0, args: Any = None, *, jac: Callable = None,
                  throw: bool = False) -> Solution:
    """
    비선형 최소 제곱 min Σ rᵢ(x)²

    fn 은 잔차 벡터 또는 잔차 블록의 (중첩) 시퀀스를 반환할 수 있으며, 깊이 우선
    순서로 이어 붙입니다. 최소화 솔버에는 g(x) = Σrᵢ² 와 기울기 2Jᵀr 로 전달됩니다.
    """
    return _solve(ProblemKind.LEAST_SQUARES, fn, solver, x0, args, jac=jac, throw=throw)


def root_find(fn: Callable, solver, x0, args: Any = None, *, jac: Callable = None,
              throw: bool = False) -> Solution:
    """f(x) = 0 풀이. 변환된 솔브는 stats.residual_check 에 ‖f(x*)‖∞ 를 기록합니다"""
    return _solve(ProblemKind.ROOT_FIND, fn, solver, x0, args, jac=jac, throw=throw)


def fixed_point(fn: Callable, solver, x0, args: Any = None, *, jac: Callable = None,
                throw: bool = False) -> Solution:
    """f(x) = x 풀이. 고정점 반복 외의 솔버에는 F(x) = f(x) − x 로 전달됩니다"""
    x = _as_vector(x0)
    return _solve(ProblemKind.FIXED_POINT, fn, solver, x, args, jac=jac, throw=throw)
