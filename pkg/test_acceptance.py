"""
종단 간 수용 테스트: 로젠브록 재현, 조합 솔버, 회귀 예제, LM 변형 비교,
변환 경로, 음함수 민감도, 재시작 종료, 평가 횟수 계측
"""

from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from api import fixed_point, least_squares, root_find
from bench import quality_gate
from conftest import CountingFn
from core import ProblemKind, SolveResult, max_norm
from descents import SolveMode
from problem_corpus import (
    DOTTIE_NUMBER, REGRESSION_WEIGHTS, builtin_corpus, get_problem, ill_conditioned_system,
)
from sensitivity import solution_jacobian
from solvers import (
    make_bfgs, make_bisection, make_dogleg, make_fixed_point_iteration, make_gauss_newton,
    make_hybrid_minimiser, make_levenberg_marquardt, make_newton_minimiser, make_newton_root,
    make_nonlinear_cg,
)

CORPUS = builtin_corpus()


def test_rosenbrock_100_with_bfgs():
    problem = get_problem("rosenbrock_100")
    solution = problem.solve(make_bfgs(max_iters=2000))
    assert solution.result == SolveResult.CONVERGED
    assert solution.stats.iterations <= 2000
    assert solution.objective <= 1e-8
    assert max_norm(solution.value - 1.0) <= 1e-3


def test_hybrid_solver_on_biggs():
    solver = make_hybrid_minimiser(max_iters=2000)
    solution = get_problem("biggs_exp6").solve(solver)
    assert quality_gate(solution.objective, 0.0, 1e-4, 1e-4)


def test_regression_recovers_weights():
    problem = get_problem("linear_regression")
    for solver in (make_gauss_newton(), make_bfgs(max_iters=500)):
        solution = problem.solve(solver)
        assert_allclose(solution.value, REGRESSION_WEIGHTS, atol=0.15)


class TestLevenbergMarquardtVariants:

    @staticmethod
    def _system(seed):
        A, b, _ = ill_conditioned_system(condition=1e2, seed=seed)
        pad = np.zeros((A.shape[0] - A.shape[1], A.shape[1]))

        def fn(x, args):
            return A @ x + 0.1 * np.concatenate([np.sin(x), pad[:, 0]]) - b

        def jac(x, args):
            return A + 0.1 * np.vstack([np.diag(np.cos(x)), pad])

        return fn, jac

    @pytest.mark.parametrize("seed", range(5))
    def test_iterates_agree_when_well_conditioned(self, seed):
        fn, jac = self._system(seed)
        x0 = np.full(5, 3.0)
        for k in range(1, 9):
            lm1 = least_squares(fn, make_levenberg_marquardt(solve_mode=SolveMode.NORMAL_EQUATIONS, max_iters=k),
                                x0, jac=jac)
            lm2 = least_squares(fn, make_levenberg_marquardt(max_iters=k), x0, jac=jac)
            assert max_norm(lm1.value - lm2.value) <= 1e-6 * max(1.0, max_norm(lm2.value))

    def test_augmented_solve_passes_gate_when_ill_conditioned(self):
        problem = get_problem("ill_conditioned_linear")
        A, _ = problem.args
        s = np.linalg.svd(A, compute_uv=False)
        assert s[0] / s[-1] >= 1e9
        solution = problem.solve(make_levenberg_marquardt(max_iters=2000))
        assert quality_gate(solution.objective, 0.0, 1e-6, 1e-5)


class TestConversionChain:

    @pytest.mark.parametrize("solver", [make_bfgs(rtol=1e-8, atol=1e-10, max_iters=2000), make_newton_root(),
                                        make_levenberg_marquardt()], ids=["bfgs", "newton", "lm"])
    def test_square_root_system(self, square_root_residual, solver):
        solution = root_find(square_root_residual, solver, [1.0, 0.0])
        assert max_norm(square_root_residual(solution.value)) <= 1e-6

    def test_cosine_matches_bisection_oracle(self):
        oracle = root_find(lambda x, args: np.cos(x) - x, make_bisection(0.0, 1.0, rtol=1e-15, atol=1e-15), [0.5])
        assert abs(oracle.value[0] - DOTTIE_NUMBER) <= 1e-12
        solution = fixed_point(lambda x, args: np.cos(x), make_newton_root(), [1.0])
        assert solution.lowering == (ProblemKind.FIXED_POINT, ProblemKind.ROOT_FIND)
        assert abs(solution.value[0] - oracle.value[0]) <= 1e-8


# 매개변수 문제의 정밀 풀이용 솔버
def _precise_solver(kind):
    if kind == ProblemKind.LEAST_SQUARES:
        return make_gauss_newton(rtol=1e-13, atol=1e-15, max_iters=100)
    if kind == ProblemKind.MINIMISE:
        return make_newton_minimiser(rtol=1e-13, atol=1e-15, max_iters=100)
    return make_newton_root(rtol=1e-13, atol=1e-15, max_iters=100)


PARAMETERISED = [p for p in CORPUS if p.parameterised]


def test_enough_parameterised_problems():
    assert len(PARAMETERISED) >= 5


@pytest.mark.parametrize("problem", PARAMETERISED, ids=lambda p: p.name)
def test_implicit_jacobian_matches_resolve(problem):
    theta = np.asarray(problem.args, dtype=float)
    solver = _precise_solver(problem.kind)
    warm = replace(problem, x0=problem.x_star)
    x_star = warm.solve(solver).value
    implicit = solution_jacobian(problem.as_problem(), x_star)

    h = 1e-5
    oracle = np.empty((x_star.size, theta.size))
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = h
        x_plus = warm.solve(solver, args=theta + e).value
        x_minus = warm.solve(solver, args=theta - e).value
        oracle[:, j] = (x_plus - x_minus) / (2.0 * h)

    tol = max(1e-5, 1e-3 * np.max(np.abs(implicit)))
    assert np.max(np.abs(implicit - oracle)) <= tol


# 유형별로 다시 시작을 확인할 솔버
RESTART_SOLVERS = {
    "bfgs": lambda: make_bfgs(max_iters=500),
    "bfgs-inv": lambda: make_bfgs(use_inverse=True, max_iters=500),
    "ncg": lambda: make_nonlinear_cg(max_iters=2000),
    "newton": lambda: make_newton_minimiser(max_iters=200),
    "gn": lambda: make_gauss_newton(max_iters=200),
    "lm2": lambda: make_levenberg_marquardt(max_iters=500),
    "lm1": lambda: make_levenberg_marquardt(solve_mode=SolveMode.NORMAL_EQUATIONS, max_iters=500),
    "dogleg": lambda: make_dogleg(max_iters=500),
    "newton-root": lambda: make_newton_root(max_iters=200),
    "fixed-point": lambda: make_fixed_point_iteration(max_iters=500),
}

RESTART_BY_KIND = {
    ProblemKind.MINIMISE: ("bfgs", "bfgs-inv", "ncg", "newton"),
    ProblemKind.LEAST_SQUARES: ("gn", "lm2", "lm1", "dogleg", "bfgs", "ncg"),
    ProblemKind.ROOT_FIND: ("newton-root", "lm2", "bfgs"),
    ProblemKind.FIXED_POINT: ("fixed-point", "newton-root"),
}

RESTART_CASES = [
    pytest.param(problem, name, id=f"{problem.name}-{name}")
    for problem in CORPUS if problem.dim <= 20
    for name in RESTART_BY_KIND[problem.kind]
]


@pytest.mark.parametrize("problem, solver_name", RESTART_CASES)
def test_restart_from_converged_value_with_same_solver(problem, solver_name):
    first = problem.solve(RESTART_SOLVERS[solver_name]())
    if first.result != SolveResult.CONVERGED:
        pytest.skip(f"첫 풀이가 수렴하지 않음: {first.result}")

    again = replace(problem, x0=first.value).solve(RESTART_SOLVERS[solver_name]())
    assert again.result == SolveResult.CONVERGED
    assert again.stats.accepted_steps <= 1


@pytest.mark.parametrize("problem", [p for p in CORPUS if p.kind in (ProblemKind.MINIMISE, ProblemKind.LEAST_SQUARES)],
                         ids=lambda p: p.name)
def test_bfgs_evaluation_count(problem):
    counted = replace(problem, fn=CountingFn(problem.fn))
    solution = counted.solve(make_bfgs(max_iters=200))
    stats = solution.stats
    assert stats.fn_evals == stats.accepted_steps + stats.rejected_steps + 1
    has_derivative = problem.grad is not None if problem.kind == ProblemKind.MINIMISE else problem.jac is not None
    if has_derivative:
        assert counted.fn.calls == stats.fn_evals
