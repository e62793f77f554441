"""
진입점과 자동 변환(lowering) 테스트
"""

import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from api import LOWERING_ORDER, fixed_point, least_squares, lowering_chain, minimise, root_find
from core import ProblemKind, SolveResult
from errors import ConfigurationError, SolveFailed
from problem_corpus import DOTTIE_NUMBER, rosenbrock_residual, rosenbrock_scalar, rosenbrock_scalar_grad
from solvers import (
    SolverCapability, make_bfgs, make_bisection, make_fixed_point_iteration, make_gauss_newton,
    make_levenberg_marquardt, make_newton_root,
)

MINIMISE_ONLY = SolverCapability(frozenset({ProblemKind.MINIMISE}))
LEAST_SQUARES_ONLY = SolverCapability(frozenset({ProblemKind.LEAST_SQUARES}))
ROOT_ONLY = SolverCapability(frozenset({ProblemKind.ROOT_FIND}))


class TestLoweringChain:

    def test_order(self):
        assert LOWERING_ORDER == (ProblemKind.FIXED_POINT, ProblemKind.ROOT_FIND,
                                  ProblemKind.LEAST_SQUARES, ProblemKind.MINIMISE)

    @pytest.mark.parametrize("kind, capability, expected", [
        (ProblemKind.MINIMISE, MINIMISE_ONLY, (ProblemKind.MINIMISE,)),
        (ProblemKind.LEAST_SQUARES, MINIMISE_ONLY, (ProblemKind.LEAST_SQUARES, ProblemKind.MINIMISE)),
        (ProblemKind.ROOT_FIND, LEAST_SQUARES_ONLY, (ProblemKind.ROOT_FIND, ProblemKind.LEAST_SQUARES)),
        (ProblemKind.FIXED_POINT, ROOT_ONLY, (ProblemKind.FIXED_POINT, ProblemKind.ROOT_FIND)),
        (ProblemKind.FIXED_POINT, MINIMISE_ONLY, LOWERING_ORDER),
    ])
    def test_chains(self, kind, capability, expected):
        assert lowering_chain(kind, capability) == expected

    @pytest.mark.parametrize("kind, capability", [
        (ProblemKind.MINIMISE, LEAST_SQUARES_ONLY),
        (ProblemKind.MINIMISE, ROOT_ONLY),
        (ProblemKind.LEAST_SQUARES, ROOT_ONLY),
    ])
    def test_no_upward_lowering(self, kind, capability):
        with pytest.raises(ConfigurationError):
            lowering_chain(kind, capability)


class TestMinimise:

    def test_shifted_sphere(self):
        a = np.array([1.0, -2.0, 0.5])
        solution = minimise(lambda x, args: float(np.sum((x - args) ** 2)), make_bfgs(), np.zeros(3), a)
        assert solution.result == SolveResult.CONVERGED
        assert_allclose(solution.value, a, atol=1e-5)
        assert solution.lowering == (ProblemKind.MINIMISE,)

    def test_constant_objective(self):
        solution = minimise(lambda x, args: 3.0, make_bfgs(), [1.0, 2.0])
        assert solution.result == SolveResult.CONVERGED
        assert_allclose(solution.value, [1.0, 2.0])
        assert solution.stats.accepted_steps <= 2

    def test_rosenbrock(self):
        solution = minimise(rosenbrock_scalar, make_bfgs(rtol=1e-8, atol=1e-10, max_iters=2000),
                            [-1.2, 1.0], grad=rosenbrock_scalar_grad)
        assert solution.result == SolveResult.CONVERGED
        assert solution.objective <= 1e-8
        assert_allclose(solution.value, [1.0, 1.0], atol=1e-4)

    def test_vector_objective_rejected(self):
        with pytest.raises(ConfigurationError):
            minimise(lambda x, args: x, make_bfgs(), [1.0, 2.0])

    def test_least_squares_solver_rejected(self, sphere):
        fn, _ = sphere
        with pytest.raises(ConfigurationError):
            minimise(fn, make_levenberg_marquardt(), [1.0])

    def test_not_a_solver(self, sphere):
        fn, _ = sphere
        with pytest.raises(ConfigurationError):
            minimise(fn, object(), [1.0])

    @pytest.mark.parametrize("x0", [[np.nan, 1.0], [[1.0, 2.0], [3.0, 4.0]]])
    def test_bad_initial_point(self, sphere, x0):
        fn, _ = sphere
        with pytest.raises(ConfigurationError):
            minimise(fn, make_bfgs(), x0)

    def test_throw(self, sphere):
        fn, grad = sphere
        with pytest.raises(SolveFailed) as exc_info:
            minimise(fn, make_bfgs(max_iters=1), [1.0, 1.0], grad=grad, throw=True)
        assert exc_info.value.solution.result == SolveResult.MAX_ITERS_REACHED

    def test_no_throw_returns_failure(self, sphere):
        fn, grad = sphere
        solution = minimise(fn, make_bfgs(max_iters=1), [1.0, 1.0], grad=grad)
        assert solution.result == SolveResult.MAX_ITERS_REACHED


class TestLeastSquares:

    def test_linear_matches_lstsq(self, rng):
        A = rng.normal(size=(8, 3))
        b = rng.normal(size=8)
        solution = least_squares(lambda x, args: A @ x - b, make_gauss_newton(), np.zeros(3),
                                 jac=lambda x, args: A)
        assert solution.result == SolveResult.CONVERGED
        assert_allclose(solution.value, np.linalg.lstsq(A, b, rcond=None)[0], rtol=1e-8, atol=1e-10)

    def test_tuple_residual_lowered_to_minimiser(self):
        def fn(x, args):
            r = rosenbrock_residual(x, 10.0)
            return (r[:1], [r[1]])

        solution = least_squares(fn, make_bfgs(rtol=1e-8, atol=1e-10, max_iters=2000), [-1.2, 1.0])
        assert solution.lowering == (ProblemKind.LEAST_SQUARES, ProblemKind.MINIMISE)
        assert solution.objective <= 1e-8
        assert_allclose(solution.value, [1.0, 1.0], atol=1e-3)

    def test_zero_residual_start(self):
        solution = least_squares(lambda x, args: x - 1.0, make_levenberg_marquardt(), [1.0, 1.0])
        assert solution.result == SolveResult.CONVERGED
        assert solution.stats.accepted_steps == 1
        assert_allclose(solution.value, [1.0, 1.0])

    def test_lowered_objective_evaluates_once_per_point(self, counting):
        A = np.array([[1.0, 2.0], [0.0, 1.0], [1.0, -1.0]])
        b = np.array([1.0, 0.0, 2.0])
        fn = counting(lambda x, args: A @ x - b)
        solution = least_squares(fn, make_bfgs(max_iters=200), np.zeros(2), jac=lambda x, args: A)
        assert fn.calls == solution.stats.fn_evals

    def test_root_solver_rejected(self):
        with pytest.raises(ConfigurationError):
            least_squares(lambda x, args: x, make_newton_root(), [1.0])


class TestRootFind:

    def test_native_newton_one_step(self):
        solution = root_find(lambda x, args: x - 3.0, make_newton_root(), [0.0],
                              jac=lambda x, args: np.eye(1))
        assert solution.result == SolveResult.CONVERGED
        assert solution.stats.iterations == 1
        assert_allclose(solution.value, [3.0])
        assert solution.stats.residual_check is None

    @pytest.mark.parametrize("make_solver, chain", [
        (lambda: make_bfgs(rtol=1e-10, atol=1e-12, max_iters=500), LOWERING_ORDER[1:]),
        (lambda: make_levenberg_marquardt(rtol=1e-10, atol=1e-12), LOWERING_ORDER[1:3]),
        (lambda: make_newton_root(rtol=1e-10, atol=1e-12), LOWERING_ORDER[1:2]),
    ])
    def test_square_root_system(self, square_root_residual, make_solver, chain):
        solution = root_find(square_root_residual, make_solver(), [1.0, 0.0])
        assert solution.result == SolveResult.CONVERGED
        assert solution.lowering == chain
        assert_allclose(solution.value, [np.sqrt(2.0), 1.0], atol=1e-4)
        residual = np.max(np.abs(square_root_residual(solution.value)))
        assert residual <= 1e-6
        if len(chain) > 1:
            assert solution.stats.residual_check == pytest.approx(residual)

    def test_non_square_system_with_least_squares_solver(self):
        def fn(x, args):
            return np.array([x[0] - 1.0, x[1] - 2.0, x[0] + x[1] - 3.0])

        solution = root_find(fn, make_levenberg_marquardt(rtol=1e-10, atol=1e-12), [0.0, 0.0])
        assert solution.result == SolveResult.CONVERGED
        assert_allclose(solution.value, [1.0, 2.0], atol=1e-6)
        assert solution.stats.residual_check <= 1e-6

    def test_non_square_newton_rejected_at_dispatch(self, counting, caplog):
        fn = counting(lambda x, args: np.array([x[0] - 1.0, x[1] - 2.0, x[0] + x[1] - 3.0]))
        with caplog.at_level(logging.DEBUG, logger="logger_config"):
            with pytest.raises(ConfigurationError):
                root_find(fn, make_newton_root(), [0.0, 0.0])
        # 초기점 출력 평가 한 번뿐
        assert fn.calls == 1
        assert not any("솔브 시작" in record.getMessage() for record in caplog.records)

    def test_bisection_without_sign_change_rejected(self):
        with pytest.raises(ConfigurationError):
            root_find(lambda x, args: x ** 2 + 1.0, make_bisection(-1.0, 1.0), [0.0])

    def test_fixed_point_solver_rejected(self):
        with pytest.raises(ConfigurationError):
            root_find(lambda x, args: x, make_fixed_point_iteration(), [1.0])


class TestFixedPoint:

    def test_native_iteration(self):
        solution = fixed_point(lambda x, args: x / 2.0 + 1.0, make_fixed_point_iteration(rtol=1e-10, atol=1e-12),
                               [0.0])
        assert solution.result == SolveResult.CONVERGED
        assert_allclose(solution.value, [2.0], atol=1e-9)
        assert solution.lowering == (ProblemKind.FIXED_POINT,)

    def test_cosine_through_newton(self):
        solution = fixed_point(lambda x, args: np.cos(x), make_newton_root(rtol=1e-10, atol=1e-12), [1.0])
        assert solution.result == SolveResult.CONVERGED
        assert solution.lowering == (ProblemKind.FIXED_POINT, ProblemKind.ROOT_FIND)
        assert abs(solution.value[0] - DOTTIE_NUMBER) <= 1e-8
        assert solution.stats.residual_check <= 1e-10

    def test_cosine_through_minimiser(self):
        solution = fixed_point(lambda x, args: np.cos(x), make_bfgs(rtol=1e-10, atol=1e-12, max_iters=500), [1.0])
        assert solution.lowering == LOWERING_ORDER
        assert abs(solution.value[0] - DOTTIE_NUMBER) <= 1e-5

    def test_identity_converges_immediately(self):
        solution = fixed_point(lambda x, args: x, make_fixed_point_iteration(), [0.3, -0.7])
        assert solution.result == SolveResult.CONVERGED
        assert solution.stats.iterations == 1
        assert_allclose(solution.value, [0.3, -0.7])

    def test_analytic_jacobian_is_shifted(self):
        M = np.array([[0.5, 0.1], [0.0, 0.25]])
        c = np.array([1.0, 3.0])
        solution = fixed_point(lambda x, args: M @ x + c, make_newton_root(), np.zeros(2),
                               jac=lambda x, args: M)
        expected = np.linalg.solve(np.eye(2) - M, c)
        assert_allclose(solution.value, expected, rtol=1e-10)
        assert solution.stats.iterations <= 2
