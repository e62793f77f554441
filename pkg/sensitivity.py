"""
민감도 모듈
음함수 정리로 해 x*(θ) 의 매개변수 θ 에 대한 야코비안 dx*/dθ = −(∂F/∂x)⁻¹ ∂F/∂θ 를
계산합니다. 문제 유형별로 F 를 구성하는 task_system 을 함께 제공합니다.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

import linalg
from core import Problem, ProblemKind, fd_jacobian, fd_value_hessian, flatten_output, max_norm
from errors import LinearSolveFailed

# 로거 설정
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ImplicitSystem:
    """
    F(x, θ) = 0 형태의 음함수 시스템

    dFdx / dFdtheta 가 없으면 중앙 유한 차분으로 계산합니다.
    """
    F: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dFdx: Optional[Callable] = None
    dFdtheta: Optional[Callable] = None

    def residual(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return flatten_output(self.F(x, theta))

    def jacobian_x(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        if self.dFdx is not None:
            return np.atleast_2d(np.asarray(self.dFdx(x, theta), dtype=float))
        return fd_jacobian(lambda z: self.residual(z, theta), x)

    def jacobian_theta(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        if self.dFdtheta is not None:
            return np.atleast_2d(np.asarray(self.dFdtheta(x, theta), dtype=float))
        return fd_jacobian(lambda t: self.residual(x, t), theta)


def implicit_jacobian(system: ImplicitSystem, x_star, theta, residual_tol: float = None) -> np.ndarray:
    """
    dx*/dθ (N×M)

    ∂F/∂x 를 한 번 LU 분해한 뒤 M 개의 우변을 풉니다. residual_tol 이 주어지면
    F(x*, θ) 가 그 이하인지 검사해 경고를 남깁니다.
    """
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))

    if residual_tol is not None:
        size = max_norm(system.residual(x_star, theta))
        if size > residual_tol:
            logger.warning(f"x*가 F(x, θ) = 0 을 만족하지 않습니다: ‖F‖∞={size:.3e} > {residual_tol:.3e}")

    A = system.jacobian_x(x_star, theta)
    B = system.jacobian_theta(x_star, theta)
    try:
        factor = linalg.factor_lu(A)
    except LinearSolveFailed as e:
        raise LinearSolveFailed(f"∂F/∂x 가 특이 행렬이라 음함수 정리를 적용할 수 없습니다: {e}") from e
    return -factor.solve(B)


def _split_hessian(f: Callable, x: np.ndarray, theta: np.ndarray):
    """함수값만으로 (x, θ) 결합 헤시안을 구해 x-x 블록과 x-θ 블록으로 분리"""
    n = x.size
    H = fd_value_hessian(lambda z: f(z[:n], z[n:]), np.concatenate([x, theta]))
    return H[:n, :n], H[:n, n:]


def task_system(problem: Problem, full_hessian: bool = False) -> ImplicitSystem:
    """
    문제 유형별 음함수 시스템 구성 (θ = problem.args)

    RootFind: F = f
    FixedPoint: F = f − x
    Minimise: F = ∇ₓf
    LeastSquares: F = 2Jₓᵀr, ∂F/∂x ≈ 2JₓᵀJₓ (full_hessian=True 이면 2(JₓᵀJₓ + Σ rᵢ∇²rᵢ)),
                  ∂F/∂θ = 2(JₓᵀJ_θ + Σ rᵢ ∂²rᵢ/∂x∂θ)
    """
    fn = problem.fn
    kind = problem.kind

    def raw(x, theta):
        return flatten_output(fn(x, theta))

    if kind == ProblemKind.ROOT_FIND:
        dFdx = None
        if problem.jac is not None:
            dFdx = problem.jac
        return ImplicitSystem(F=raw, dFdx=dFdx)

    if kind == ProblemKind.FIXED_POINT:
        dFdx = None
        if problem.jac is not None:
            def dFdx(x, theta):
                J = np.atleast_2d(np.asarray(problem.jac(x, theta), dtype=float))
                return J - np.eye(J.shape[0])
        return ImplicitSystem(F=lambda x, theta: raw(x, theta) - x, dFdx=dFdx)

    if kind == ProblemKind.MINIMISE:
        def value(x, theta):
            return float(np.asarray(fn(x, theta), dtype=float).reshape(()))

        if problem.grad is not None:
            grad = problem.grad
            dFdx = problem.hess
            return ImplicitSystem(F=lambda x, theta: np.asarray(grad(x, theta), dtype=float), dFdx=dFdx)

        # 기울기가 없으면 함수값의 2차 차분을 사용
        return ImplicitSystem(
            F=lambda x, theta: fd_jacobian(lambda z: np.array([value(z, theta)]), x).ravel(),
            dFdx=lambda x, theta: _split_hessian(value, x, theta)[0],
            dFdtheta=lambda x, theta: _split_hessian(value, x, theta)[1],
        )

    def jac_x(x, theta):
        if problem.jac is not None:
            return np.atleast_2d(np.asarray(problem.jac(x, theta), dtype=float))
        return fd_jacobian(lambda z: raw(z, theta), x)

    def jac_theta(x, theta):
        return fd_jacobian(lambda t: raw(x, t), theta)

    def F(x, theta):
        return 2.0 * jac_x(x, theta).T @ raw(x, theta)

    def curvature(x, theta):
        # φ(z, t) = r̄ᵀr(z, t), r̄ = r(x, θ) 고정: 2차 미분 블록이 Σ rᵢ∇²rᵢ 가 됨
        r_bar = raw(x, theta)
        return _split_hessian(lambda z, t: float(r_bar @ raw(z, t)), x, theta)

    def dFdx(x, theta):
        Jx = jac_x(x, theta)
        gauss_newton = Jx.T @ Jx
        if full_hessian:
            return 2.0 * (gauss_newton + curvature(x, theta)[0])
        return 2.0 * gauss_newton

    def dFdtheta(x, theta):
        # 잔차가 0 이 아니면 교차 항 Σ rᵢ ∂²rᵢ/∂x∂θ 가 필요
        return 2.0 * (jac_x(x, theta).T @ jac_theta(x, theta) + curvature(x, theta)[1])

    return ImplicitSystem(F=F, dFdx=dFdx, dFdtheta=dFdtheta)


def solution_jacobian(problem: Problem, x_star, full_hessian: bool = False,
                      residual_tol: float = None) -> np.ndarray:
    """problem.args 를 θ 로 보고 해 x* 의 민감도 계산"""
    system = task_system(problem, full_hessian=full_hessian)
    return implicit_jacobian(system, x_star, problem.args, residual_tol=residual_tol)
