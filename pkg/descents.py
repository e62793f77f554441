"""
디센트 모듈
서치가 정한 스칼라 α와 국소 정보로부터 실제 갱신 벡터를 만듭니다.
α가 스텝 배율인 디센트(최급강하, 뉴턴, 비선형 CG)와 α가 신뢰 영역 반경인
디센트(간접 감쇠 뉴턴, 도그레그)가 있으며, 비싼 선형 풀이는 반복점마다 한 번만
계산해 DescentCache 에 보관합니다.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.optimize

import linalg
from core import FnInfo, is_euclidean, two_norm
from errors import ConfigurationError, LinearSolveFailed, RootFindStalled

# 로거 설정
logger = logging.getLogger(__name__)

BOUNDARY_RTOL = 1e-3
LAMBDA_MAX_ITERS = 100


class SolveMode(str, Enum):
    """감쇠/가우스-뉴턴 선형 풀이 방식"""
    NORMAL_EQUATIONS = "NormalEquations"
    AUGMENTED_LSTSQ = "AugmentedLstsq"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class DescentCache:
    """
    반복점별 디센트 캐시

    newton_point, cauchy_point, factorization, eigen 은 현재 반복점에서만 유효하며
    스텝이 수락될 때마다 비워집니다. prev_grad/prev_direction 은 비선형 CG 용
    직전 반복점 정보입니다. linear_solves 는 누적 선형 풀이 횟수입니다.
    """
    newton_point: Optional[np.ndarray] = None
    cauchy_point: Optional[np.ndarray] = None
    factorization: Any = None
    eigen: Optional[Tuple[np.ndarray, np.ndarray]] = None
    normal_system: Optional[Tuple[np.ndarray, np.ndarray]] = None
    grad: Optional[np.ndarray] = None
    direction: Optional[np.ndarray] = None
    prev_grad: Optional[np.ndarray] = None
    prev_direction: Optional[np.ndarray] = None
    linear_solves: int = 0

    def invalidate(self) -> "DescentCache":
        """수락된 스텝 이후: 반복점 의존 항목을 비우고 CG 이력을 한 칸 전진"""
        if self.direction is not None:
            return DescentCache(prev_grad=self.grad, prev_direction=self.direction,
                                linear_solves=self.linear_solves)
        return DescentCache(prev_grad=self.prev_grad, prev_direction=self.prev_direction,
                            linear_solves=self.linear_solves)


def steepest(alpha: float, info: FnInfo) -> np.ndarray:
    """−α∇f"""
    return -alpha * info.gradient()


def newton_direction(info: FnInfo, solve_mode: SolveMode = SolveMode.AUGMENTED_LSTSQ) -> np.ndarray:
    """
    전처리된 기울기 방향 −H⁻¹g

    헤시안(또는 역헤시안)이 있으면 그것을, 잔차 모델만 있으면 가우스-뉴턴 스텝
    −J⁺r 을 사용합니다 (AugmentedLstsq 는 QR, NormalEquations 는 정규 방정식 CG).
    """
    if info.hessian is not None:
        g = info.gradient()
        if info.hessian_is_inverse:
            return -(info.hessian @ g)
        return -linalg.solve_cholesky(info.hessian, g)
    if info.has_residual_model:
        J, r = info.jacobian, info.residual
        if solve_mode == SolveMode.NORMAL_EQUATIONS:
            return linalg.solve_cg(J.T @ J, -(J.T @ r))
        return linalg.solve_lstsq(J, -r)
    raise ConfigurationError("뉴턴 디센트에는 헤시안 또는 잔차/야코비안 정보가 필요합니다")


def _cached_newton_point(info: FnInfo, cache: DescentCache,
                         solve_mode: SolveMode) -> Tuple[np.ndarray, DescentCache]:
    if cache.newton_point is None:
        point = newton_direction(info, solve_mode)
        cache = replace(cache, newton_point=point, linear_solves=cache.linear_solves + 1)
    return cache.newton_point, cache


def newton_descent(alpha: float, info: FnInfo, cache: DescentCache,
                   solve_mode: SolveMode = SolveMode.AUGMENTED_LSTSQ) -> Tuple[np.ndarray, DescentCache]:
    """α·(−H⁻¹g), 풀이 결과는 같은 반복점에서 재사용"""
    point, cache = _cached_newton_point(info, cache, solve_mode)
    return alpha * point, cache


def damped_newton_direct(alpha: float, info: FnInfo,
                         solve_mode: SolveMode = SolveMode.AUGMENTED_LSTSQ) -> np.ndarray:
    """
    감쇠 뉴턴 스텝 (λ = 1/α)

    NormalEquations: (JᵀJ + λI)p = −Jᵀr 을 Cholesky 로 풀이.
    AugmentedLstsq: min ‖[J; √λI]p + [r; 0]‖₂ 를 QR 로 풀이.
    헤시안 모델이면 (H + λI)p = −g 를 풉니다.
    """
    if not alpha > 0:
        raise ConfigurationError(f"alpha는 양수여야 합니다: {alpha}")
    damping = 1.0 / alpha
    if info.has_residual_model and info.hessian is None:
        J, r = info.jacobian, info.residual
        if solve_mode == SolveMode.NORMAL_EQUATIONS:
            n = J.shape[1]
            return linalg.solve_cholesky(J.T @ J + damping * np.eye(n), -(J.T @ r))
        return linalg.solve_augmented_lstsq(J, -r, damping)
    H = info.hessian_matrix()
    return linalg.solve_cholesky(H + damping * np.eye(H.shape[0]), -info.gradient())


def _model(info: FnInfo) -> Tuple[np.ndarray, np.ndarray]:
    """신뢰 영역 부분 문제용 (H, g)"""
    return info.hessian_matrix(), info.gradient()


def _boundary_scale(p: np.ndarray, radius: float, norm: Callable) -> np.ndarray:
    size = norm(p)
    if size == 0:
        return p
    return (radius / size) * p


def _eigen(H: np.ndarray, cache: DescentCache) -> Tuple[Tuple[np.ndarray, np.ndarray], DescentCache]:
    if cache.eigen is None:
        if not np.all(np.isfinite(H)):
            raise LinearSolveFailed("모델 헤시안에 유한하지 않은 값이 있습니다")
        eigvals, eigvecs = scipy.linalg.eigh(0.5 * (H + H.T), check_finite=False)
        cache = replace(cache, eigen=(eigvals, eigvecs), linear_solves=cache.linear_solves + 1)
    return cache.eigen, cache


def damped_newton_indirect(alpha: float, info: FnInfo, norm: Callable = two_norm,
                           cache: DescentCache = None) -> Tuple[np.ndarray, DescentCache]:
    """
    신뢰 영역 부분 문제의 간접 풀이 (α = 반경 Δ)

    뉴턴 스텝이 반경 안이면 그대로 반환하고, 아니면 ‖p(λ)‖ = Δ 인 λ > 0 을
    1차원 근 찾기로 구합니다. p(λ) 는 H 의 고유분해로 계산하며 고유분해는
    반복점마다 한 번만 수행합니다.
    """
    cache = cache or DescentCache()
    radius = alpha
    H, g = _model(info)
    if not np.any(g):
        return np.zeros_like(g), cache

    (eigvals, eigvecs), cache = _eigen(H, cache)
    g_hat = eigvecs.T @ g

    def p_of(lam: float) -> np.ndarray:
        return -eigvecs @ (g_hat / (eigvals + lam))

    scale = max(1.0, float(np.max(np.abs(eigvals))))
    if eigvals[0] > 1e-12 * scale:
        newton = p_of(0.0)
        if norm(newton) <= radius:
            return newton, cache
        lower = 0.0
    else:
        lower = -eigvals[0] + 1e-12 * scale

    def boundary(lam: float) -> float:
        return norm(p_of(lam)) - radius

    if boundary(lower) <= 0:
        # g 가 최소 고유벡터와 직교하는 경우: 경계로 투영
        return _boundary_scale(p_of(lower), radius, norm), cache

    upper = max(lower, 0.0) + two_norm(g) / radius + 1.0
    for _ in range(LAMBDA_MAX_ITERS):
        if boundary(upper) < 0:
            break
        upper *= 2.0
    else:
        raise RootFindStalled("λ 탐색 구간을 찾지 못했습니다")

    try:
        lam = scipy.optimize.brentq(boundary, lower, upper, xtol=1e-14, rtol=1e-12,
                                    maxiter=LAMBDA_MAX_ITERS)
    except RuntimeError as e:
        raise RootFindStalled(f"λ 근 찾기가 {LAMBDA_MAX_ITERS}회 안에 수렴하지 않았습니다") from e

    p = p_of(lam)
    if abs(norm(p) - radius) > BOUNDARY_RTOL * radius:
        raise RootFindStalled(f"경계 조건 오차가 큽니다: ‖p‖={norm(p):.6e}, Δ={radius:.6e}")
    return p, cache


def _dogleg_tau(p_u: np.ndarray, p_b: np.ndarray, radius: float, norm: Callable, euclidean: bool) -> float:
    d = p_b - p_u
    if euclidean:
        a = d @ d
        b = 2.0 * (p_u @ d)
        c = p_u @ p_u - radius ** 2
        return float((-b + math.sqrt(max(b * b - 4.0 * a * c, 0.0))) / (2.0 * a))
    # 사용자 노름: [0, 1] 에서 이분법
    return float(scipy.optimize.bisect(lambda t: norm(p_u + t * d) - radius, 0.0, 1.0,
                                       xtol=BOUNDARY_RTOL * radius * 1e-3, maxiter=200))


def dogleg(alpha: float, info: FnInfo, norm: Callable = two_norm,
           cache: DescentCache = None, euclidean: Optional[bool] = None) -> Tuple[np.ndarray, DescentCache]:
    """
    도그레그 스텝 (α = 반경 Δ)

    코시 점 p_U = −(gᵀg / gᵀHg)g, 뉴턴 점 p_B = −H⁻¹g 를 잇는 꺾은선과 반경
    경계의 교점을 반환합니다. gᵀHg ≤ 0 이면 경계까지의 최급강하 스텝입니다.
    euclidean 이 None 이면 norm 의 유클리드 표시(core.euclidean)를 따르며,
    유클리드 노름이면 교점을 2차 방정식으로, 아니면 이분법으로 구합니다.
    """
    if euclidean is None:
        euclidean = is_euclidean(norm)
    cache = cache or DescentCache()
    radius = alpha
    g = info.gradient()
    if not np.any(g):
        return np.zeros_like(g), cache

    if cache.cauchy_point is None:
        curvature = float(g @ info.hessian_matvec(g))
        if curvature <= 0:
            return _boundary_scale(-g, radius, norm), cache
        cache = replace(cache, cauchy_point=-(g @ g / curvature) * g)
    p_u = cache.cauchy_point

    try:
        p_b, cache = _cached_newton_point(info, cache, SolveMode.AUGMENTED_LSTSQ)
    except LinearSolveFailed:
        logger.debug("뉴턴 점 계산 실패, 코시 점으로 대체합니다")
        return _boundary_scale(p_u, radius, norm), cache

    if norm(p_b) <= radius:
        return p_b, cache
    if norm(p_u) >= radius:
        return _boundary_scale(p_u, radius, norm), cache
    tau = _dogleg_tau(p_u, p_b, radius, norm, euclidean)
    return p_u + tau * (p_b - p_u), cache


def nonlinear_cg(alpha: float, info: FnInfo, cache: DescentCache) -> Tuple[np.ndarray, DescentCache]:
    """
    Polak-Ribière+ 비선형 켤레 기울기

    d_k = −g_k + β_k d_{k−1}, β_k = max(0, g_kᵀ(g_k − g_{k−1}) / ‖g_{k−1}‖²).
    d_k 가 강하 방향이 아니면 β = 0 으로 재시작합니다.
    """
    if cache.direction is None:
        g = info.gradient()
        d = -g
        if cache.prev_grad is not None and cache.prev_direction is not None:
            g_prev = cache.prev_grad
            denom = float(g_prev @ g_prev)
            beta = max(0.0, float(g @ (g - g_prev)) / denom) if denom > 0 else 0.0
            d = -g + beta * cache.prev_direction
            if g @ d >= 0:
                d = -g
        cache = replace(cache, grad=g, direction=d)
    return alpha * cache.direction, cache


class _Descent:
    """디센트 공통 인터페이스"""
    requires_model = False
    owns_direction = False
    radius_like = False

    def init(self) -> DescentCache:
        return DescentCache()

    def invalidate(self, cache: DescentCache) -> DescentCache:
        return cache.invalidate()


@dataclass(frozen=True)
class SteepestDescent(_Descent):
    def step(self, alpha: float, info: FnInfo, cache: DescentCache):
        return steepest(alpha, info), cache


@dataclass(frozen=True)
class NewtonDescent(_Descent):
    solve_mode: SolveMode = SolveMode.AUGMENTED_LSTSQ
    requires_model = True

    def step(self, alpha: float, info: FnInfo, cache: DescentCache):
        return newton_descent(alpha, info, cache, self.solve_mode)


@dataclass(frozen=True)
class DampedNewtonDescent(_Descent):
    """직접 감쇠 뉴턴 (레벤버그-마쿼트)"""
    solve_mode: SolveMode = SolveMode.AUGMENTED_LSTSQ
    requires_model = True

    def step(self, alpha: float, info: FnInfo, cache: DescentCache):
        p = damped_newton_direct(alpha, info, self.solve_mode)
        return p, replace(cache, linear_solves=cache.linear_solves + 1)


@dataclass(frozen=True)
class IndirectDampedNewtonDescent(_Descent):
    norm: Callable = two_norm
    requires_model = True
    radius_like = True

    def step(self, alpha: float, info: FnInfo, cache: DescentCache):
        return damped_newton_indirect(alpha, info, self.norm, cache)


@dataclass(frozen=True)
class DoglegDescent(_Descent):
    norm: Callable = two_norm
    euclidean: Optional[bool] = None
    requires_model = True
    radius_like = True

    def step(self, alpha: float, info: FnInfo, cache: DescentCache):
        return dogleg(alpha, info, self.norm, cache, self.euclidean)


@dataclass(frozen=True)
class NonlinearCGDescent(_Descent):
    owns_direction = True

    def step(self, alpha: float, info: FnInfo, cache: DescentCache):
        return nonlinear_cg(alpha, info, cache)
