"""
서치 모듈
국소 정보와 내부 상태로부터 스텝 스칼라 α와 직전 제안의 수락 여부를 결정합니다.
고정 학습률, 백트래킹 Armijo, 2차 보간 라인 서치, 2차/1차 모델 신뢰 영역을 제공합니다.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from core import FnInfo
from errors import ConfigurationError

# 로거 설정
logger = logging.getLogger(__name__)

ARMIJO_C = 0.5
ARMIJO_ETA = 1e-4
TR_SHRINK = 0.25
TR_GROW = 2.0
TR_LOW = 0.01
TR_HIGH = 0.99
TR_INITIAL_RADIUS = 1.0


@dataclass(frozen=True)
class SearchResult:
    """서치 출력: 다음 α와 직전 제안 수락 여부"""
    alpha: float
    accept: bool

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha는 양의 유한값이어야 합니다: {self.alpha}")


@dataclass(frozen=True)
class ArmijoState:
    step_size: float = 1.0
    satisfied: bool = True


@dataclass(frozen=True)
class TrustRegionState:
    radius: float = TR_INITIAL_RADIUS
    ratio: float = float("nan")


def learning_rate(cfg_alpha: float, info: FnInfo = None, state=None) -> SearchResult:
    """고정 학습률: 항상 (cfg_alpha, 수락)"""
    return SearchResult(alpha=cfg_alpha, accept=True)


def armijo_condition(info_new: FnInfo, info_old: FnInfo, step: np.ndarray, eta: float) -> bool:
    """f(x+δ) ≤ f(x) + η·δᵀ∇f(x)"""
    f_new = info_new.value
    if f_new is None or not math.isfinite(f_new):
        return False
    slope = float(np.dot(step, info_old.gradient()))
    return bool(f_new <= info_old.value + eta * slope)


def armijo_step(info_new: FnInfo, info_old: FnInfo, proposed_step: np.ndarray, state: ArmijoState,
                c: float = ARMIJO_C, eta: float = ARMIJO_ETA) -> Tuple[SearchResult, ArmijoState]:
    """
    백트래킹 Armijo

    조건을 만족하면 수락하고 α를 1로 되돌리고, 아니면 거절하고 α ← c·α.
    """
    satisfied = armijo_condition(info_new, info_old, proposed_step, eta)
    alpha = 1.0 if satisfied else c * state.step_size
    return SearchResult(alpha=alpha, accept=satisfied), ArmijoState(step_size=alpha, satisfied=satisfied)


def _trust_region_update(f_old: float, f_new: float, predicted_reduction: float,
                         state: TrustRegionState, c1: float, c2: float,
                         C1: float, C2: float) -> Tuple[SearchResult, TrustRegionState]:
    if predicted_reduction <= 0 or f_new is None or not math.isfinite(f_new):
        radius = c1 * state.radius
        return SearchResult(alpha=radius, accept=False), TrustRegionState(radius=radius, ratio=float("nan"))

    ratio = (f_old - f_new) / predicted_reduction
    if ratio > C2:
        radius = c2 * state.radius
    elif ratio > C1:
        radius = state.radius
    else:
        radius = c1 * state.radius
    return SearchResult(alpha=radius, accept=bool(ratio > C1)), TrustRegionState(radius=radius, ratio=ratio)


def classical_trust_region_step(info_new: FnInfo, info_old: FnInfo, proposed_step: np.ndarray,
                                predicted_reduction: float, state: TrustRegionState,
                                c1: float = TR_SHRINK, c2: float = TR_GROW,
                                C1: float = TR_LOW, C2: float = TR_HIGH) -> Tuple[SearchResult, TrustRegionState]:
    """
    2차 모델 신뢰 영역 반경 갱신

    ρ = (f(x) − f(x+δ)) / (m(0) − m(δ)). ρ > C2 이면 반경 ×c2, C1 < ρ ≤ C2 이면 유지,
    그 외 ×c1. ρ > C1 일 때만 수락합니다. 모델 감소량이 0 이하면 거절합니다.
    """
    return _trust_region_update(info_old.value, info_new.value, predicted_reduction, state, c1, c2, C1, C2)


def linear_trust_region_step(info_new: FnInfo, info_old: FnInfo, proposed_step: np.ndarray,
                             state: TrustRegionState, c1: float = TR_SHRINK, c2: float = TR_GROW,
                             C1: float = TR_LOW, C2: float = TR_HIGH) -> Tuple[SearchResult, TrustRegionState]:
    """1차 모델(−∇fᵀδ) 신뢰 영역 반경 갱신"""
    predicted = info_old.predicted_reduction(proposed_step, linear=True)
    return _trust_region_update(info_old.value, info_new.value, predicted, state, c1, c2, C1, C2)


def _check_trust_region_constants(c1, c2, C1, C2, radius):
    if not (0 < c1 < 1 < c2):
        raise ConfigurationError(f"0 < c1 < 1 < c2 이어야 합니다: c1={c1}, c2={c2}")
    if not (0 < C1 < C2 < 1):
        raise ConfigurationError(f"0 < C1 < C2 < 1 이어야 합니다: C1={C1}, C2={C2}")
    if not radius > 0:
        raise ConfigurationError(f"초기 반경은 양수여야 합니다: {radius}")


@dataclass(frozen=True)
class LearningRate:
    """고정 학습률 서치"""
    alpha: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ConfigurationError(f"학습률은 양의 유한값이어야 합니다: {self.alpha}")

    def init(self):
        return None

    def initial_alpha(self, state) -> float:
        return self.alpha

    def step(self, info_new: FnInfo, info_old: FnInfo, proposed_step: np.ndarray, state):
        return learning_rate(self.alpha, info_new, state), state


@dataclass(frozen=True)
class BacktrackingArmijo:
    """백트래킹 Armijo 라인 서치 (c: 축소 비율, eta: 충분 감소 계수)"""
    c: float = ARMIJO_C
    eta: float = ARMIJO_ETA

    def __post_init__(self):
        if not 0 < self.c <= 1:
            raise ConfigurationError(f"c는 (0, 1] 범위여야 합니다: {self.c}")
        if not 0 < self.eta < 1:
            raise ConfigurationError(f"eta는 (0, 1) 범위여야 합니다: {self.eta}")

    def init(self) -> ArmijoState:
        return ArmijoState()

    def initial_alpha(self, state: ArmijoState) -> float:
        return state.step_size

    def step(self, info_new: FnInfo, info_old: FnInfo, proposed_step: np.ndarray, state: ArmijoState):
        return armijo_step(info_new, info_old, proposed_step, state, self.c, self.eta)


@dataclass(frozen=True)
class ClassicalTrustRegion:
    """
    2차 모델 신뢰 영역

    α는 반경입니다. 정보에 헤시안이나 잔차 모델이 없으면 1차 모델로 예측합니다.
    """
    c1: float = TR_SHRINK
    c2: float = TR_GROW
    C1: float = TR_LOW
    C2: float = TR_HIGH
    initial_radius: float = TR_INITIAL_RADIUS

    def __post_init__(self):
        _check_trust_region_constants(self.c1, self.c2, self.C1, self.C2, self.initial_radius)

    def init(self) -> TrustRegionState:
        return TrustRegionState(radius=self.initial_radius)

    def initial_alpha(self, state: TrustRegionState) -> float:
        return state.radius

    def step(self, info_new: FnInfo, info_old: FnInfo, proposed_step: np.ndarray, state: TrustRegionState):
        predicted = info_old.predicted_reduction(proposed_step, linear=not info_old.has_second_order)
        return classical_trust_region_step(info_new, info_old, proposed_step, predicted, state,
                                           self.c1, self.c2, self.C1, self.C2)


@dataclass(frozen=True)
class LinearTrustRegion(ClassicalTrustRegion):
    """1차 모델 신뢰 영역 (헤시안 항 없음)"""

    def step(self, info_new: FnInfo, info_old: FnInfo, proposed_step: np.ndarray, state: TrustRegionState):
        return linear_trust_region_step(info_new, info_old, proposed_step, state,
                                        self.c1, self.c2, self.C1, self.C2)


@dataclass(frozen=True)
class InterpolationState:
    step_size: float = 1.0
    interpolated: bool = False


@dataclass(frozen=True)
class QuadraticInterpolation:
    """
    2차 보간 라인 서치

    첫 제안의 f(x), δᵀ∇f(x), f(x+δ) 로 φ(t) = f(x + tδ) 의 포물선을 만들고 그 최소점
    t* 로 다시 제안합니다. 2차 함수에서는 정확한 라인 서치가 됩니다.
    보간된 제안은 f 가 줄면 수락하고, 보간할 수 없거나 f 가 줄지 않으면
    백트래킹 Armijo 로 돌아갑니다.
    """
    tol: float = 1e-6
    c: float = ARMIJO_C
    eta: float = ARMIJO_ETA

    def __post_init__(self):
        if not self.tol >= 0:
            raise ConfigurationError(f"tol은 0 이상이어야 합니다: {self.tol}")
        if not 0 < self.c < 1:
            raise ConfigurationError(f"c는 (0, 1) 범위여야 합니다: {self.c}")

    def init(self) -> InterpolationState:
        return InterpolationState()

    def initial_alpha(self, state: InterpolationState) -> float:
        return state.step_size

    def _backtrack(self, info_new: FnInfo, info_old: FnInfo, proposed_step: np.ndarray,
                   state: InterpolationState):
        if armijo_condition(info_new, info_old, proposed_step, self.eta):
            return SearchResult(alpha=1.0, accept=True), InterpolationState()
        alpha = self.c * state.step_size
        return SearchResult(alpha=alpha, accept=False), InterpolationState(step_size=alpha)

    def step(self, info_new: FnInfo, info_old: FnInfo, proposed_step: np.ndarray, state: InterpolationState):
        f_new = info_new.value
        if f_new is None or not math.isfinite(f_new):
            alpha = self.c * state.step_size
            return SearchResult(alpha=alpha, accept=False), InterpolationState(step_size=alpha)

        if state.interpolated:
            if f_new <= info_old.value:
                return SearchResult(alpha=1.0, accept=True), InterpolationState()
            return self._backtrack(info_new, info_old, proposed_step, state)

        slope = float(np.dot(proposed_step, info_old.gradient()))
        curvature = 2.0 * (f_new - info_old.value - slope)
        if not (slope < 0 and curvature > 0):
            return self._backtrack(info_new, info_old, proposed_step, state)

        t = -slope / curvature
        if abs(t - 1.0) <= self.tol:
            return SearchResult(alpha=1.0, accept=True), InterpolationState()
        alpha = t * state.step_size
        if not math.isfinite(alpha):
            return self._backtrack(info_new, info_old, proposed_step, state)
        logger.debug(f"2차 보간 스텝 배율 t={t:.6e}")
        return SearchResult(alpha=alpha, accept=False), InterpolationState(step_size=alpha, interpolated=True)
