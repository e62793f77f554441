"""
공용 테스트 픽스처
"""

import numpy as np
import pytest

from core import FnInfo

# 속성 테스트 케이스 수
PROPERTY_CASES = 200


class CountingFn:
    """호출 횟수를 세는 목적 함수 래퍼"""

    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, x, args=None):
        self.calls += 1
        return self.fn(x, args)


def random_spd(rng, n, shift=1.0):
    G = rng.normal(size=(n, n))
    return G.T @ G + shift * np.eye(n)


def quadratic_info(H, g, x=None):
    """f(x) = gᵀx + ½xᵀHx 의 원점 정보"""
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    return FnInfo(value=0.0, grad=g, hessian=H)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def counting():
    return CountingFn


@pytest.fixture
def sphere():
    """f(x) = ‖x‖²"""
    def fn(x, args=None):
        return float(np.dot(x, x))

    def grad(x, args=None):
        return 2.0 * np.asarray(x, dtype=float)

    return fn, grad


@pytest.fixture
def square_root_residual():
    """f(x) = (x₁² − 2, x₂ − 1)"""
    def fn(x, args=None):
        return np.array([x[0] ** 2 - 2.0, x[1] - 1.0])

    return fn


@pytest.fixture(autouse=True)
def _quiet_env(monkeypatch):
    monkeypatch.delenv("DEFAULT_RTOL", raising=False)
    monkeypatch.delenv("DEFAULT_ATOL", raising=False)
    monkeypatch.delenv("DEFAULT_MAX_ITERS", raising=False)
    monkeypatch.delenv("ALPHA_FLOOR", raising=False)
