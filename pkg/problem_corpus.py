"""
테스트 문제 모음
벤치마크와 테스트에서 쓰는 소규모 표준 문제(최소 제곱 잔차형, 스칼라 최소화,
근 찾기, 고정점)를 정규 초기점과 알려진 최적값과 함께 제공합니다.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from core import Problem, ProblemKind, flatten_output

# 로거 설정
logger = logging.getLogger(__name__)

REGRESSION_WEIGHTS = np.array([3.14, -7.0, 2.71])
REGRESSION_SAMPLES = 99
REGRESSION_NOISE = 0.1
REGRESSION_SEED = 0

DOTTIE_NUMBER = 0.7390851332151607


@dataclass(frozen=True)
class TestProblem:
    """
    테스트 문제 정의

    fn(x, args) 는 kind 에 맞는 출력(스칼라 또는 잔차)을 반환합니다.
    parameterised=True 이면 args 가 민감도 계산용 매개변수 벡터 θ 입니다.
    """
    __test__ = False

    name: str
    kind: ProblemKind
    fn: Callable
    x0: np.ndarray
    f_star: Optional[float] = None
    x_star: Optional[np.ndarray] = None
    args: Any = None
    grad: Optional[Callable] = None
    jac: Optional[Callable] = None
    hess: Optional[Callable] = None
    parameterised: bool = False
    tags: tuple = field(default_factory=tuple)

    @property
    def dim(self) -> int:
        return int(np.size(self.x0))

    def output(self, x, args=None):
        return self.fn(np.asarray(x, dtype=float), self.args if args is None else args)

    def objective(self, x, args=None) -> float:
        """최소화 지표 (잔차형 문제는 Σrᵢ², 고정점은 Σ(f(x)−x)²)"""
        x = np.asarray(x, dtype=float)
        out = self.output(x, args)
        if self.kind == ProblemKind.MINIMISE:
            return float(out)
        r = flatten_output(out)
        if self.kind == ProblemKind.FIXED_POINT:
            r = r - x
        return float(np.dot(r, r))

    def as_problem(self, args=None) -> Problem:
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        dim_out = 1 if self.kind == ProblemKind.MINIMISE else flatten_output(self.output(x0, args)).size
        return Problem(self.kind, self.fn, self.args if args is None else args, x0.size, dim_out,
                       grad=self.grad, jac=self.jac, hess=self.hess, name=self.name)

    def solve(self, solver, args=None, throw: bool = False):
        """문제 유형에 맞는 진입점으로 풀이"""
        import api

        args = self.args if args is None else args
        if self.kind == ProblemKind.MINIMISE:
            return api.minimise(self.fn, solver, self.x0, args, grad=self.grad, hess=self.hess, throw=throw)
        entry = {
            ProblemKind.LEAST_SQUARES: api.least_squares,
            ProblemKind.ROOT_FIND: api.root_find,
            ProblemKind.FIXED_POINT: api.fixed_point,
        }[self.kind]
        return entry(self.fn, solver, self.x0, args, jac=self.jac, throw=throw)


# 최소 제곱 잔차

def rosenbrock_residual(y, scaling):
    """스케일된 로젠브록 잔차 (두 블록의 튜플)"""
    return scaling * (y[1:] - y[:-1] ** 2), 1.0 - y[:-1]


def rosenbrock_jacobian(y, scaling):
    n = y.size
    top = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    top[idx, idx] = -2.0 * scaling * y[:-1]
    top[idx, idx + 1] = scaling
    bottom = np.zeros((n - 1, n))
    bottom[idx, idx] = -1.0
    return np.vstack([top, bottom])


def extended_rosenbrock(x, args=None):
    r = np.empty_like(x)
    r[0::2] = 10.0 * (x[1::2] - x[0::2] ** 2)
    r[1::2] = 1.0 - x[0::2]
    return r


def _biggs_times():
    return 0.1 * np.arange(1, 14)


def biggs_exp6(x, args=None):
    t = _biggs_times()
    y = np.exp(-t) - 5.0 * np.exp(-10.0 * t) + 3.0 * np.exp(-4.0 * t)
    return x[2] * np.exp(-t * x[0]) - x[3] * np.exp(-t * x[1]) + x[5] * np.exp(-t * x[4]) - y


def biggs_exp6_jacobian(x, args=None):
    t = _biggs_times()
    e1, e2, e5 = np.exp(-t * x[0]), np.exp(-t * x[1]), np.exp(-t * x[4])
    return np.column_stack([
        -t * x[2] * e1,
        t * x[3] * e2,
        e1,
        -e2,
        -t * x[5] * e5,
        e5,
    ])


def regression_data(seed: int = REGRESSION_SEED):
    """가중치 (3.14, −7, 2.71), 표본 99개, 노이즈 σ=0.1 인 합성 선형 회귀 데이터"""
    rng = np.random.default_rng(seed)
    noise = REGRESSION_NOISE * rng.normal(size=REGRESSION_SAMPLES)
    xs = rng.normal(size=(3, REGRESSION_SAMPLES))
    ys = REGRESSION_WEIGHTS @ xs + noise
    return xs, ys


def regression_residual(w, data):
    xs, ys = data
    return w @ xs - ys


def regression_jacobian(w, data):
    xs, _ = data
    return xs.T


def beale(x, args=None):
    return np.array([
        1.5 - x[0] * (1.0 - x[1]),
        2.25 - x[0] * (1.0 - x[1] ** 2),
        2.625 - x[0] * (1.0 - x[1] ** 3),
    ])


def powell_singular(x, args=None):
    return np.array([
        x[0] + 10.0 * x[1],
        np.sqrt(5.0) * (x[2] - x[3]),
        (x[1] - 2.0 * x[2]) ** 2,
        np.sqrt(10.0) * (x[0] - x[3]) ** 2,
    ])


def wood(x, args=None):
    return np.array([
        10.0 * (x[1] - x[0] ** 2),
        1.0 - x[0],
        np.sqrt(90.0) * (x[3] - x[2] ** 2),
        1.0 - x[2],
        np.sqrt(10.0) * (x[1] + x[3] - 2.0),
        (x[1] - x[3]) / np.sqrt(10.0),
    ])


def box_3d(x, args=None):
    t = 0.1 * np.arange(1, 11)
    return np.exp(-t * x[0]) - np.exp(-t * x[1]) - x[2] * (np.exp(-t) - np.exp(-10.0 * t))


def brown_badly_scaled(x, args=None):
    return np.array([x[0] - 1e6, x[1] - 2e-6, x[0] * x[1] - 2.0])


def helical_valley(x, args=None):
    if x[0] > 0:
        theta = np.arctan(x[1] / x[0]) / (2.0 * np.pi)
    elif x[0] < 0:
        theta = np.arctan(x[1] / x[0]) / (2.0 * np.pi) + 0.5
    else:
        theta = 0.25 * np.sign(x[1])
    return np.array([
        10.0 * (x[2] - 10.0 * theta),
        10.0 * (np.hypot(x[0], x[1]) - 1.0),
        x[2],
    ])


def trigonometric(x, args=None):
    n = x.size
    c = np.cos(x)
    return n - c.sum() + np.arange(1, n + 1) * (1.0 - c) - np.sin(x)


def jennrich_sampson(x, args=None):
    i = np.arange(1, 11)
    return 2.0 * (1.0 + i) - np.exp(i * x[0]) - np.exp(i * x[1])


_BARD_Y = np.array([0.14, 0.18, 0.22, 0.25, 0.29, 0.32, 0.35, 0.39,
                    0.37, 0.58, 0.73, 0.96, 1.34, 2.10, 4.39])


def bard(x, args=None):
    u = np.arange(1, 16, dtype=float)
    v = 16.0 - u
    w = np.minimum(u, v)
    return _BARD_Y - (x[0] + u / (x[1] * v + x[2] * w))


def linear_full_rank(x, m):
    r = np.full(m, -(2.0 * x.sum() / m + 1.0))
    r[: x.size] += x
    return r


def brown_almost_linear(x, args=None):
    n = x.size
    r = x + x.sum() - (n + 1.0)
    r[-1] = np.prod(x) - 1.0
    return r


def cube(x, args=None):
    return np.array([x[0] - 1.0, 10.0 * (x[1] - x[0] ** 3)])


def exponential_fit(x, theta):
    """매개변수 θ 로 생성한 지수 곡선을 x 로 맞추는 잔차 (해에서 잔차 0)"""
    t = np.linspace(0.0, 1.0, 8)
    return x[0] * np.exp(x[1] * t) - theta[0] * np.exp(theta[1] * t)


def scaled_line_fit(x, theta):
    """x·θ₀ ≈ 1, x ≈ θ₁ 을 동시에 맞추는 잔차 (해에서 잔차가 0 이 아님)"""
    return np.array([x[0] * theta[0] - 1.0, x[0] - theta[1]])


def ill_conditioned_system(condition: float = 1e10, seed: int = 7):
    """특이값이 1 에서 1/condition 까지 분포하는 20×5 선형 최소 제곱 (해에서 잔차 0)"""
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.normal(size=(20, 5)))
    V, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    A = U @ np.diag(np.logspace(0.0, -np.log10(condition), 5)) @ V.T
    x_true = np.ones(5)
    return A, A @ x_true, x_true


def linear_residual(x, data):
    A, b = data
    return A @ x - b


def linear_jacobian(x, data):
    A, _ = data
    return A


# 스칼라 최소화

def rosenbrock_scalar(x, args=None):
    return float(100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2)


def rosenbrock_scalar_grad(x, args=None):
    return np.array([
        -400.0 * x[0] * (x[1] - x[0] ** 2) - 2.0 * (1.0 - x[0]),
        200.0 * (x[1] - x[0] ** 2),
    ])


_QUADRATIC_MATRIX = np.array([
    [4.0, 1.0, 0.0, 0.0, 0.5],
    [1.0, 3.0, 0.5, 0.0, 0.0],
    [0.0, 0.5, 2.0, 0.3, 0.0],
    [0.0, 0.0, 0.3, 1.5, 0.2],
    [0.5, 0.0, 0.0, 0.2, 1.0],
])


def convex_quadratic(x, theta):
    d = x - theta
    return float(0.5 * d @ _QUADRATIC_MATRIX @ d)


def convex_quadratic_grad(x, theta):
    return _QUADRATIC_MATRIX @ (x - theta)


def convex_quadratic_hess(x, theta):
    return _QUADRATIC_MATRIX.copy()


# 근 찾기 / 고정점

def cube_root(x, theta):
    return x ** 3 - theta[0]


def cube_root_jacobian(x, theta):
    return np.diag(3.0 * x ** 2)


def square_root_system(x, theta):
    return np.array([x[0] ** 2 - theta[0], x[1] - theta[1]])


def cosine_map(x, theta):
    return np.cos(theta[0] * x)


def affine_map(x, theta):
    return theta[0] * x + 1.0


def builtin_corpus() -> List[TestProblem]:
    """기본 문제 모음"""
    LS = ProblemKind.LEAST_SQUARES
    xs, ys = regression_data()
    w_star = np.linalg.lstsq(xs.T, ys, rcond=None)[0]
    reg_r = w_star @ xs - ys
    A_ill, b_ill, x_ill = ill_conditioned_system()
    m_full = 45

    problems = [
        TestProblem("rosenbrock_2", LS, lambda x, s: rosenbrock_residual(x, s), np.array([-1.2, 1.0]),
                    0.0, np.ones(2), args=10.0, jac=lambda x, s: rosenbrock_jacobian(x, s)),
        TestProblem("rosenbrock_100", LS, lambda x, s: rosenbrock_residual(x, s), np.zeros(100),
                    0.0, np.ones(100), args=10.0, jac=lambda x, s: rosenbrock_jacobian(x, s),
                    tags=("large",)),
        TestProblem("extended_rosenbrock_10", LS, extended_rosenbrock, np.tile([-1.2, 1.0], 5),
                    0.0, np.ones(10)),
        TestProblem("extended_rosenbrock_20", LS, extended_rosenbrock, np.tile([-1.2, 1.0], 10),
                    0.0, np.ones(20)),
        TestProblem("biggs_exp6", LS, biggs_exp6, np.array([1.0, 2.0, 1.0, 1.0, 1.0, 1.0]),
                    0.0, np.array([1.0, 10.0, 1.0, 5.0, 4.0, 3.0]), jac=biggs_exp6_jacobian),
        TestProblem("linear_regression", LS, regression_residual, np.zeros(3),
                    float(reg_r @ reg_r), w_star, args=(xs, ys), jac=regression_jacobian),
        TestProblem("beale", LS, beale, np.array([1.0, 1.0]), 0.0, np.array([3.0, 0.5])),
        TestProblem("powell_singular", LS, powell_singular, np.array([3.0, -1.0, 0.0, 1.0]),
                    0.0, np.zeros(4)),
        TestProblem("wood", LS, wood, np.array([-3.0, -1.0, -3.0, -1.0]), 0.0, np.ones(4)),
        TestProblem("box_3d", LS, box_3d, np.array([0.0, 10.0, 20.0]), 0.0, np.array([1.0, 10.0, 1.0])),
        TestProblem("brown_badly_scaled", LS, brown_badly_scaled, np.array([1.0, 1.0]),
                    0.0, np.array([1e6, 2e-6])),
        TestProblem("helical_valley", LS, helical_valley, np.array([-1.0, 0.0, 0.0]),
                    0.0, np.array([1.0, 0.0, 0.0])),
        TestProblem("trigonometric_5", LS, trigonometric, np.full(5, 0.2), 0.0),
        TestProblem("jennrich_sampson", LS, jennrich_sampson, np.array([0.3, 0.4]),
                    124.3621823556148, np.full(2, 0.2578252135686162)),
        TestProblem("bard", LS, bard, np.ones(3), 0.00821487730657897,
                    np.array([0.08241056005476516, 1.1330360796060677, 2.3436951913379658])),
        TestProblem("linear_full_rank", LS, linear_full_rank, np.ones(9), float(m_full - 9),
                    -np.ones(9), args=m_full),
        TestProblem("brown_almost_linear", LS, brown_almost_linear, np.full(10, 0.5), 0.0, np.ones(10)),
        TestProblem("cube", LS, cube, np.array([-1.2, 1.0]), 0.0, np.ones(2)),
        TestProblem("ill_conditioned_linear", LS, linear_residual, np.zeros(5), 0.0, x_ill,
                    args=(A_ill, b_ill), jac=linear_jacobian, tags=("ill-conditioned",)),
        TestProblem("exponential_fit", LS, exponential_fit, np.array([1.0, 0.0]), 0.0,
                    np.array([2.0, -0.5]), args=np.array([2.0, -0.5]), parameterised=True),
        TestProblem("scaled_line_fit", LS, scaled_line_fit, np.array([0.0]), 2.5, np.array([0.5]),
                    args=np.array([3.0, 2.0]), parameterised=True),
        TestProblem("rosenbrock_scalar", ProblemKind.MINIMISE, rosenbrock_scalar, np.array([-1.2, 1.0]),
                    0.0, np.ones(2), grad=rosenbrock_scalar_grad),
        TestProblem("convex_quadratic_5", ProblemKind.MINIMISE, convex_quadratic, np.zeros(5), 0.0,
                    np.array([1.0, -2.0, 0.5, 3.0, -1.0]), args=np.array([1.0, -2.0, 0.5, 3.0, -1.0]),
                    grad=convex_quadratic_grad, hess=convex_quadratic_hess, parameterised=True),
        TestProblem("cube_root", ProblemKind.ROOT_FIND, cube_root, np.array([3.0]), 0.0, np.array([2.0]),
                    args=np.array([8.0]), jac=cube_root_jacobian, parameterised=True),
        TestProblem("square_root_system", ProblemKind.ROOT_FIND, square_root_system, np.array([1.0, 0.0]),
                    0.0, np.array([np.sqrt(2.0), 1.0]), args=np.array([2.0, 1.0]), parameterised=True),
        TestProblem("cosine_fixed_point", ProblemKind.FIXED_POINT, cosine_map, np.array([1.0]), 0.0,
                    np.array([DOTTIE_NUMBER]), args=np.array([1.0]), parameterised=True),
        TestProblem("affine_fixed_point", ProblemKind.FIXED_POINT, affine_map, np.array([0.0]), 0.0,
                    np.array([2.0]), args=np.array([0.5]), parameterised=True),
    ]
    return problems


def corpus_by_name() -> Dict[str, TestProblem]:
    return {p.name: p for p in builtin_corpus()}


def get_problem(name: str) -> TestProblem:
    problems = corpus_by_name()
    if name not in problems:
        raise KeyError(f"알 수 없는 테스트 문제: {name}")
    return problems[name]


def select_problems(selection: str) -> List[TestProblem]:
    """'all', 'least-squares', 또는 쉼표로 구분한 이름 목록으로 문제 선택"""
    corpus = builtin_corpus()
    selection = selection.strip()
    if selection == "all":
        return corpus
    if selection == "least-squares":
        return [p for p in corpus if p.kind == ProblemKind.LEAST_SQUARES]
    by_name = {p.name: p for p in corpus}
    selected = []
    for name in (s.strip() for s in selection.split(",") if s.strip()):
        if name not in by_name:
            raise KeyError(f"알 수 없는 테스트 문제: {name}")
        selected.append(by_name[name])
    return selected
