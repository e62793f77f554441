"""
밀집 선형대수 커널
디센트가 사용하는 대칭 양의 정부호 풀이(Cholesky), 켤레 기울기 풀이,
열 피벗 QR 기반 최소 제곱 풀이를 제공합니다.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Any, Callable, Union

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, cg

from errors import LinearSolveFailed

# 로거 설정
logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-14
SYMMETRY_TOL = 1e-8
RANK_TOL = 1e-12

Operator = Union[np.ndarray, LinearOperator, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class Factorization:
    """재사용 가능한 행렬 분해 핸들"""
    kind: str
    data: Any
    size: int

    def solve(self, b: np.ndarray) -> np.ndarray:
        """분해를 이용해 Ax = b 풀이 (b는 벡터 또는 열 단위 행렬)"""
        b = np.asarray(b, dtype=float)
        if self.kind == "cholesky":
            x = scipy.linalg.cho_solve(self.data, b, check_finite=False)
        elif self.kind == "lu":
            x = scipy.linalg.lu_solve(self.data, b, check_finite=False)
        else:
            raise LinearSolveFailed(f"알 수 없는 분해 종류: {self.kind}")
        if not np.all(np.isfinite(x)):
            raise LinearSolveFailed("분해 풀이 결과에 유한하지 않은 값이 있습니다")
        return x


def _as_square(A: np.ndarray, name: str = "A") -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise LinearSolveFailed(f"{name}는 정방 행렬이어야 합니다: {A.shape}")
    if not np.all(np.isfinite(A)):
        raise LinearSolveFailed(f"{name}에 유한하지 않은 값이 있습니다")
    return A


def is_symmetric(A: np.ndarray, tol: float = SYMMETRY_TOL) -> bool:
    """최대 노름 기준 대칭성 검사 (행렬 크기에 상대적)"""
    A = np.asarray(A, dtype=float)
    scale = max(1.0, float(np.max(np.abs(A))) if A.size else 1.0)
    return bool(np.max(np.abs(A - A.T)) <= tol * scale)


def factor_cholesky(A: np.ndarray) -> Factorization:
    """대칭 양의 정부호 행렬의 Cholesky 분해"""
    A = _as_square(A)
    if not is_symmetric(A):
        raise LinearSolveFailed("Cholesky 분해에는 대칭 행렬이 필요합니다")
    A = 0.5 * (A + A.T)
    try:
        c, lower = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise LinearSolveFailed(f"양의 정부호 행렬이 아닙니다: {e}") from e
    pivots = np.diag(c) ** 2
    if np.any(pivots <= PIVOT_TOL):
        raise LinearSolveFailed(f"Cholesky 피벗이 너무 작습니다: {pivots.min():.3e}")
    return Factorization("cholesky", (c, lower), A.shape[0])


def solve_cholesky(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cholesky 분해로 Ax = b 풀이"""
    b = np.asarray(b, dtype=float)
    factor = factor_cholesky(A)
    if b.shape[0] != factor.size:
        raise LinearSolveFailed(f"우변 길이가 맞지 않습니다: {b.shape[0]} != {factor.size}")
    return factor.solve(b)


def factor_lu(A: np.ndarray) -> Factorization:
    """일반 정방 행렬의 LU 분해 (특이 행렬이면 LinearSolveFailed)"""
    A = _as_square(A)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    diag = np.abs(np.diag(lu))
    if diag.size == 0 or diag.max() == 0.0 or diag.min() <= PIVOT_TOL * diag.max():
        raise LinearSolveFailed("특이 행렬입니다 (LU 피벗이 0에 가깝습니다)")
    return Factorization("lu", (lu, piv), A.shape[0])


def solve_cg(A: Operator, b: np.ndarray, tol: float = 1e-10, max_iter: int = None,
             return_info: bool = False):
    """
    켤레 기울기법으로 SPD 시스템 Ax = b 풀이 (전처리 없음)

    A는 행렬, LinearOperator, 또는 행렬-벡터 곱 함수일 수 있습니다.
    max_iter에 도달하면 경고 로그를 남기고 마지막 반복값을 반환합니다.
    """
    if tol <= 0:
        raise ValueError(f"tol은 양수여야 합니다: {tol}")
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if callable(A) and not isinstance(A, (np.ndarray, LinearOperator)):
        A = LinearOperator((n, n), matvec=A, dtype=float)
    if max_iter is None:
        max_iter = 10 * n

    iterations = 0

    def _count(_):
        nonlocal iterations
        iterations += 1

    x, status = cg(A, b, rtol=tol, atol=0.0, maxiter=max_iter, callback=_count)
    if status < 0 or not np.all(np.isfinite(x)):
        raise LinearSolveFailed(f"켤레 기울기 풀이 실패 (status={status})")

    converged = status == 0
    if not converged:
        logger.warning(f"켤레 기울기법이 {max_iter}회 안에 수렴하지 않았습니다")

    if return_info:
        return x, {"iterations": iterations, "converged": converged}
    return x


def solve_lstsq(A: np.ndarray, b: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """
    열 피벗 QR로 min ‖Ax − b‖₂ 의 최소 노름 해 계산

    랭크 부족은 |R_kk| ≤ rank_tol·|R_00| 인 열을 버려서 처리하고,
    남은 사다리꼴 블록을 한 번 더 QR 분해해 최소 노름 해를 얻습니다.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise LinearSolveFailed("최소 제곱 입력에 유한하지 않은 값이 있습니다")
    m, n = A.shape
    if b.shape[0] != m:
        raise LinearSolveFailed(f"우변 길이가 맞지 않습니다: {b.shape[0]} != {m}")

    Q, R, perm = scipy.linalg.qr(A, mode="economic", pivoting=True, check_finite=False)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return np.zeros(n)
    rank = int(np.sum(diag > rank_tol * diag[0]))

    c = Q[:, :rank].T @ b
    R1 = R[:rank, :]
    if rank == n:
        z = scipy.linalg.solve_triangular(R1, c, check_finite=False)
    else:
        # R1 = R2ᵀ Q2ᵀ 로 분해하면 z = Q2 w 가 최소 노름 해
        Q2, R2 = scipy.linalg.qr(R1.T, mode="economic", check_finite=False)
        w = scipy.linalg.solve_triangular(R2, c, trans="T", check_finite=False)
        z = Q2 @ w

    x = np.empty(n)
    x[perm] = z
    return x


def solve_augmented_lstsq(A: np.ndarray, b: np.ndarray, damping: float) -> np.ndarray:
    """[A; √λ I] x ≈ [b; 0] 최소 제곱 풀이 (정규 방정식의 조건수 제곱을 피함)"""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[1]
    stacked = np.vstack([A, np.sqrt(damping) * np.eye(n)])
    rhs = np.concatenate([np.asarray(b, dtype=float), np.zeros(n)])
    return solve_lstsq(stacked, rhs)
