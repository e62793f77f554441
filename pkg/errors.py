"""
최적화 라이브러리 예외 정의
"""


class OptimisationError(Exception):
    """라이브러리 공통 예외"""


class ConfigurationError(OptimisationError, ValueError):
    """솔버/문제 구성이 잘못된 경우 (솔브 시작 전에 발생)"""


class LinearSolveFailed(OptimisationError):
    """선형 시스템 풀이 실패 (양의 정부호가 아니거나, 특이 행렬, 비유한 값)"""


class RootFindStalled(OptimisationError):
    """신뢰 영역 부분 문제의 1차원 근 찾기가 반복 한도를 넘은 경우"""


class NonFiniteError(OptimisationError):
    """목적 함수가 유한하지 않은 값을 반환한 경우"""


class SolveFailed(OptimisationError):
    """throw=True 로 호출된 솔브가 수렴하지 못한 경우"""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution
