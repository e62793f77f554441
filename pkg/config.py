"""
환경 변수 설정 모듈
.env 파일에서 환경 변수를 로드하고 솔버/벤치마크 기본값을 제공합니다.
"""

import os
from pathlib import Path
from typing import Any
import logging

# 로거 설정
logger = logging.getLogger(__name__)

class Config:
    """환경 설정 클래스"""

    def __init__(self, env_path: str = '.env'):
        self.env_path = Path(env_path)
        self.load_env_file()

    def load_env_file(self):
        """환경 변수 파일 로드"""
        if self.env_path.exists():
            try:
                with open(self.env_path, 'r', encoding='utf-8') as f:
                    for line in f:
                        line = line.strip()
                        if line and not line.startswith('#') and '=' in line:
                            key, value = line.split('=', 1)
                            os.environ.setdefault(key.strip(), value.strip())
                logger.info(f"환경 변수 파일 로드 완료: {self.env_path}")
            except Exception as e:
                logger.warning(f"환경 변수 파일 로드 실패: {e}")
        else:
            logger.debug("환경 변수 파일(.env)이 없습니다. 기본값을 사용합니다.")

    def get_env(self, key: str, default: Any = None, cast_type: type = str) -> Any:
        """환경 변수 값 가져오기 (타입 변환 지원)"""
        value = os.getenv(key, default)

        if value is None:
            return default

        if cast_type == bool:
            return str(value).lower() in ('true', '1', 'yes', 'on')
        elif cast_type == int:
            try:
                return int(value)
            except ValueError:
                logger.warning(f"환경 변수 {key}의 값 '{value}'를 int로 변환할 수 없습니다. 기본값 {default} 사용")
                return default
        elif cast_type == float:
            try:
                return float(value)
            except ValueError:
                logger.warning(f"환경 변수 {key}의 값 '{value}'를 float로 변환할 수 없습니다. 기본값 {default} 사용")
                return default
        else:
            return str(value)

    # 종료 조건 기본값
    @property
    def DEFAULT_RTOL(self) -> float:
        return self.get_env('DEFAULT_RTOL', 1e-5, float)

    @property
    def DEFAULT_ATOL(self) -> float:
        return self.get_env('DEFAULT_ATOL', 1e-6, float)

    @property
    def DEFAULT_MAX_ITERS(self) -> int:
        return self.get_env('DEFAULT_MAX_ITERS', 256, int)

    @property
    def ALPHA_FLOOR(self) -> float:
        return self.get_env('ALPHA_FLOOR', 1e-12, float)

    # 유한 차분 설정
    @property
    def FD_STEP(self) -> float:
        return self.get_env('FD_STEP', 1e-6, float)

    @property
    def FD_HESSIAN_STEP(self) -> float:
        return self.get_env('FD_HESSIAN_STEP', 1e-5, float)

    # 벤치마크 설정
    @property
    def BENCH_MAX_ITERS(self) -> int:
        return self.get_env('BENCH_MAX_ITERS', 2000, int)

    @property
    def BENCH_REPEATS(self) -> int:
        return self.get_env('BENCH_REPEATS', 10, int)

    @property
    def BENCH_GATE_ATOL(self) -> float:
        return self.get_env('BENCH_GATE_ATOL', 1e-6, float)

    @property
    def BENCH_GATE_RTOL(self) -> float:
        return self.get_env('BENCH_GATE_RTOL', 1e-5, float)

    # 로깅 설정
    @property
    def LOG_LEVEL(self) -> str:
        return self.get_env('LOG_LEVEL', 'INFO').upper()

    @property
    def LOG_DIR(self) -> str:
        return self.get_env('LOG_DIR', 'logs')

    @property
    def LOG_FILE(self) -> str:
        return self.get_env('LOG_FILE', 'optimisation.log')

    @property
    def LOG_MAX_SIZE(self) -> int:
        return self.get_env('LOG_MAX_SIZE', 10485760, int)  # 10MB

    @property
    def LOG_BACKUP_COUNT(self) -> int:
        return self.get_env('LOG_BACKUP_COUNT', 5, int)

    @property
    def LOG_CONSOLE_ENABLED(self) -> bool:
        return self.get_env('LOG_CONSOLE_ENABLED', True, bool)

    @property
    def LOG_FILE_ENABLED(self) -> bool:
        return self.get_env('LOG_FILE_ENABLED', True, bool)

    # 개발/디버그 설정
    @property
    def DEBUG_MODE(self) -> bool:
        return self.get_env('DEBUG_MODE', False, bool)

    def get_log_level_int(self) -> int:
        """로그 레벨을 정수로 변환"""
        levels = {
            'DEBUG': logging.DEBUG,
            'INFO': logging.INFO,
            'WARNING': logging.WARNING,
            'ERROR': logging.ERROR,
            'CRITICAL': logging.CRITICAL
        }
        if self.DEBUG_MODE:
            return logging.DEBUG
        return levels.get(self.LOG_LEVEL, logging.INFO)

    def validate_config(self) -> bool:
        """설정값 유효성 검사"""
        errors = []

        # 허용 오차 검사
        if self.DEFAULT_RTOL < 0 or self.DEFAULT_ATOL < 0:
            errors.append(f"허용 오차는 음수일 수 없습니다: rtol={self.DEFAULT_RTOL}, atol={self.DEFAULT_ATOL}")

        if self.DEFAULT_RTOL == 0 and self.DEFAULT_ATOL == 0:
            errors.append("DEFAULT_RTOL과 DEFAULT_ATOL 중 하나는 양수여야 합니다")

        # 반복 횟수 검사
        if self.DEFAULT_MAX_ITERS < 1:
            errors.append(f"DEFAULT_MAX_ITERS는 1 이상이어야 합니다: {self.DEFAULT_MAX_ITERS}")

        if self.BENCH_MAX_ITERS < 1:
            errors.append(f"BENCH_MAX_ITERS는 1 이상이어야 합니다: {self.BENCH_MAX_ITERS}")

        if self.BENCH_REPEATS < 1:
            errors.append(f"BENCH_REPEATS는 1 이상이어야 합니다: {self.BENCH_REPEATS}")

        # 유한 차분 스텝 검사
        if self.FD_STEP <= 0 or self.FD_HESSIAN_STEP <= 0:
            errors.append(f"유한 차분 스텝은 양수여야 합니다: {self.FD_STEP}, {self.FD_HESSIAN_STEP}")

        if self.ALPHA_FLOOR <= 0:
            errors.append(f"ALPHA_FLOOR는 양수여야 합니다: {self.ALPHA_FLOOR}")

        # 로그 파일 크기 검사
        if self.LOG_MAX_SIZE <= 0:
            errors.append(f"LOG_MAX_SIZE는 양수여야 합니다: {self.LOG_MAX_SIZE}")

        if errors:
            for error in errors:
                logger.error(f"설정 오류: {error}")
            return False

        logger.info("모든 설정값이 유효합니다")
        return True

    def print_config(self):
        """현재 설정값 출력 (디버그용)"""
        logger.info("=== 현재 환경 설정 ===")
        logger.info(f"허용 오차: rtol={self.DEFAULT_RTOL}, atol={self.DEFAULT_ATOL}")
        logger.info(f"최대 반복: {self.DEFAULT_MAX_ITERS} (벤치마크 {self.BENCH_MAX_ITERS})")
        logger.info(f"벤치마크 반복 측정: {self.BENCH_REPEATS}회")
        logger.info(f"유한 차분 스텝: {self.FD_STEP} / 헤시안 {self.FD_HESSIAN_STEP}")
        logger.info(f"로그 레벨: {self.LOG_LEVEL}")
        logger.info(f"디버그 모드: {self.DEBUG_MODE}")
        logger.info("=====================")

# 전역 설정 인스턴스
config = Config()
