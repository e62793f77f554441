import logging
import logging.handlers
import os
from datetime import datetime

import psutil

from config import config

def setup_logging(log_level=None, log_file=None):
    """로깅 시스템 설정"""

    # 환경 변수에서 설정값 가져오기
    if log_level is None:
        log_level = config.get_log_level_int()
    if log_file is None:
        log_file = config.LOG_FILE

    # 로그 포맷 설정
    log_format = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s'
    )

    # 루트 로거 설정
    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    # 기존 핸들러 제거
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    # 콘솔 핸들러 설정
    if config.LOG_CONSOLE_ENABLED:
        console_handler = logging.StreamHandler()
        console_handler.setLevel(log_level)
        console_handler.setFormatter(log_format)
        root_logger.addHandler(console_handler)

    # 파일 핸들러 설정 (로테이션 지원)
    log_file_path = None
    if config.LOG_FILE_ENABLED:
        log_dir = config.LOG_DIR
        if not os.path.exists(log_dir):
            os.makedirs(log_dir)
        log_file_path = os.path.join(log_dir, log_file)

        file_handler = logging.handlers.RotatingFileHandler(
            log_file_path,
            maxBytes=config.LOG_MAX_SIZE,
            backupCount=config.LOG_BACKUP_COUNT,
            encoding='utf-8'
        )
        file_handler.setLevel(log_level)
        file_handler.setFormatter(log_format)
        root_logger.addHandler(file_handler)

    # matplotlib 로그 레벨 조정 (너무 상세한 로그 방지)
    logging.getLogger('matplotlib').setLevel(logging.WARNING)

    logging.info("로깅 시스템 초기화 완료")
    logging.info(f"로그 레벨: {logging.getLevelName(log_level)}")
    if log_file_path:
        logging.info(f"로그 파일: {log_file_path}")

    return root_logger

def log_bench_start(command):
    """벤치마크 CLI 시작 로그"""
    logger = logging.getLogger(__name__)
    logger.info("=" * 60)
    logger.info(f"최적화 벤치마크 시작: {command}")
    logger.info(f"시작 시간: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    logger.info("=" * 60)

def log_bench_shutdown(exit_code):
    """벤치마크 CLI 종료 로그"""
    logger = logging.getLogger(__name__)
    logger.info("=" * 60)
    logger.info(f"최적화 벤치마크 종료 (종료 코드 {exit_code})")
    logger.info(f"종료 시간: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    logger.info("=" * 60)

def log_solve_start(kind, solver_name, dim):
    """솔브 시작 로그"""
    logger = logging.getLogger(__name__)
    logger.debug(f"솔브 시작 - 문제 유형: {kind}, 솔버: {solver_name}, 차원: {dim}")

def log_solve_result(solver_name, result, stats):
    """솔브 결과 로그"""
    logger = logging.getLogger(__name__)
    logger.info(
        f"솔브 완료 - 솔버: {solver_name}, 결과: {result}, 반복: {stats.iterations}, "
        f"함수 평가: {stats.fn_evals}, 수락/거절: {stats.accepted_steps}/{stats.rejected_steps}"
    )

def log_step_rejected(iteration, alpha, fval):
    """스텝 거절 로그"""
    logger = logging.getLogger(__name__)
    logger.debug(f"스텝 거절 - 반복 {iteration}, alpha={alpha:.3e}, f={fval}")

def log_lowering(chain, solver_name):
    """문제 유형 변환 로그"""
    logger = logging.getLogger(__name__)
    path = " → ".join(str(kind) for kind in chain)
    logger.info(f"🔁 문제 변환: {path} (솔버: {solver_name})")

def log_error(error_type, error_message, context=None):
    """에러 로그"""
    logger = logging.getLogger(__name__)
    if context:
        logger.error(f"[{error_type}] {context}: {error_message}")
    else:
        logger.error(f"[{error_type}] {error_message}")

def log_benchmark_start(n_solvers, n_problems, repeats):
    """벤치마크 실행 시작 로그"""
    logger = logging.getLogger(__name__)
    logger.info(f"🏁 벤치마크 실행 - 솔버 {n_solvers}개, 문제 {n_problems}개, 반복 측정 {repeats}회")

def log_benchmark_record(record):
    """벤치마크 레코드 로그"""
    logger = logging.getLogger(__name__)
    status = "✅" if record.converged else "❌"
    logger.info(
        f"{status} {record.solver} / {record.problem}: 최소 실행시간 {record.min_runtime:.6f}s, "
        f"반복 {record.iterations}, f={record.final_f:.6e}"
    )

def log_profile_summary(curves):
    """성능 프로파일 요약 로그"""
    logger = logging.getLogger(__name__)
    logger.info("📈 성능 프로파일 요약:")
    for curve in curves:
        best = curve.rho[0] if len(curve.rho) else 0.0
        solved = curve.rho[-1] if len(curve.rho) else 0.0
        logger.info(f"  • {curve.solver}: ρ(1)={best:.3f}, ρ(τ_max)={solved:.3f}")

def log_dropped_problem(problem):
    """모든 솔버가 실패한 문제 로그"""
    logger = logging.getLogger(__name__)
    logger.warning(f"⚠️  모든 솔버가 실패한 문제를 프로파일에서 제외합니다: {problem}")

def log_system_info():
    """벤치마크 실행 환경 로그"""
    logger = logging.getLogger(__name__)
    memory = psutil.virtual_memory()
    logger.info(
        f"💓 실행 환경 - CPU: {psutil.cpu_count(logical=True)}코어, "
        f"CPU 사용률: {psutil.cpu_percent(interval=None):.1f}%, 메모리 사용률: {memory.percent:.1f}%"
    )
