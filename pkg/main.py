"""
최적화 벤치마크 메인 실행 파일
bench run: 솔버 × 문제 벤치마크 실행 후 결과 CSV 저장
bench profile: 결과 CSV 로 성능 프로파일 계산 (선택적으로 그래프 저장)
"""

import argparse
import logging
import sys

from config import config
from errors import ConfigurationError
from logger_config import log_bench_shutdown, log_bench_start, log_error, setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_SOLVER_FAILED = 3


def _split(value: str):
    return [item.strip() for item in value.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description="비선형 최적화 솔버 벤치마크")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="벤치마크 실행")
    run.add_argument("--solvers", default="bfgs,ncg,lm,gn", help="쉼표로 구분한 솔버 이름")
    run.add_argument("--problems", default="all", help="all, least-squares, 또는 쉼표로 구분한 문제 이름")
    run.add_argument("--repeats", type=int, default=config.BENCH_REPEATS)
    run.add_argument("--rtol", type=float, default=config.DEFAULT_RTOL)
    run.add_argument("--atol", type=float, default=config.DEFAULT_ATOL)
    run.add_argument("--max-iters", type=int, default=config.BENCH_MAX_ITERS)
    run.add_argument("--out", default="results.csv")

    profile = sub.add_parser("profile", help="성능 프로파일 계산")
    profile.add_argument("--in", dest="input", required=True)
    profile.add_argument("--metric", default="runtime", choices=["runtime"])
    profile.add_argument("--pair", default=None, help="두 솔버만 비교 (예: bfgs,lm)")
    profile.add_argument("--out", default="profile.csv")
    profile.add_argument("--plot", default=None, help="SVG/PNG 그래프 경로")
    return parser


def run_command(args) -> int:
    """벤치마크 실행"""
    import bench
    from problem_corpus import select_problems

    if args.repeats < 1 or args.max_iters < 1:
        raise ConfigurationError(f"repeats/max-iters 는 1 이상이어야 합니다: {args.repeats}, {args.max_iters}")
    names = _split(args.solvers)
    if not names:
        raise ConfigurationError("솔버를 하나 이상 지정해야 합니다")
    solvers = [bench.make_solver(name, args.rtol, args.atol, args.max_iters) for name in names]
    try:
        problems = select_problems(args.problems)
    except KeyError as e:
        raise ConfigurationError(str(e)) from e

    logger.info(f"솔버 {len(solvers)}개 × 문제 {len(problems)}개, 반복 측정 {args.repeats}회")
    records = bench.run_benchmark(problems, solvers, repeats=args.repeats, max_iters=args.max_iters,
                                  gate_atol=args.atol, gate_rtol=args.rtol)
    bench.write_results(records, args.out)

    summary = bench.failure_summary(records)
    all_failed = [solver for solver, (failed, total) in summary.items() if failed == total]
    if all_failed:
        logger.warning(f"모든 실행이 실패한 솔버: {', '.join(all_failed)}")
        return EXIT_SOLVER_FAILED
    return EXIT_OK


def profile_command(args) -> int:
    """성능 프로파일 계산"""
    import bench

    records = bench.read_results(args.input)
    pair = _split(args.pair) if args.pair else None
    if pair is not None and len(pair) != 2:
        raise ConfigurationError(f"--pair 는 솔버 두 개여야 합니다: {args.pair}")
    curves = bench.performance_profile(records, bench.ProfileMetric(args.metric), solvers=pair)
    bench.write_profile(curves, args.out)
    if args.plot:
        bench.plot_profile(curves, args.plot)
    return EXIT_OK


def main(argv=None) -> int:
    """메인 함수"""
    parser = build_parser()
    args = parser.parse_args(argv)

    setup_logging(log_level=config.get_log_level_int())
    log_bench_start(args.command)

    exit_code = EXIT_OK
    try:
        if not config.validate_config():
            raise ConfigurationError("환경 설정이 유효하지 않습니다")
        if args.command == "run":
            exit_code = run_command(args)
        else:
            exit_code = profile_command(args)
    except ConfigurationError as e:
        log_error("ConfigurationError", str(e))
        exit_code = EXIT_CONFIG_ERROR
    except (FileNotFoundError, ValueError) as e:
        log_error(type(e).__name__, str(e))
        exit_code = EXIT_CONFIG_ERROR
    finally:
        log_bench_shutdown(exit_code)
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
