"""
벤치마크 하니스, 성능 프로파일, CLI 테스트
"""

import math

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

import main
from bench import (
    PROFILE_COLUMNS, RESULT_COLUMNS, BenchRecord, ProfileCurve, default_taus, failure_summary,
    make_solver, performance_profile, performance_ratios, plot_profile, profile_value, quality_gate,
    read_profile, read_results, run_benchmark, write_profile, write_results,
)
from core import ProblemKind
from errors import ConfigurationError
from problem_corpus import TestProblem
from solvers import make_bfgs, make_gradient_descent, make_newton_root

TAUS = [1.0, 1.5, 2.0, 3.0, 4.0, 128.0]


def _record(solver, problem, runtime):
    converged = math.isfinite(runtime)
    return BenchRecord(solver=solver, problem=problem, min_runtime=runtime, converged=converged,
                       iterations=3 if converged else 0, final_f=0.0 if converged else math.nan)


def _table(rows):
    """{problem: {solver: runtime}} → 레코드 목록"""
    return [_record(solver, problem, runtime) for problem, row in rows.items() for solver, runtime in row.items()]


def _curves(records, taus=TAUS, **kwargs):
    return {c.solver: c for c in performance_profile(records, taus=taus, **kwargs)}


def _sphere_problem():
    return TestProblem("sphere", ProblemKind.MINIMISE, lambda x, a: float(x @ x), np.array([1.0, 1.0]),
                       0.0, np.zeros(2), grad=lambda x, a: 2.0 * x)


class FakeTimer:
    """미리 정한 시각을 차례로 돌려주는 타이머"""

    def __init__(self, ticks):
        self.ticks = iter(ticks)

    def __call__(self):
        return next(self.ticks)


class TestQualityGate:

    @pytest.mark.parametrize("f_final, f_star, expected", [
        (1.0, 1.0, True),
        (1.0 + 5e-6, 1.0, True),
        (1.1, 1.0, False),
        (5e-7, 0.0, True),
        (2e-6, 0.0, False),
        (math.nan, 0.0, False),
        (math.inf, 0.0, False),
    ])
    def test_examples(self, f_final, f_star, expected):
        assert quality_gate(f_final, f_star, 1e-6, 1e-5) is expected

    @pytest.mark.parametrize("seed", range(200))
    def test_monotone_in_tolerances(self, seed):
        rng = np.random.default_rng(seed)
        f_star = float(rng.normal() * 10.0 ** rng.uniform(-3, 3))
        f_final = f_star + float(rng.normal() * 10.0 ** rng.uniform(-8, 0))
        eps_a, eps_r = 10.0 ** rng.uniform(-8, -2, size=2)
        if quality_gate(f_final, f_star, eps_a, eps_r):
            assert quality_gate(f_final, f_star, 2.0 * eps_a, eps_r)
            assert quality_gate(f_final, f_star, eps_a, 2.0 * eps_r)

    @pytest.mark.parametrize("seed", range(200))
    def test_monotone_in_f(self, seed):
        rng = np.random.default_rng(seed)
        f_star = float(rng.normal() * 10.0 ** rng.uniform(-3, 3))
        f_final = f_star + float(rng.normal() * 10.0 ** rng.uniform(-8, 0))
        eps_a, eps_r = 10.0 ** rng.uniform(-8, -2, size=2)
        passes = [quality_gate(float(f), f_star, eps_a, eps_r) for f in np.linspace(f_star, f_final, 64)]
        assert passes[0]
        # f* 에서 멀어지며 한 번 실패하면 다시 통과하지 않음
        first_fail = passes.index(False) if False in passes else len(passes)
        assert not any(passes[first_fail:])
        if quality_gate(f_final, f_star, eps_a, eps_r):
            assert all(passes)


class TestRunBenchmark:

    def test_min_over_repeats(self):
        timer = FakeTimer([0.0, 5.0, 10.0, 12.0, 20.0, 27.0])
        (record,) = run_benchmark([_sphere_problem()], [make_bfgs()], repeats=3, timer=timer)
        assert record.converged
        assert record.min_runtime == 2.0
        assert record.solver == "bfgs" and record.problem == "sphere"

    def test_diverging_solver_is_infinite(self):
        solver = make_gradient_descent(learning_rate=10.0, name="gd-diverge")
        (record,) = run_benchmark([_sphere_problem()], [solver], repeats=1)
        assert not record.converged
        assert math.isinf(record.min_runtime)

    def test_kind_mismatch_recorded_as_failure(self):
        records = run_benchmark([_sphere_problem()], [make_newton_root(), make_bfgs()], repeats=1)
        by_solver = {r.solver: r for r in records}
        assert math.isinf(by_solver["newton-root"].min_runtime)
        assert by_solver["bfgs"].converged
        assert failure_summary(records) == {"newton-root": (1, 1), "bfgs": (0, 1)}

    def test_invalid_repeats(self):
        with pytest.raises(ConfigurationError):
            run_benchmark([_sphere_problem()], [make_bfgs()], repeats=0)

    def test_registry(self):
        assert make_solver("lm1", max_iters=7).termination.max_iters == 7
        assert make_solver("hybrid").name == "hybrid"
        with pytest.raises(ConfigurationError):
            make_solver("simplex")


class TestRecords:

    def test_runtime_must_match_status(self):
        with pytest.raises(ValidationError):
            BenchRecord(solver="s", problem="p", min_runtime=math.inf, converged=True, iterations=1, final_f=0.0)
        with pytest.raises(ValidationError):
            BenchRecord(solver="s", problem="p", min_runtime=1.0, converged=False, iterations=1, final_f=0.0)

    def test_curve_must_be_monotone(self):
        with pytest.raises(ValidationError):
            ProfileCurve(solver="s", taus=[1.0, 2.0], rho=[0.5, 0.25])
        with pytest.raises(ValidationError):
            ProfileCurve(solver="s", taus=[2.0, 1.0], rho=[0.0, 0.5])


class TestPerformanceProfile:

    def test_symmetric_pair(self):
        curves = _curves(_table({"p1": {"s1": 1.0, "s2": 2.0}, "p2": {"s1": 2.0, "s2": 1.0}}))
        for name in ("s1", "s2"):
            assert curves[name].rho == [0.5, 0.5, 1.0, 1.0, 1.0, 1.0]

    def test_duplicated_solver_ties(self):
        rows = {"p1": {"s1": 1.0, "copy": 1.0, "s2": 3.0}, "p2": {"s1": 2.0, "copy": 2.0, "s2": 1.0}}
        curves = _curves(_table(rows))
        assert curves["s1"].rho == curves["copy"].rho
        assert curves["s1"].rho[0] == 0.5
        assert curves["s2"].rho[TAUS.index(3.0)] == 1.0

    def test_failure_caps_curve(self):
        curves = _curves(_table({"p1": {"s1": 1.0, "s2": 1.0}, "p2": {"s1": 1.0, "s2": math.inf}}))
        assert curves["s1"].rho[0] == 1.0
        assert max(curves["s2"].rho) == 0.5

    def test_hand_table(self):
        rows = {
            "p1": {"a": 1.0, "b": 2.0, "c": 4.0},
            "p2": {"a": 3.0, "b": 3.0, "c": math.inf},
            "p3": {"a": math.inf, "b": math.inf, "c": math.inf},
            "p4": {"a": 10.0, "b": 5.0, "c": 20.0},
        }
        records = _table(rows)
        ratios, dropped = performance_ratios(records)
        assert dropped == ["p3"]
        assert list(ratios.index) == ["p1", "p2", "p4"]
        curves = _curves(records)
        third = 1.0 / 3.0
        assert curves["a"].rho == pytest.approx([2 * third, 2 * third, 1.0, 1.0, 1.0, 1.0])
        assert curves["b"].rho == pytest.approx([2 * third, 2 * third, 1.0, 1.0, 1.0, 1.0])
        assert curves["c"].rho == pytest.approx([0.0, 0.0, 0.0, 0.0, 2 * third, 2 * third])
        assert profile_value(curves["c"], 3.99) == 0.0
        assert profile_value(curves["c"], 4.0) == pytest.approx(2 * third)

    def test_pair_selection(self):
        rows = {"p1": {"a": 1.0, "b": 2.0, "c": 0.5}, "p2": {"a": 2.0, "b": 1.0, "c": 0.5}}
        curves = _curves(_table(rows), solvers=["a", "b"])
        assert set(curves) == {"a", "b"}
        assert curves["a"].rho[0] == 0.5
        with pytest.raises(ConfigurationError):
            performance_profile(_table(rows), solvers=["a", "zzz"])

    def test_needs_two_solvers(self):
        with pytest.raises(ConfigurationError):
            performance_profile(_table({"p1": {"a": 1.0}}))

    def test_all_problems_dropped(self):
        with pytest.raises(ConfigurationError):
            performance_profile(_table({"p1": {"a": math.inf, "b": math.inf}}))

    def test_default_grid(self):
        taus = default_taus()
        assert taus[0] == 1.0 and taus[-1] == 128.0
        assert len(taus) == 71

    def test_random_tables(self):
        rng = np.random.default_rng(1234)
        for _ in range(1000):
            n_solvers = int(rng.integers(2, 5))
            n_problems = int(rng.integers(1, 8))
            solvers = [f"s{i}" for i in range(n_solvers)]
            runtimes = rng.uniform(0.1, 10.0, size=(n_problems, n_solvers))
            runtimes[rng.random(size=runtimes.shape) < 0.2] = math.inf
            rows = {f"p{j}": dict(zip(solvers, runtimes[j])) for j in range(n_problems)}
            if not np.isfinite(runtimes).any():
                continue
            curves = _curves(_table(rows), taus=default_taus())

            scale = rng.uniform(0.01, 100.0, size=(n_problems, 1))
            scaled = {f"p{j}": dict(zip(solvers, (runtimes * scale)[j])) for j in range(n_problems)}
            curves_scaled = _curves(_table(scaled), taus=default_taus())

            kept = np.isfinite(runtimes).any(axis=1)
            ratios, _ = performance_ratios(_table(rows))
            finite = runtimes[kept]
            best = finite.min(axis=1)
            for i, name in enumerate(solvers):
                rho = np.asarray(curves[name].rho)
                assert np.all(np.diff(rho) >= 0)
                assert np.all((rho >= 0) & (rho <= 1))
                solved = np.isfinite(runtimes[kept, i]).sum() / kept.sum()
                assert rho[-1] <= solved + 1e-12
                assert np.allclose(rho, curves_scaled[name].rho)
                # 비율 1 은 정확히 그 문제의 최솟값 솔버, ρ_s(1) 은 그 비율
                is_best = finite[:, i] == best
                assert np.array_equal(ratios[name].to_numpy() == 1.0, is_best)
                assert rho[0] == pytest.approx(is_best.mean())
            assert max(c.rho[0] for c in curves.values()) > 0


class TestFiles:

    def test_results_round_trip(self, tmp_path):
        records = _table({"p1": {"a": 0.5, "b": math.inf}, "p2": {"a": 1.25, "b": 0.75}})
        path = write_results(records, tmp_path / "results.csv")
        assert list(pd.read_csv(path).columns) == RESULT_COLUMNS
        loaded = read_results(path)
        assert [(r.solver, r.problem, r.converged, r.iterations) for r in loaded] == \
            [(r.solver, r.problem, r.converged, r.iterations) for r in records]
        for a, b in zip(loaded, records):
            assert a.min_runtime == b.min_runtime
            assert (math.isnan(a.final_f) and math.isnan(b.final_f)) or a.final_f == b.final_f

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "broken.csv"
        pd.DataFrame({"solver": ["a"], "problem": ["p"]}).to_csv(path, index=False)
        with pytest.raises(ConfigurationError):
            read_results(path)

    def test_profile_round_trip_and_plot(self, tmp_path):
        curves = performance_profile(_table({"p1": {"a": 1.0, "b": 2.0}, "p2": {"a": 3.0, "b": 1.0}}))
        path = write_profile(curves, tmp_path / "profile.csv")
        assert list(pd.read_csv(path).columns) == PROFILE_COLUMNS
        loaded = read_profile(path)
        assert [c.solver for c in loaded] == [c.solver for c in curves]
        for a, b in zip(loaded, curves):
            assert a.taus == pytest.approx(b.taus)
            assert a.rho == pytest.approx(b.rho)
        plot = plot_profile(curves, tmp_path / "profile.svg")
        assert plot.exists() and plot.stat().st_size > 0


class TestCommandLine:

    @pytest.fixture(autouse=True)
    def _workdir(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        monkeypatch.setenv("LOG_FILE_ENABLED", "false")

    def test_run_then_profile(self, tmp_path):
        results = tmp_path / "results.csv"
        code = main.main(["run", "--solvers", "gn,gn-cg", "--problems", "linear_regression,ill_conditioned_linear",
                          "--repeats", "1", "--out", str(results)])
        assert code == main.EXIT_OK
        frame = pd.read_csv(results)
        assert len(frame) == 4
        assert set(frame["solver"]) == {"gn", "gn-cg"}

        profile = tmp_path / "profile.csv"
        plot = tmp_path / "profile.png"
        code = main.main(["profile", "--in", str(results), "--out", str(profile), "--plot", str(plot)])
        assert code == main.EXIT_OK
        assert set(pd.read_csv(profile)["solver"]) == {"gn", "gn-cg"}
        assert plot.exists()

    def test_solver_failing_everywhere(self, tmp_path):
        code = main.main(["run", "--solvers", "lm", "--problems", "convex_quadratic_5", "--repeats", "1",
                          "--out", str(tmp_path / "r.csv")])
        assert code == main.EXIT_SOLVER_FAILED

    @pytest.mark.parametrize("argv", [
        ["run", "--solvers", "simplex", "--problems", "beale"],
        ["run", "--problems", "nope"],
        ["run", "--repeats", "0"],
        ["run", "--max-iters", "0"],
        ["profile", "--in", "missing.csv"],
    ])
    def test_configuration_errors(self, argv):
        assert main.main(argv) == main.EXIT_CONFIG_ERROR

    def test_pair_must_name_two_solvers(self, tmp_path):
        path = write_results(_table({"p1": {"a": 1.0, "b": 2.0, "c": 3.0}}), tmp_path / "r.csv")
        assert main.main(["profile", "--in", str(path), "--pair", "a,b,c"]) == main.EXIT_CONFIG_ERROR
        assert main.main(["profile", "--in", str(path), "--pair", "a,c"]) == main.EXIT_OK

    def test_invalid_environment(self, monkeypatch):
        monkeypatch.setenv("BENCH_REPEATS", "0")
        assert main.main(["profile", "--in", "missing.csv"]) == main.EXIT_CONFIG_ERROR
