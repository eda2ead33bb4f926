"""Solver steps, the shared driver, termination, and trace serialization."""

import io

import numpy as np
import pytest
from conftest import dense_kl_objective, quadratic_objective

from egmin import (
    IterationRecord,
    Method,
    Objective,
    SolverConfig,
    StepInfeasible,
    TerminalStatus,
    check_termination,
    constant_step,
    default_x0,
    exp_map,
    pr_beta,
    read_trace_csv,
    relative_lipschitz_step,
    riemannian_grad,
    solve,
    step_eg,
    step_ip_e_md,
    step_ip_g_rgd,
)
from egmin.geometry import GeometryKind
from egmin.verification import md_argmin_oracle

POI = GeometryKind.POISSON_FISHER_RAO


class TestSteps:
    def test_eg_zero_gradient(self):
        x = np.array([1.5, 2.0])
        np.testing.assert_array_equal(step_eg(x, np.zeros(2), 1.0).point, x)

    def test_eg_values(self):
        np.testing.assert_allclose(
            step_eg(np.array([1.0]), np.array([1.0]), 1.0).point, [np.exp(-1.0)]
        )
        np.testing.assert_allclose(
            step_eg(np.array([2.0, 1.0]), np.array([0.0, -1.0]), 0.5).point,
            [2.0, np.exp(0.5)],
        )

    def test_ip_g_rgd_values(self):
        x = np.array([2.0])
        np.testing.assert_array_equal(step_ip_g_rgd(x, np.zeros(1), 1.0).point, x)
        np.testing.assert_allclose(
            step_ip_g_rgd(x, np.array([1.0]), 1.0).point, [2.0 * np.exp(-2.0)]
        )

    def test_ip_g_rgd_coincides_with_eg_at_ones(self, rng):
        x = np.ones(5)
        g = rng.normal(size=5)
        np.testing.assert_allclose(
            step_ip_g_rgd(x, g, 0.7).point, step_eg(x, g, 0.7).point, rtol=1e-15
        )

    def test_ip_e_md_zero_gradient(self):
        x = np.array([1.5, 2.0])
        np.testing.assert_array_equal(step_ip_e_md(x, np.zeros(2), 1.0), x)

    def test_ip_e_md_descends_on_positive_gradient(self):
        got = step_ip_e_md(np.array([1.0]), np.array([1.0]), 0.5)
        np.testing.assert_allclose(got, [1.0 / 1.5])

    def test_ip_e_md_infeasible(self):
        with pytest.raises(StepInfeasible) as err:
            step_ip_e_md(np.array([1.0]), np.array([-1.0]), 1.0)
        assert err.value.coordinate == 0

    def test_ip_e_md_is_barrier_proximal_step(self):
        # The quotient update minimizes tau*<g, u-x> + D(u, x) for the
        # log-barrier divergence D(u, x) = sum(-log(u/x) + (u-x)/x).
        # Verified by dense scan plus local refinement, per coordinate.
        x = np.array([1.3])
        g = np.array([0.8])
        tau = 0.4

        def objective(u):
            return tau * g[0] * (u - x[0]) - np.log(u / x[0]) + (u - x[0]) / x[0]

        grid = np.linspace(1e-3, 5.0, 2_000_001)
        u_star = grid[np.argmin(objective(grid))]
        got = step_ip_e_md(x, g, tau)
        np.testing.assert_allclose(got, [u_star], atol=5e-6)

    def test_eg_matches_proximal_oracle(self, rng):
        for _ in range(10):
            n = int(rng.integers(1, 10))
            x = rng.uniform(0.2, 3.0, n)
            g = rng.normal(size=n)
            tau = float(rng.uniform(0.05, 1.5))
            got = step_eg(x, g, tau).point
            ref = md_argmin_oracle(x, g, tau)
            assert np.max(np.abs(got - ref)) <= 1e-8

    def test_eg_equals_generic_rgd_step(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 10))
            x = rng.uniform(0.3, 3.0, n)
            g = rng.normal(0.0, 1.5, n)
            tau = float(rng.uniform(0.0, 2.0))
            lhs = step_eg(x, g, tau).point
            rhs = exp_map(x, -riemannian_grad(POI, x, g), tau).point
            np.testing.assert_allclose(lhs, rhs, rtol=1e-13)


class TestRelativeLipschitzStep:
    def test_values(self):
        assert relative_lipschitz_step([1.0]) == 0.5
        assert relative_lipschitz_step([1.0, 1.0, 2.0]) == 0.125
        assert relative_lipschitz_step([0.5]) == 1.0

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            relative_lipschitz_step([1.0, 0.0])


class TestPrBeta:
    def test_zero_new_gradient(self):
        assert pr_beta(np.ones(2), np.zeros(2), 4.0, np.array([1.0, -1.0])) == 0.0

    def test_orthogonal_numerator(self):
        # u = g_new - t = [1, 1], orthogonal to g_new = [1, -1] at x = ones.
        x = np.ones(2)
        g_new = np.array([1.0, -1.0])
        t = np.array([0.0, -2.0])
        assert pr_beta(x, g_new, 4.0, t) == pytest.approx(0.0)

    def test_scalar_example(self):
        # u = 2 - (-1) = 3, inner product 2*3 at x=1, over 4 -> 1.5.
        beta = pr_beta(np.array([1.0]), np.array([2.0]), 4.0, np.array([-1.0]))
        assert beta == pytest.approx(1.5)

    def test_zero_old_norm_is_contract_violation(self):
        with pytest.raises(ValueError):
            pr_beta(np.ones(1), np.ones(1), 0.0, np.ones(1))


class TestCheckTermination:
    CONFIG = SolverConfig(method=Method.EG)

    def rec(self, k=1, gnorm=1.0, tau=0.5):
        return IterationRecord(k, 1.0, gnorm, tau, 0, 0, 0)

    def test_grad_tol(self):
        assert check_termination(self.rec(gnorm=1e-7), self.CONFIG) is TerminalStatus.GRAD_TOL

    def test_step_tol(self):
        assert check_termination(self.rec(tau=1e-11), self.CONFIG) is TerminalStatus.STEP_TOL

    def test_max_iter(self):
        assert check_termination(self.rec(k=300), self.CONFIG) is TerminalStatus.MAX_ITER

    def test_priority_grad_over_step(self):
        rec = self.rec(k=300, gnorm=1e-7, tau=1e-11)
        assert check_termination(rec, self.CONFIG) is TerminalStatus.GRAD_TOL

    def test_initial_record_not_step_tol(self):
        rec = IterationRecord(0, 1.0, 1.0, 0.0, 0, 0, 0)
        assert check_termination(rec, self.CONFIG) is None

    def test_continue(self):
        assert check_termination(self.rec(), self.CONFIG) is None


class TestSolve:
    def test_starts_at_critical_point(self):
        a = np.array([2.0, 3.0])
        trace = solve(SolverConfig(method=Method.EG), quadratic_objective(a), a)
        assert trace.terminal_status is TerminalStatus.GRAD_TOL
        assert len(trace.records) == 1
        assert trace.records[0].k == 0

    def test_eg_converges_on_convex_quadratic(self):
        a = np.array([2.0, 3.0])
        trace = solve(SolverConfig(method=Method.EG), quadratic_objective(a), np.array([1.0, 1.0]))
        values = trace.objective_values()
        assert np.all(np.diff(values) < 0.0)
        assert np.max(np.abs(trace.final_point - a)) <= 1e-4
        assert trace.records[-1].k <= 300

    @pytest.mark.parametrize("method", [Method.EG, Method.IP_G_RGD, Method.POI_CG])
    def test_monotone_descent_with_armijo(self, method, rng):
        for _ in range(5):
            n = int(rng.integers(2, 12))
            a = rng.uniform(0.3, 3.0, n)
            x0 = rng.uniform(0.5, 1.5, n)
            trace = solve(
                SolverConfig(method=method, max_iterations=60),
                quadratic_objective(a),
                x0,
            )
            assert np.all(np.diff(trace.objective_values()) <= 0.0)
            assert np.all(trace.final_point > 0.0)

    def test_ipemd_monotone_on_kl_instance(self, rng):
        m, n = 8, 12
        a_mat = rng.uniform(0.1, 1.0, (m, n))
        x_true = rng.uniform(0.5, 1.5, n)
        b = a_mat @ x_true
        obj = dense_kl_objective(a_mat, b)
        config = SolverConfig(
            method=Method.IP_E_MD,
            linesearch=constant_step(relative_lipschitz_step(b)),
            max_iterations=100,
        )
        trace = solve(config, obj, rng.uniform(0.5, 1.5, n))
        assert trace.terminal_status in (TerminalStatus.MAX_ITER, TerminalStatus.GRAD_TOL)
        values = trace.objective_values()
        assert np.all(np.diff(values) <= 0.0)

    def test_ipemd_requires_explicit_policy(self):
        with pytest.raises(ValueError):
            solve(
                SolverConfig(method=Method.IP_E_MD),
                quadratic_objective([1.0]),
                np.array([2.0]),
            )

    def test_ipemd_infeasible_aborts_with_partial_trace(self):
        # Large constant step against a negative gradient coordinate.
        obj = Objective(value_and_grad=lambda x: (float(-x.sum()), -np.ones_like(x)))
        config = SolverConfig(
            method=Method.IP_E_MD, linesearch=constant_step(2.0), max_iterations=10
        )
        trace = solve(config, obj, np.array([1.0]))
        assert trace.terminal_status is TerminalStatus.STEP_INFEASIBLE
        assert len(trace.records) == 1  # the initial record is retained

    def test_cg_first_step_equals_eg(self, rng):
        n = 6
        a = rng.uniform(0.5, 3.0, n)
        x0 = rng.uniform(0.5, 1.5, n)
        traces = {}
        for method in (Method.EG, Method.POI_CG):
            traces[method] = solve(
                SolverConfig(method=method, max_iterations=1),
                quadratic_objective(a),
                x0,
            )
        rec_eg = traces[Method.EG].records[1]
        rec_cg = traces[Method.POI_CG].records[1]
        assert rec_eg.f == rec_cg.f
        assert rec_eg.tau == rec_cg.tau
        np.testing.assert_array_equal(
            traces[Method.EG].final_point, traces[Method.POI_CG].final_point
        )

    def test_cg_accelerates_on_anisotropic_quadratic(self, rng):
        from conftest import general_quadratic_objective

        n = 8
        diag = np.linspace(1.0, 40.0, n)
        a = rng.uniform(0.8, 1.6, n)
        x0 = rng.uniform(0.5, 1.5, n)
        iters = {}
        for method in (Method.EG, Method.POI_CG):
            trace = solve(
                SolverConfig(method=method, max_iterations=300, grad_norm_tol=1e-8),
                general_quadratic_objective(np.diag(diag), a),
                x0,
            )
            iters[method] = trace.records[-1].k
        assert iters[Method.POI_CG] <= iters[Method.EG]

    def test_linesearch_failure_terminates_with_step_tol(self):
        obj = Objective(
            value_and_grad=lambda x: (0.0, np.ones_like(x)),
            value=lambda x: np.inf,
        )
        trace = solve(SolverConfig(method=Method.EG), obj, np.array([1.0]))
        assert trace.terminal_status is TerminalStatus.STEP_TOL
        assert len(trace.records) == 2
        assert trace.records[1].tau < 1e-10

    def test_determinism_bit_identical(self):
        a = np.array([2.0, 3.0, 0.7])
        x0 = default_x0(3, seed=11)
        config = SolverConfig(method=Method.POI_CG, max_iterations=50)
        t1 = solve(config, quadratic_objective(a), x0)
        t2 = solve(config, quadratic_objective(a), x0)
        for r1, r2 in zip(t1.records, t2.records):
            assert (r1.k, r1.f, r1.riem_grad_norm, r1.tau, r1.halvings) == (
                r2.k, r2.f, r2.riem_grad_norm, r2.tau, r2.halvings
            )
        buf1, buf2 = io.StringIO(), io.StringIO()
        t1.to_csv(buf1)
        t2.to_csv(buf2)
        assert buf1.getvalue() == buf2.getvalue()

    def test_matvec_counts_nondecreasing(self, rng):
        from egmin import build_instance, make_objective

        instance, _ = build_instance(8, seed=5)
        obj = make_objective(instance)
        trace = solve(
            SolverConfig(method=Method.EG, max_iterations=20),
            obj,
            default_x0(instance.A.cols, seed=1),
        )
        counts = [rec.matvec_count for rec in trace.records]
        assert all(b >= a for a, b in zip(counts, counts[1:]))
        assert counts[0] > 0


class TestTraceSerialization:
    def build_trace(self):
        a = np.array([2.0, 3.0])
        return solve(
            SolverConfig(method=Method.EG, max_iterations=15),
            quadratic_objective(a),
            np.array([1.0, 1.0]),
        )

    def test_csv_round_trip(self, tmp_path):
        trace = self.build_trace()
        path = tmp_path / "trace.csv"
        trace.to_csv(path)
        parsed = read_trace_csv(path)
        assert len(parsed) == len(trace.records)
        for orig, back in zip(trace.records, parsed):
            assert back.k == orig.k
            assert back.f == orig.f  # exact: 17 significant digits
            assert back.riem_grad_norm == orig.riem_grad_norm
            assert back.tau == orig.tau
            assert back.halvings == orig.halvings
            assert back.matvec_count == orig.matvec_count
            assert back.wall_nanos == 0

    def test_csv_wall_column_optional(self, tmp_path):
        trace = self.build_trace()
        path = tmp_path / "trace.csv"
        trace.to_csv(path, include_wall=True)
        header = path.read_text().splitlines()[0]
        assert header.split(",") == [
            "k", "f", "riem_grad_norm", "tau", "halvings", "matvec_count", "wall_nanos",
        ]
        parsed = read_trace_csv(path)
        assert parsed[-1].wall_nanos > 0

    def test_summary_dict(self):
        trace = self.build_trace()
        summary = trace.summary_dict()
        assert summary["terminal_status"] in {s.value for s in TerminalStatus}
        assert summary["iterations"] == trace.records[-1].k
        assert summary["final_f"] == trace.records[-1].f
        assert summary["final_grad_norm"] == trace.records[-1].riem_grad_norm
        assert summary["total_matvecs"] == trace.records[-1].matvec_count


class TestDefaultX0:
    def test_range_and_reproducibility(self):
        x1 = default_x0(1000, seed=7)
        x2 = default_x0(1000, seed=7)
        np.testing.assert_array_equal(x1, x2)
        assert np.all((x1 > 0.5) & (x1 < 1.5))
        assert np.any(default_x0(1000, seed=8) != x1)
