"""LP engine contracts: statuses, certified optima, oracle agreement."""

import numpy as np
import pytest

from chsvi.lp import LinearProgram, Polytope, SimplexSolver, solve_lp

from reference_simplex import reference_solve


def box_lp(c, lo, up, rows=(), senses=(), rhs=()):
    n = len(c)
    return LinearProgram(c, rows, senses, rhs,
                         lower=np.full(n, lo), upper=np.full(n, up))


def test_two_vars_box():
    status, val, x = solve_lp(box_lp([1.0, 1.0], 0.0, 1.0))
    assert status == "optimal"
    assert val == pytest.approx(2.0, abs=1e-9)
    assert np.allclose(x, [1.0, 1.0])


def test_distribution_times_box_cap():
    b = np.array([0.3, 0.5, 0.2])
    lp = box_lp(b, -11.0, 7.0)
    status, val, _ = solve_lp(lp)
    assert status == "optimal"
    assert val == pytest.approx(7.0, abs=1e-9)


def test_general_rows_and_equality():
    # max x0 + x1, x0 + x1 <= 1.5, x0 - x1 = 0.5, x in [0, 1]^2
    lp = LinearProgram([1.0, 1.0],
                       [[1.0, 1.0], [1.0, -1.0]],
                       ["<", "="], [1.5, 0.5],
                       lower=[0.0, 0.0], upper=[1.0, 1.0])
    status, val, x = solve_lp(lp)
    assert status == "optimal"
    assert val == pytest.approx(1.5, abs=1e-8)
    assert x[0] - x[1] == pytest.approx(0.5, abs=1e-8)


def test_infeasible_detected():
    lp = LinearProgram([1.0], [[1.0], [1.0]], ["<", ">"], [0.0, 1.0],
                       lower=[-5.0], upper=[5.0])
    status, _, _ = solve_lp(lp)
    assert status == "infeasible"


def test_unbounded_detected():
    lp = LinearProgram([1.0, 0.0], [[0.0, 1.0]], ["<"], [1.0],
                       lower=[0.0, 0.0])
    status, _, _ = solve_lp(lp)
    assert status == "unbounded"


def test_negative_rhs_feasibility_phase():
    # start basis infeasible: row forces x0 >= 2 with x at lower bound 0
    lp = LinearProgram([-1.0], [[1.0]], [">"], [2.0],
                       lower=[0.0], upper=[10.0])
    status, val, x = solve_lp(lp)
    assert status == "optimal"
    assert val == pytest.approx(-2.0, abs=1e-8)


def rand_lp(rng, n, m):
    c = rng.normal(size=n)
    rows = rng.normal(size=(m, n))
    senses = [("<", ">", "=")[k] for k in rng.integers(0, 3, size=m)]
    x0 = rng.uniform(-1.0, 1.0, size=n)  # keeps the instance feasible
    slackness = rng.uniform(0.0, 1.0, size=m)
    rhs = rows @ x0
    for i, s in enumerate(senses):
        if s == "<":
            rhs[i] += slackness[i]
        elif s == ">":
            rhs[i] -= slackness[i]
    lo = np.full(n, -2.0)
    up = np.full(n, 2.0)
    return LinearProgram(c, rows, senses, rhs, lower=lo, upper=up)


def test_random_lps_match_reference():
    rng = np.random.default_rng(7)
    for trial in range(20):
        lp = rand_lp(rng, 30, 50)
        status, val, x = solve_lp(lp)
        ref_status, ref_val = reference_solve(
            lp.objective, lp.rows, lp.senses, lp.rhs, lp.lower, lp.upper)
        assert status == ref_status == "optimal", f"trial {trial}"
        assert val == pytest.approx(ref_val, abs=1e-6), f"trial {trial}"


def test_duality_on_random_lps():
    # solve_lp already rejects optima whose weak-duality gap exceeds 1e-7;
    # here we assert solve succeeds across a fresh batch
    rng = np.random.default_rng(11)
    for _ in range(10):
        lp = rand_lp(rng, 12, 20)
        status, val, _ = solve_lp(lp)
        assert status == "optimal"
        assert np.isfinite(val)


def test_warm_objective_swap_consistency():
    rng = np.random.default_rng(3)
    n = 15
    solver = SimplexSolver(n, np.full(n, -1.0), np.full(n, 3.0))
    for _ in range(10):
        row = rng.normal(size=n)
        solver.add_row(row, "<", float(rng.uniform(0.5, 2.0)))
    for trial in range(25):
        c = rng.normal(size=n)
        solver.set_objective(c)
        assert solver.solve() == "optimal"
        warm_val = solver.objective_value()
        cold = SimplexSolver(n, np.full(n, -1.0), np.full(n, 3.0))
        cold._rows[: solver.m] = solver.A
        for i in range(solver.m):
            cold.add_row(solver.A[i], "<", float(solver.rhs[i]))
        cold.set_objective(c)
        assert cold.solve() == "optimal"
        assert warm_val == pytest.approx(cold.objective_value(), abs=1e-7)


def test_row_append_keeps_warm_basis_valid():
    rng = np.random.default_rng(5)
    n = 10
    solver = SimplexSolver(n, np.zeros(n), np.ones(n))
    c = rng.uniform(0.5, 1.0, size=n)
    solver.set_objective(c)
    assert solver.solve() == "optimal"
    assert solver.objective_value() == pytest.approx(c.sum(), abs=1e-8)
    # cut the previous optimum off and re-solve warm
    solver.add_row(np.ones(n), "<", n / 2.0)
    assert solver.solve() == "optimal"
    assert solver.objective_value() <= c.sum()
    assert solver.x.sum() <= n / 2.0 + 1e-7


class TestPolytope:
    def test_box_only(self):
        poly = Polytope(np.zeros(4), np.full(4, 2.5))
        b = np.array([0.25, 0.25, 0.25, 0.25])
        val, x = poly.solve(b)
        assert val == pytest.approx(2.5, abs=1e-9)

    def test_lazy_rows_respected(self):
        rng = np.random.default_rng(0)
        poly = Polytope(np.full(6, -1.0), np.full(6, 1.0))
        rows = rng.normal(size=(40, 6))
        rhs = rng.uniform(0.2, 1.0, size=40)
        for i in range(40):
            poly.add_row(rows[i], rhs[i])
        for _ in range(10):
            c = rng.normal(size=6)
            val, x = poly.solve(c)
            assert np.all(rows @ x <= rhs + 1e-6)
            lp = LinearProgram(c, rows, ["<"] * 40, rhs,
                               lower=np.full(6, -1.0), upper=np.full(6, 1.0))
            status, ref, _ = solve_lp(lp)
            assert status == "optimal"
            assert val == pytest.approx(ref, abs=1e-6)

    def test_exclude_matches_leave_one_out(self):
        rng = np.random.default_rng(2)
        poly = Polytope(np.zeros(5), np.ones(5))
        rows = rng.uniform(0.0, 1.0, size=(12, 5))
        rhs = rng.uniform(0.5, 1.5, size=12)
        ids = [poly.add_row(rows[i], rhs[i]) for i in range(12)]
        c = rng.uniform(0.0, 1.0, size=5)
        poly.solve(c)  # prime the working set
        for k in (0, 5, 11):
            val, _ = poly.solve(c, exclude={ids[k]})
            keep = [i for i in range(12) if i != k]
            lp = LinearProgram(c, rows[keep], ["<"] * 11, rhs[keep],
                               lower=np.zeros(5), upper=np.ones(5))
            _, ref, _ = solve_lp(lp)
            assert val == pytest.approx(ref, abs=1e-6)

    def test_screen_bound_is_valid(self):
        rng = np.random.default_rng(4)
        poly = Polytope(np.full(8, -2.0), np.full(8, 2.0))
        for _ in range(15):
            poly.add_row(rng.uniform(0.0, 1.0, size=8),
                         float(rng.uniform(0.5, 2.0)))
        c0 = rng.normal(size=8)
        val0, _, cert = poly.solve(c0, want_cert=True)
        assert poly.screen_bound(cert, c0) >= val0 - 1e-7
        for _ in range(20):
            c = c0 + rng.normal(scale=0.3, size=8)
            bound = poly.screen_bound(cert, c)
            val, _ = poly.solve(c)
            assert bound >= val - 1e-7

    def test_reduced_polytope_matches_full(self):
        rng = np.random.default_rng(6)
        n = 9
        poly = Polytope(np.full(n, -1.0), np.full(n, 1.5))
        rows = rng.uniform(0.0, 1.0, size=(10, n))  # nonnegative rows
        rhs = rng.uniform(0.5, 2.0, size=10)
        for i in range(10):
            poly.add_row(rows[i], rhs[i])
        cols = np.array([1, 3, 4, 7])
        mask = np.zeros(n, dtype=bool)
        mask[cols] = True
        assert not poly.has_negative_outside(mask)
        sub = poly.reduced(cols)
        for _ in range(8):
            csub = rng.normal(size=cols.size)
            cfull = np.zeros(n)
            cfull[cols] = csub
            vs, _ = sub.solve(csub)
            vf, _ = poly.solve(cfull)
            # dropped columns carry zero objective; folding them at the lower
            # bound changes the constant part only
            assert vs == pytest.approx(vf, abs=1e-6)
