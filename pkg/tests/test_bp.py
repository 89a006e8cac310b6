"""Bilinear solver contracts against the enumeration oracle."""

import numpy as np
import pytest

from chsvi.lp import Polytope
from chsvi.lp.bilinear import (BilinearPrescriptionProgram, enumerate_oracle,
                               solve_bp, solve_bp_exact)


def random_bp(rng, n_states=6, n_actions=3, n_labels=4, n_rows=10):
    n_y = n_states * n_actions
    lo = np.full(n_y, -2.0)
    up = np.full(n_y, 3.0)
    poly = Polytope(lo, up)
    for _ in range(n_rows):
        coef = rng.uniform(0.0, 1.0, size=n_y)
        poly.add_row(coef, float(rng.uniform(0.5, 2.0)))
    b = rng.dirichlet(np.ones(n_states))
    m_of = rng.integers(0, n_labels, size=n_states)
    m_of[:n_labels] = np.arange(n_labels)  # every label attained
    return BilinearPrescriptionProgram(poly, b, m_of, n_actions, n_labels, 1)


def test_single_label_equals_best_action():
    rng = np.random.default_rng(1)
    bp = random_bp(rng, n_states=4, n_actions=3, n_labels=1, n_rows=6)
    res = solve_bp_exact(bp)
    per_action = []
    for a in range(3):
        table = np.full(1, a, dtype=np.int64)
        c = bp.objective(table)
        per_action.append(bp.poly.solve(c)[0])
    assert res.value == pytest.approx(max(per_action), abs=1e-8)


def test_box_polytope_value_is_cap_for_every_prescription():
    n_states, n_actions = 5, 2
    poly = Polytope(np.full(10, -1.0), np.full(10, 4.5))
    b = np.full(n_states, 0.2)
    m_of = np.array([0, 0, 1, 1, 2])
    bp = BilinearPrescriptionProgram(poly, b, m_of, n_actions, 3, 1)
    res = solve_bp_exact(bp)
    assert res.value == pytest.approx(4.5, abs=1e-9)


def test_enumerate_matches_oracle_30_instances():
    rng = np.random.default_rng(42)
    for trial in range(30):
        bp = random_bp(rng)
        res = solve_bp_exact(bp)
        oval, _ = enumerate_oracle(bp)
        assert res.value == pytest.approx(oval, abs=1e-6), f"trial {trial}"
        # the reported (gamma, y) reproduce the value
        assert bp.score(res.table, res.y) == pytest.approx(res.value,
                                                           abs=1e-7)
        assert res.table.size == bp.n_labels
        assert np.all((0 <= res.table) & (res.table < bp.n_actions))


def test_branch_bound_matches_enumerate():
    rng = np.random.default_rng(43)
    for trial in range(30):
        bp = random_bp(rng)
        r1 = solve_bp(bp, mode="enumerate")
        r2 = solve_bp(bp, mode="branch_bound")
        assert r2.status == "exact"
        assert r1.value == pytest.approx(r2.value, abs=1e-6), f"trial {trial}"


def test_alternate_is_a_lower_bound_and_fixed_point():
    rng = np.random.default_rng(44)
    for trial in range(12):
        bp = random_bp(rng)
        exact = solve_bp(bp, mode="enumerate")
        heur = solve_bp(bp, mode="alternate", seed=trial)
        assert heur.status == "heuristic"
        assert heur.value <= exact.value + 1e-7
        # ascent started at the exact optimizer stays there
        from chsvi.lp.bilinear import _ReducedView, _solve_fixed
        view = _ReducedView(bp)
        val, _ = _solve_fixed(view, bp, exact.table)
        assert val == pytest.approx(exact.value, abs=1e-8)


def test_screening_skips_but_preserves_exactness():
    # larger label count: screening must not change the argmax value
    rng = np.random.default_rng(45)
    bp = random_bp(rng, n_states=8, n_actions=3, n_labels=5, n_rows=12)
    res = solve_bp_exact(bp)
    assert res.lp_solves < bp.prescription_count() + 2  # some were screened
    oval, _ = enumerate_oracle(bp)
    assert res.value == pytest.approx(oval, abs=1e-6)
