"""Model validation, staging, and belief-operation contracts."""

import numpy as np
import pytest
import scipy.sparse as spsp

from chsvi.model import (DecModel, InvalidModelError, Prescription,
                         StagedBelief, build_staged, validate_model)


def toy_model(discount=0.9, n_states=2, n_obs=2, seed=0, n_labels=(1, 1)):
    """Random valid 2-agent model with 2 actions each."""
    rng = np.random.default_rng(seed)
    A = (2, 2)
    AT = 4
    S, O = n_states, n_obs
    P = spsp.lil_matrix((S * AT, O * S))
    for row in range(S * AT):
        w = rng.dirichlet(np.ones(O * S))
        P[row] = w
    r = rng.uniform(-1.0, 1.0, size=S * AT)
    Mmap = np.zeros((2, S), dtype=np.int64)
    for i in range(2):
        Mmap[i] = rng.integers(0, n_labels[i], size=S)
        Mmap[i, : n_labels[i]] = np.arange(n_labels[i])
    return DecModel(
        agents=["a1", "a2"],
        states=[f"s{k}" for k in range(S)],
        actions=[["x", "y"], ["x", "y"]],
        private_labels=[[f"m{j}" for j in range(n_labels[i])]
                        for i in range(2)],
        Mmap=Mmap,
        observations=[f"o{k}" for k in range(O)],
        b0=rng.dirichlet(np.ones(S)),
        P=P.tocsr(),
        r=r,
        discount=discount,
    )


class TestValidate:
    def test_valid_model_clean_report(self):
        assert validate_model(toy_model()) == []

    def test_row_mass_violation(self):
        m = toy_model()
        m._P = spsp.csr_matrix(m._P * 0.98)
        report = validate_model(m)
        assert any("row mass" in v for v in report)

    def test_b0_mass_violation(self):
        m = toy_model()
        m.b0 = np.zeros(m.S)
        report = validate_model(m)
        assert any("b0 mass" in v for v in report)

    def test_unattained_label(self):
        m = toy_model(n_labels=(2, 1), n_states=4)
        m.Mmap[0] = 0  # label m1 never used
        report = validate_model(m)
        assert any("unattained" in v for v in report)

    def test_build_staged_rejects_invalid(self):
        m = toy_model()
        m.b0 = np.zeros(m.S)
        with pytest.raises(InvalidModelError):
            build_staged(m)


class TestStaging:
    def test_single_agent_sizes(self):
        m = toy_model()
        m1 = DecModel(["a1"], m.states, [["x", "y"]], [["m0"]],
                      np.zeros((1, m.S), dtype=np.int64), m.observations,
                      m.b0, _marginal_first_agent(m), _reward_first(m),
                      m.discount)
        staged = build_staged(m1)
        assert staged.dims == [2, 4]

    def test_dims_product(self):
        staged = build_staged(toy_model(n_states=3, n_labels=(2, 2), seed=3))
        assert staged.dims == [3, 6, 12]

    def test_index_roundtrip(self):
        staged = build_staged(toy_model(n_states=3, seed=1))
        for l in range(staged.n + 1):
            for idx in range(staged.dims[l]):
                parts = staged.composite_parts(l, idx)
                assert staged.composite_index(l, parts[0], parts[1:]) == idx
                assert staged.base_of[l][idx] == parts[0]


def _marginal_first_agent(m):
    """Collapse agent 2 by conditioning on its action 0 (test helper)."""
    rows = []
    for s in range(m.S):
        for a1 in range(2):
            row = m._P[s * 4 + a1 * 2 + 0]
            rows.append(row)
    return spsp.vstack(rows).tocsr()


def _reward_first(m):
    return np.array([m._r[s * 4 + a1 * 2] for s in range(m.S)
                     for a1 in range(2)])


class TestBeliefOps:
    def test_prescription_lift_uniform(self):
        staged = build_staged(toy_model())
        b = StagedBelief(0, np.full(2, 0.5))
        g = Prescription(1, np.zeros(1, dtype=np.int64))
        out = staged.advance_prescription(b, g)
        assert out.stage == 1
        expect = np.zeros(4)
        expect[[0, 2]] = 0.5
        assert np.array_equal(out.probs, expect)

    def test_point_mass_lift(self):
        staged = build_staged(toy_model(n_labels=(2, 1), n_states=4, seed=2))
        b = np.zeros(4)
        b[2] = 1.0
        g = Prescription(1, np.array([1, 0], dtype=np.int64))
        out = staged.advance_prescription(StagedBelief(0, b), g)
        s, chosen = 2, g.table[staged.base.Mmap[0][2]]
        assert out.probs[s * 2 + chosen] == 1.0
        assert out.probs.sum() == 1.0

    def test_mass_preserved_exactly(self):
        rng = np.random.default_rng(5)
        staged = build_staged(toy_model(n_states=5, n_labels=(3, 2), seed=5))
        for _ in range(20):
            b = rng.dirichlet(np.ones(5))
            g = Prescription(1, rng.integers(0, 2, size=3))
            out = staged.advance_prescription(StagedBelief(0, b), g)
            # the lift is a pure scatter: the value multiset is untouched
            assert np.array_equal(np.sort(out.probs[out.probs > 0]),
                                  np.sort(b[b > 0]))
            assert out.probs.sum() == pytest.approx(b.sum(), abs=1e-15)

    def test_stage_agent_mismatch(self):
        staged = build_staged(toy_model())
        b = StagedBelief(0, np.full(2, 0.5))
        with pytest.raises(ValueError):
            staged.advance_prescription(b, Prescription(2, np.zeros(1, int)))
        with pytest.raises(ValueError):
            staged.advance_chance(b, 0)

    def test_chance_probabilities_sum_to_one(self):
        rng = np.random.default_rng(6)
        staged = build_staged(toy_model(n_states=4, n_obs=3, seed=6))
        for _ in range(10):
            b = StagedBelief(staged.n, rng.dirichlet(np.ones(staged.dims[-1])))
            po, posts = staged.chance_profile(b)
            assert po.sum() == pytest.approx(1.0, abs=1e-9)
            for o in range(3):
                if po[o] > 0:
                    assert posts[o].sum() == pytest.approx(1.0, abs=1e-9)

    def test_deterministic_kernel_pushforward(self):
        # all rows emit observation 0: Pr(o0|b) = 1, posterior = pushforward
        m = toy_model()
        P = spsp.lil_matrix((m.S * m.AT, m.O * m.S))
        rng = np.random.default_rng(7)
        for row in range(m.S * m.AT):
            P[row, : m.S] = rng.dirichlet(np.ones(m.S))
        m._P = P.tocsr()
        staged = build_staged(m)
        b = StagedBelief(staged.n, np.full(staged.dims[-1],
                                           1.0 / staged.dims[-1]))
        post, p = staged.advance_chance(b, 0)
        assert p == pytest.approx(1.0, abs=1e-12)
        none_post, p0 = staged.advance_chance(b, 1)
        assert none_post is None and p0 == 0.0

    def test_one_label_flip_l1_distance(self):
        # changing gamma at one label moves exactly twice that label's mass
        rng = np.random.default_rng(8)
        staged = build_staged(toy_model(n_states=6, n_labels=(3, 2), seed=8))
        for _ in range(10):
            b = rng.dirichlet(np.ones(6))
            t1 = rng.integers(0, 2, size=3)
            m_star = rng.integers(0, 3)
            t2 = t1.copy()
            t2[m_star] = 1 - t2[m_star]
            out1 = staged.advance_prescription(
                StagedBelief(0, b), Prescription(1, t1))
            out2 = staged.advance_prescription(
                StagedBelief(0, b), Prescription(1, t2))
            l1 = np.abs(out1.probs - out2.probs).sum()
            mass = b[staged.base.Mmap[0] == m_star].sum()
            assert l1 == pytest.approx(2.0 * mass, abs=1e-12)
