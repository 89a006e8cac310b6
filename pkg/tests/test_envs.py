"""Generator contracts: sizes, rewards, dynamics, relaxation, round trips."""

import numpy as np
import pytest

from chsvi.envs import (DecTigerParams, MultiCastParams, gen_dectiger,
                        gen_multicast, relax_model)
from chsvi.model import build_staged, validate_model
from chsvi.modelio import ModelParseError, load_model, save_model
from chsvi.model import InvalidModelError


@pytest.fixture(scope="module")
def tiger21():
    return gen_dectiger(DecTigerParams(2, 1, 0.9))


@pytest.fixture(scope="module")
def mcast():
    return gen_multicast(MultiCastParams(2, 2, 0.1, 0.2, 0.9))


class TestDecTiger:
    def test_params_invariant(self):
        for N in (2, 3, 5):
            p = DecTigerParams(N, 1, 0.9)
            assert abs(p.p + (N - 1) * p.q - 1.0) < 1e-12
        assert DecTigerParams(2, 1, 0.9).p == pytest.approx(0.85)

    def test_sizes_n2(self, tiger21):
        assert tiger21.S == 74
        assert tiger21.O == 37
        assert tiger21.M == (7, 7)
        assert tiger21.A == (3, 3)
        assert validate_model(tiger21) == []

    def test_sizes_n3(self):
        m = gen_dectiger(DecTigerParams(3, 1, 0.9))
        assert m.S == 435
        assert m.O == 145
        assert m.M == (13, 13)
        assert m.A == (4, 4)
        assert validate_model(m) == []

    def test_staged_dims_n2(self, tiger21):
        staged = build_staged(tiger21)
        assert staged.dims == [74, 222, 666]

    def test_rewards_table(self, tiger21):
        # tiger behind door 0 in an initial state
        s = int(np.nonzero(tiger21.b0)[0][0])
        assert tiger21.states[s].startswith("t0|")
        listen, open_tiger, open_other = 0, 1, 2
        assert tiger21.reward(s, (listen, listen)) == -2.0
        assert tiger21.reward(s, (open_tiger, open_tiger)) == -50.0
        assert tiger21.reward(s, (listen, open_other)) == pytest.approx(9.0)
        assert tiger21.reward(s, (open_other, listen)) == pytest.approx(9.0)
        assert tiger21.reward(s, (open_tiger, listen)) == -101.0
        assert tiger21.reward(s, (open_other, open_other)) == 20.0
        assert tiger21.reward(s, (open_tiger, open_other)) == -100.0

    def test_listen_kernel_is_conditionally_independent(self, tiger21):
        p, q = 0.85, 0.15
        s = int(np.nonzero(tiger21.b0)[0][0])  # tiger 0, empty block
        out = tiger21.kernel_row(s, (0, 0))
        assert len(out) == 4  # 2x2 observation pairs, tiger stays
        probs = {}
        for sp, o, pr in out:
            assert tiger21.observations[o] == "-"
            assert tiger21.states[sp].startswith("t0|")
            blk = tiger21.states[sp].split("|")[1]
            probs[blk] = pr
        assert probs["z0.0a0.0"] == pytest.approx(p * p)
        assert probs["z0.1a0.0"] == pytest.approx(p * q)
        assert probs["z1.1a0.0"] == pytest.approx(q * q)

    def test_open_resets_uniformly(self, tiger21):
        s = int(np.nonzero(tiger21.b0)[0][0])
        out = tiger21.kernel_row(s, (1, 0))  # agent 1 opens door 0
        # uniform over 2 tigers x 4 observation pairs
        assert len(out) == 8
        for sp, o, pr in out:
            assert pr == pytest.approx(1.0 / 8.0)

    def test_b0(self, tiger21):
        assert tiger21.b0.sum() == pytest.approx(1.0)
        assert np.count_nonzero(tiger21.b0) == 2
        assert set(tiger21.b0[tiger21.b0 > 0]) == {0.5}

    def test_d2_sizes(self):
        m = gen_dectiger(DecTigerParams(2, 2, 0.9))
        assert m.S == 2 * (1 + 36 + 36 * 36)
        assert validate_model(m) == []


class TestMultiCast:
    def test_sizes(self, mcast):
        assert mcast.S == 9
        assert mcast.O == 4
        assert mcast.M == (3, 3)
        assert validate_model(mcast) == []

    def test_appendix_sizes_8(self):
        m = gen_multicast(MultiCastParams(8, 8, 0.1, 0.2, 0.9))
        assert m.S == 81
        staged = build_staged(m)
        assert staged.dims == [81, 162, 324]
        assert validate_model(m) == []

    def test_reward_formula_full_buffer(self, mcast):
        s = mcast.states.index("q2.1")
        # r1 = -2 - 2*0.1 - 0.5 at (s1=C1, a1=T); r2 = -1
        assert mcast.reward(s, (1, 0)) == pytest.approx(-2 - 0.2 - 0.5 - 1)

    def test_reward_nonpositive(self, mcast):
        assert np.all(mcast._r <= 0.0)

    def test_collision_keeps_buffers(self, mcast):
        s = mcast.states.index("q1.1")
        out = mcast.kernel_row(s, (1, 1))
        # both transmit: collision; packets stay, arrivals on top
        landing = {mcast.states[sp]: pr for sp, o, pr in out}
        assert landing["q1.1"] == pytest.approx(0.9 * 0.8)
        assert landing["q2.2"] == pytest.approx(0.1 * 0.2)
        for sp, o, pr in out:
            assert mcast.observations[o] == "T|T"

    def test_transition_from_empty(self, mcast):
        s = mcast.states.index("q0.0")
        out = mcast.kernel_row(s, (0, 0))
        landing = {mcast.states[sp]: pr for sp, o, pr in out}
        assert landing["q1.1"] == pytest.approx(0.1 * 0.2)
        assert landing["q0.0"] == pytest.approx(0.9 * 0.8)

    def test_successful_transmit_removes_packet(self, mcast):
        s = mcast.states.index("q1.0")
        out = mcast.kernel_row(s, (1, 0))
        landing = {mcast.states[sp]: pr for sp, o, pr in out}
        assert landing["q0.0"] == pytest.approx(0.9 * 0.8)

    def test_empty_transmit_pays_cost_removes_nothing(self, mcast):
        s = mcast.states.index("q0.0")
        assert mcast.reward(s, (1, 0)) == pytest.approx(-0.5)
        out = mcast.kernel_row(s, (1, 0))
        landing = {mcast.states[sp]: pr for sp, o, pr in out}
        assert landing["q0.0"] == pytest.approx(0.9 * 0.8)


class TestRelax:
    def test_dectiger_relax_shapes(self, tiger21):
        r = relax_model(tiger21)
        assert r.I == 1
        assert r.A == (9,)
        assert r.M == (1,)
        assert r.S == 74
        assert validate_model(r) == []

    def test_multicast_relax_observation_space(self, mcast):
        r = relax_model(mcast)
        # observation = (joint action, next buffer pair): newline per combo
        assert r.I == 1
        assert all("&" in oid for oid in r.observations)
        assert validate_model(r) == []

    def test_relax_idempotent_sizes(self, mcast):
        r2 = relax_model(relax_model(mcast))
        assert r2.S == mcast.S
        assert validate_model(r2) == []


class TestInterchange:
    def test_round_trip(self, tmp_path, mcast):
        path = tmp_path / "m.json"
        save_model(mcast, path)
        again = load_model(path)
        assert mcast.structurally_equal(again)

    def test_round_trip_dectiger(self, tmp_path, tiger21):
        path = tmp_path / "t.json"
        save_model(tiger21, path)
        assert tiger21.structurally_equal(load_model(path))

    def test_unknown_action_named(self, tmp_path, mcast):
        import json
        path = tmp_path / "m.json"
        save_model(mcast, path)
        doc = json.loads(path.read_text())
        doc["kernel"][3]["a"] = ["bogus", "NT"]
        path.write_text(json.dumps(doc))
        with pytest.raises(ModelParseError, match=r"kernel\[3\].*bogus"):
            load_model(path)

    def test_bad_row_mass_reported(self, tmp_path, mcast):
        import json
        path = tmp_path / "m.json"
        save_model(mcast, path)
        doc = json.loads(path.read_text())
        victim = doc["kernel"][0]
        for rec in doc["kernel"]:
            if rec["s"] == victim["s"] and rec["a"] == victim["a"]:
                rec["p"] *= 0.5
        path.write_text(json.dumps(doc))
        with pytest.raises(InvalidModelError, match="row mass"):
            load_model(path)
