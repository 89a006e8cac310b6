"""Multi-agent control model and its staged coordinator form.

A model couples a finite state space with per-agent action sets, per-agent
private-information labels (a fixed function of the state), a common
observation channel, a sparse joint transition/observation kernel and a
discounted reward.  ``StagedModel`` re-times each step into n prescription
stages (one per agent, in declared order) followed by a chance stage, which
is the form the solver works on.
"""

import numpy as np
import scipy.sparse as spsp

PROB_TOL = 1e-9


class DecModel:
    """Multi-agent control model with private info encoded in the state.

    Properties:
    agents: list of agent ids
    states, observations: lists of ids
    actions: per-agent lists of action ids
    private_labels: per-agent lists of private-information labels
    Mmap: I x S int array, Mmap[i, s] = index of agent i's label at state s
    b0: initial distribution over states
    discount: scalar in (0, 1)
    S, I, O: sizes; A: tuple of per-agent action counts; AT: joint count
    _P: (S*AT) x (O*S) csr matrix, row (s, a) flattened C-order,
        column (o, s') flattened C-order, entry Pr(s', o | s, a)
    _r: (S*AT) reward array, same row order
    """

    def __init__(self, agents, states, actions, private_labels, Mmap,
                 observations, b0, P, r, discount):
        self.agents = list(agents)
        self.states = list(states)
        self.actions = [list(a) for a in actions]
        self.private_labels = [list(m) for m in private_labels]
        self.Mmap = np.asarray(Mmap, dtype=np.int64)
        self.observations = list(observations)
        self.b0 = np.asarray(b0, dtype=np.float64)
        self.discount = float(discount)

        self.I = len(self.agents)
        self.S = len(self.states)
        self.O = len(self.observations)
        self.A = tuple(len(a) for a in self.actions)
        self.AT = int(np.prod(self.A)) if self.A else 1
        self.M = tuple(len(m) for m in self.private_labels)

        self._P = spsp.csr_matrix(P, shape=(self.S * self.AT, self.O * self.S))
        self._r = np.asarray(r, dtype=np.float64).reshape(self.S * self.AT)

    @property
    def vmin(self):
        return float(np.min(self._r)) / (1.0 - self.discount)

    @property
    def vmax(self):
        return float(np.max(self._r)) / (1.0 - self.discount)

    def joint_action_index(self, acts):
        return int(np.ravel_multi_index(tuple(acts), self.A))

    def joint_action_tuple(self, idx):
        return tuple(int(v) for v in np.unravel_index(idx, self.A))

    def kernel_row(self, s, acts):
        """Outgoing entries for (s, joint action) as (s', o, p) triples."""
        row = self._P.getrow(s * self.AT + self.joint_action_index(acts))
        out = []
        for col, p in zip(row.indices, row.data):
            o, sp = divmod(int(col), self.S)
            out.append((sp, o, float(p)))
        return out

    def reward(self, s, acts):
        return float(self._r[s * self.AT + self.joint_action_index(acts)])

    def structurally_equal(self, other):
        return (
            self.agents == other.agents
            and self.states == other.states
            and self.actions == other.actions
            and self.private_labels == other.private_labels
            and np.array_equal(self.Mmap, other.Mmap)
            and self.observations == other.observations
            and np.array_equal(self.b0, other.b0)
            and self.discount == other.discount
            and np.array_equal(self._r, other._r)
            and (self._P != other._P).nnz == 0
        )


class Prescription:
    """A mapping from one agent's private-information labels to its actions.

    table[m] is the action index agent ``agent`` plays at private label m.
    """

    __slots__ = ("agent", "table")

    def __init__(self, agent, table):
        self.agent = int(agent)
        self.table = np.asarray(table, dtype=np.int64)

    def indicator(self, n_actions):
        """0-1 view g[a, m] = 1 iff table[m] = a."""
        g = np.zeros((n_actions, self.table.size))
        g[self.table, np.arange(self.table.size)] = 1.0
        return g

    def __eq__(self, other):
        return (isinstance(other, Prescription) and self.agent == other.agent
                and np.array_equal(self.table, other.table))

    def __repr__(self):
        return f"Prescription(agent={self.agent}, table={self.table.tolist()})"


class StagedBelief:
    """Distribution over one stage's composite states."""

    __slots__ = ("stage", "probs")

    def __init__(self, stage, probs):
        self.stage = int(stage)
        self.probs = np.asarray(probs, dtype=np.float64)

    def __repr__(self):
        return f"StagedBelief(stage={self.stage}, mass={self.probs.sum():.6f})"


def validate_model(model):
    """Collect invariant violations; an empty list means the model is valid."""
    bad = []
    if not (0.0 < model.discount < 1.0):
        bad.append(f"discount: {model.discount} outside (0, 1)")
    if model.b0.shape != (model.S,):
        bad.append(f"b0 shape: {model.b0.shape} != ({model.S},)")
        return bad
    if np.any(model.b0 < -PROB_TOL):
        s = int(np.argmin(model.b0))
        bad.append(f"b0 negative: state {model.states[s]} has {model.b0[s]}")
    mass = float(model.b0.sum())
    if abs(mass - 1.0) > PROB_TOL:
        bad.append(f"b0 mass: sums to {mass!r}, expected 1")

    if model.Mmap.shape != (model.I, model.S):
        bad.append(f"private map shape: {model.Mmap.shape} != "
                   f"({model.I}, {model.S})")
        return bad
    for i in range(model.I):
        col = model.Mmap[i]
        if np.any(col < 0) or np.any(col >= model.M[i]):
            bad.append(f"private map: agent {model.agents[i]} has an "
                       "out-of-range label index")
            continue
        seen = np.bincount(col, minlength=model.M[i])
        for m in np.nonzero(seen == 0)[0]:
            bad.append(f"private label unattained: agent {model.agents[i]} "
                       f"label {model.private_labels[i][m]}")

    if np.any(model._P.data < -PROB_TOL):
        bad.append("kernel negative: some transition probability < 0")
    rowmass = np.asarray(model._P.sum(axis=1)).ravel()
    for k in np.nonzero(np.abs(rowmass - 1.0) > PROB_TOL)[0]:
        s, a = divmod(int(k), model.AT)
        acts = model.joint_action_tuple(a)
        names = tuple(model.actions[i][ai] for i, ai in enumerate(acts))
        bad.append(f"row mass: state {model.states[s]} action {names} "
                   f"sums to {rowmass[k]!r}")
    if not np.all(np.isfinite(model._r)):
        bad.append("reward: non-finite entry")
    return bad


class InvalidModelError(ValueError):
    def __init__(self, violations):
        super().__init__("invalid model:\n" + "\n".join(violations))
        self.violations = violations


class StagedModel:
    """Extended coordinator form of a DecModel.

    Stage l in 0..n-1 is agent (l+1)'s prescription stage over
    S^l = S x A^1 x ... x A^l; stage n is the chance stage over S x A where
    the base reward and kernel apply and the discount is charged once.

    Properties:
    base: the DecModel
    n: number of agents (= index of the chance stage)
    dims[l]: |S^l|;  shapes[l]: (S, A^1..A^l)
    base_of[l]: dims[l] int array, base-state part of each composite
    m_next[l]: dims[l] int array (l < n), private label of agent l+1
    reward: stage-n reward vector (= base reward, reindexed identically)
    """

    def __init__(self, base):
        bad = validate_model(base)
        if bad:
            raise InvalidModelError(bad)
        self.base = base
        self.n = base.I
        self.shapes = [(base.S, *base.A[:l]) for l in range(self.n + 1)]
        self.dims = [int(np.prod(shp)) for shp in self.shapes]

        self.base_of = []
        self.m_next = []
        for l in range(self.n + 1):
            tail = int(np.prod(base.A[:l])) if l else 1
            ids = np.arange(self.dims[l], dtype=np.int64)
            self.base_of.append(ids // tail)
            if l < self.n:
                self.m_next.append(base.Mmap[l][self.base_of[l]])
        self.reward = base._r
        self._P = base._P

    # index maps -----------------------------------------------------------
    def composite_index(self, stage, s, acts=()):
        return int(np.ravel_multi_index((s, *acts), self.shapes[stage]))

    def composite_parts(self, stage, idx):
        parts = np.unravel_index(idx, self.shapes[stage])
        return tuple(int(v) for v in parts)

    def initial_belief(self):
        return StagedBelief(0, self.base.b0.copy())

    # belief updates -------------------------------------------------------
    def advance_prescription(self, belief, gamma):
        """Lift a stage-l belief through agent (l+1)'s prescription.

        Mass is preserved exactly: the output is a scatter of the input
        entries to distinct composite slots in increasing order.
        """
        l = belief.stage
        if l >= self.n:
            raise ValueError(f"stage {l} is the chance stage, not a "
                             "prescription stage")
        if gamma.agent != l + 1:
            raise ValueError(f"prescription is for agent {gamma.agent}, "
                             f"stage {l} needs agent {l + 1}")
        nai = self.base.A[l]
        chosen = gamma.table[self.m_next[l]]
        out = np.zeros(self.dims[l + 1])
        out[np.arange(self.dims[l]) * nai + chosen] = belief.probs
        return StagedBelief(l + 1, out)

    def chance_profile(self, belief):
        """All-observation pushforward of a stage-n belief.

        Returns (po, posts): po[o] = Pr(o|b); posts[o] the normalized
        posterior over S (rows with po[o] = 0 are left as zeros).
        """
        if belief.stage != self.n:
            raise ValueError(f"stage {belief.stage} is not the chance stage")
        joint = (belief.probs @ self._P).reshape(self.base.O, self.base.S)
        po = joint.sum(axis=1)
        posts = np.zeros_like(joint)
        pos = po > 0.0
        posts[pos] = joint[pos] / po[pos, None]
        return po, posts

    def advance_chance(self, belief, o):
        """Posterior after observing o from a stage-n belief.

        Returns (posterior StagedBelief or None, Pr(o|b)); the posterior is
        None exactly when Pr(o|b) = 0.
        """
        po, posts = self.chance_profile(belief)
        p = float(po[o])
        if p <= 0.0:
            return None, 0.0
        return StagedBelief(0, posts[o]), p

    def expected_reward(self, belief):
        if belief.stage != self.n:
            raise ValueError(f"stage {belief.stage} is not the chance stage")
        return float(belief.probs @ self.reward)


def build_staged(model):
    """Validate the model and build its extended staged form."""
    return StagedModel(model)


def all_prescriptions(n_actions, n_labels, agent):
    """Iterate every prescription table for one agent (test/oracle helper)."""
    for flat in np.ndindex(*([n_actions] * n_labels)):
        yield Prescription(agent, np.array(flat, dtype=np.int64))
