"""Benchmark model generators and the all-information relaxation.

DecTiger(N, d, beta): two agents in front of N doors share their actions
and listening observations with a delay of d steps; the undelivered history
is private and rides along in the state.  MultiCast(C1, C2, p1, p2, beta):
two transmitters with private buffer occupancies share one collision
channel; actions are public.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as spsp

from .model import DecModel

EMPTY = "-"


@dataclass
class DecTigerParams:
    N: int
    d: int
    beta: float

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("need at least two doors")
        if self.d < 1:
            raise ValueError("sharing delay must be >= 1")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        self.p = 0.85 / (0.7 + 0.15 * self.N)
        self.q = 0.15 / (0.7 + 0.15 * self.N)
        assert abs(self.p + (self.N - 1) * self.q - 1.0) < 1e-12


@dataclass
class MultiCastParams:
    C1: int
    C2: int
    p1: float
    p2: float
    beta: float
    c_D: float = 2.0
    c_T: float = 0.5

    def __post_init__(self):
        if min(self.C1, self.C2) < 1:
            raise ValueError("buffer sizes must be >= 1")
        if not (0.0 < self.p1 < 1.0 and 0.0 < self.p2 < 1.0):
            raise ValueError("arrival probabilities must lie in (0, 1)")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("discount must lie in (0, 1)")


def _dectiger_reward(N, tiger, a1, a2):
    """Table of instantaneous rewards; action 0 is listen, k+1 opens door k."""
    open1 = a1 - 1 if a1 > 0 else None
    open2 = a2 - 1 if a2 > 0 else None
    if open1 is None and open2 is None:
        return -2.0
    if open1 is None or open2 is None:
        opened = open1 if open1 is not None else open2
        return -101.0 if opened == tiger else 20.0 / N - 1.0
    hits = (open1 == tiger) + (open2 == tiger)
    if hits == 2:
        return -50.0
    if hits == 1:
        return -100.0
    return 40.0 / N


def _pair_id(z, a):
    z1, z2 = z
    a1, a2 = a
    return f"z{z1}.{z2}a{a1}.{a2}"


def _blk_id(blk):
    if not blk:
        return EMPTY
    return ";".join(_pair_id(z, a) for z, a in blk)


def _private_id(blk, i):
    if not blk:
        return EMPTY
    return ";".join(f"z{z[i]}a{a[i]}" for z, a in blk)


def gen_dectiger(params: DecTigerParams) -> DecModel:
    """Build the delayed-sharing tiger model.

    States are (tiger position, synchronized block queue); the queue holds
    the last min(t, d) joint (observation, action) pairs, and the oldest
    pair is published as the common observation once the queue is full.
    """
    N, d = params.N, params.d
    nA = N + 1
    agents = ["agent1", "agent2"]
    actions = [[("listen" if a == 0 else f"open{a - 1}") for a in range(nA)]
               for _ in agents]

    pairs = [((z1, z2), (a1, a2))
             for z1 in range(N) for z2 in range(N)
             for a1 in range(nA) for a2 in range(nA)]
    blks = [()]
    frontier = [()]
    for _ in range(d):
        frontier = [blk + (pr,) for blk in frontier for pr in pairs]
        blks.extend(frontier)

    state_tuples = [(t, blk) for blk in blks for t in range(N)]
    states = [f"t{t}|{_blk_id(blk)}" for t, blk in state_tuples]
    sidx = {st: k for k, st in enumerate(state_tuples)}

    observations = [EMPTY] + [_pair_id(z, a) for z, a in pairs]
    oidx = {EMPTY: 0}
    oidx.update({pr: k + 1 for k, pr in enumerate(pairs)})

    private_labels, Mmap = _derive_private(
        [[_private_id(blk, i) for t, blk in state_tuples] for i in range(2)])

    S, AT = len(state_tuples), nA * nA
    b0 = np.zeros(S)
    for t in range(N):
        b0[sidx[(t, ())]] = 1.0 / N

    P = spsp.lil_matrix((S * AT, len(observations) * S))
    r = np.zeros(S * AT)
    for (tiger, blk), s in sidx.items():
        aged = oidx[blk[0]] if len(blk) == d else 0
        for a1 in range(nA):
            for a2 in range(nA):
                row = s * AT + a1 * nA + a2
                r[row] = _dectiger_reward(N, tiger, a1, a2)
                listening = a1 == 0 and a2 == 0
                for z1 in range(N):
                    for z2 in range(N):
                        if listening:
                            pz = ((params.p if z1 == tiger else params.q)
                                  * (params.p if z2 == tiger else params.q))
                            nexts = [(tiger, pz)]
                        else:
                            nexts = [(t2, 1.0 / (N * N * N))
                                     for t2 in range(N)]
                        pr = ((z1, z2), (a1, a2))
                        tail = blk[1:] if len(blk) == d else blk
                        blk2 = tail + (pr,)
                        for t2, p in nexts:
                            sp = sidx[(t2, blk2)]
                            P[row, aged * S + sp] += p

    return DecModel(agents, states, actions, private_labels, Mmap,
                    observations, b0, P.tocsr(), r, params.beta)


def gen_multicast(params: MultiCastParams) -> DecModel:
    """Build the two-transmitter broadcast model on buffer occupancies."""
    caps = (params.C1, params.C2)
    arr = (params.p1, params.p2)
    agents = ["tx1", "tx2"]
    actions = [["NT", "T"], ["NT", "T"]]
    state_tuples = [(n1, n2) for n1 in range(caps[0] + 1)
                    for n2 in range(caps[1] + 1)]
    states = [f"q{n1}.{n2}" for n1, n2 in state_tuples]
    sidx = {st: k for k, st in enumerate(state_tuples)}
    observations = [f"{x}|{y}" for x in ("NT", "T") for y in ("NT", "T")]

    private_labels, Mmap = _derive_private(
        [[str(st[i]) for st in state_tuples] for i in range(2)])

    S, AT = len(state_tuples), 4
    b0 = np.zeros(S)
    b0[sidx[(0, 0)]] = 1.0

    P = spsp.lil_matrix((S * AT, len(observations) * S))
    r = np.zeros(S * AT)
    for (n1, n2), s in sidx.items():
        for a1 in range(2):
            for a2 in range(2):
                row = s * AT + a1 * 2 + a2
                o = a1 * 2 + a2
                for i, (n, a) in enumerate(((n1, a1), (n2, a2))):
                    r[row] += (-n - params.c_D * arr[i] * (n == caps[i])
                               - params.c_T * (a == 1))
                # lone transmitter succeeds; simultaneous attempts collide
                after = [n1, n2]
                if a1 == 1 and a2 == 0 and n1 > 0:
                    after[0] -= 1
                if a2 == 1 and a1 == 0 and n2 > 0:
                    after[1] -= 1
                for arr1 in (0, 1):
                    for arr2 in (0, 1):
                        p = ((arr[0] if arr1 else 1 - arr[0])
                             * (arr[1] if arr2 else 1 - arr[1]))
                        nxt = (min(after[0] + arr1, caps[0]),
                               min(after[1] + arr2, caps[1]))
                        P[row, o * S + sidx[nxt]] += p

    return DecModel(agents, states, actions, private_labels, Mmap,
                    observations, b0, P.tocsr(), r, params.beta)


def relax_model(model: DecModel) -> DecModel:
    """All-information-common relaxation.

    One synthetic agent plays the joint actions and the common observation
    grows to (o, next private tuple), so every formerly private label is
    revealed one step later.  Its optimal value dominates the original's at
    beliefs whose private tuple is common knowledge.
    """
    joint_ids = []
    for k in range(model.AT):
        acts = model.joint_action_tuple(k)
        joint_ids.append("+".join(model.actions[i][a]
                                  for i, a in enumerate(acts)))

    mkey = np.zeros(model.S, dtype=np.int64)
    scale = 1
    for i in range(model.I):
        mkey += model.Mmap[i] * scale
        scale *= model.M[i]

    def m_id(s):
        return "+".join(model.private_labels[i][model.Mmap[i][s]]
                        for i in range(model.I))

    coo = model._P.tocoo()
    src_o, src_sp = np.divmod(coo.col, model.S)
    pair_codes = src_o * scale + mkey[src_sp]
    codes = np.unique(pair_codes)
    code_pos = {int(cd): k for k, cd in enumerate(codes)}
    obs_ids = []
    for cd in codes:
        o, mk = divmod(int(cd), scale)
        rep = int(np.nonzero(mkey == mk)[0][0])
        obs_ids.append(f"{model.observations[o]}&{m_id(rep)}")

    new_col = (np.array([code_pos[int(cd)] for cd in pair_codes])
               * model.S + src_sp)
    P = spsp.csr_matrix((coo.data, (coo.row, new_col)),
                        shape=(model.S * model.AT, len(obs_ids) * model.S))

    return DecModel(
        agents=["all"],
        states=list(model.states),
        actions=[joint_ids],
        private_labels=[["*"]],
        Mmap=np.zeros((1, model.S), dtype=np.int64),
        observations=obs_ids,
        b0=model.b0.copy(),
        P=P,
        r=model._r.copy(),
        discount=model.discount,
    )


def _derive_private(label_columns):
    """First-appearance label order per agent, plus the index map."""
    private_labels, Mmap = [], []
    for col in label_columns:
        order, index = [], {}
        for lab in col:
            if lab not in index:
                index[lab] = len(order)
                order.append(lab)
        private_labels.append(order)
        Mmap.append([index[lab] for lab in col])
    return private_labels, np.array(Mmap, dtype=np.int64)
