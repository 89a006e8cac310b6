"""Policy evaluation and small exact oracles.

monte_carlo_eval simulates the coordinator loop (common belief shared by
both agents, prescriptions applied to each agent's realized private info);
finite_horizon_oracle and exact_vi_oracle are exhaustive references for
tiny instances.
"""

import math
import os
from dataclasses import dataclass

import numpy as np

from .model import StagedBelief, all_prescriptions


@dataclass
class EvalReport:
    episodes: int
    horizon: int
    mean: float
    std_error: float
    tail_bound: float


def default_horizon(model, precision=0.01):
    """Truncation horizon with discounted tail at most precision / 2."""
    span = max(abs(model.vmin), abs(model.vmax), 1e-12)
    return max(1, math.ceil(math.log(precision / (2.0 * span))
                            / math.log(model.discount)))


def worker_count():
    try:
        return max(1, int(os.environ.get("CHSVI_THREADS", "1")))
    except ValueError:
        return 1


class _BeliefNode:
    """Per observation-history caches of the coordinator loop."""

    __slots__ = ("prescriptions", "chance", "po", "posts", "reward_row")

    def __init__(self):
        self.prescriptions = None
        self.chance = None
        self.po = None
        self.posts = None
        self.reward_row = None


def monte_carlo_eval(staged, policy, episodes, horizon=None, seed=0,
                     cache_cap=200_000):
    """Discounted-return estimate of a coordination policy.

    Deterministic given (seed, episodes, horizon) and independent of the
    worker count: episode e draws from its own generator spawned from
    (seed, e), and the aggregation order is fixed.
    """
    if list(policy.dims) != list(staged.dims):
        raise ValueError(f"policy dims {policy.dims} do not match the model "
                         f"staged dims {staged.dims}")
    base = staged.base
    if horizon is None:
        horizon = default_horizon(base)
    beta = base.discount

    cache = {}

    def node_for(hist, belief0):
        node = cache.get(hist)
        if node is not None:
            return node
        node = _BeliefNode()
        b = belief0
        prescriptions = []
        for l in range(staged.n):
            gam = policy.prescription(b)
            prescriptions.append(gam)
            b = staged.advance_prescription(b, gam)
        node.prescriptions = prescriptions
        node.reward_row = None
        po, posts = staged.chance_profile(b)
        node.po = po
        node.posts = posts
        if len(cache) < cache_cap:
            cache[hist] = node
        return node

    returns = np.zeros(episodes)
    b0 = staged.initial_belief()
    for ep in range(episodes):
        rng = np.random.default_rng(np.random.SeedSequence((seed, ep)))
        s = int(rng.choice(base.S, p=base.b0))
        belief = b0
        hist = ()
        total = 0.0
        disc = 1.0
        for _ in range(horizon):
            node = node_for(hist, belief)
            acts = tuple(int(g.table[base.Mmap[i][s]])
                         for i, g in enumerate(node.prescriptions))
            row = s * base.AT + base.joint_action_index(acts)
            total += disc * base._r[row]
            disc *= beta
            pvec = base._P.getrow(row)
            t = rng.choice(pvec.indices.size, p=pvec.data)
            col = int(pvec.indices[t])
            o, s = divmod(col, base.S)
            belief = StagedBelief(0, node.posts[o])
            hist = hist + (o,)
            if hist not in cache and len(cache) >= cache_cap:
                hist = None  # beyond the cache: recompute from the belief
                break
        if hist is None:
            # resume uncached: identical dynamics, per-step recompute
            remaining = horizon - int(round(math.log(disc, beta)))
            total += _rollout(staged, policy, belief, s, rng, disc, beta,
                              remaining)
        returns[ep] = total

    mean = float(returns.mean())
    se = float(returns.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
    tail = beta ** horizon * max(abs(base.vmin), abs(base.vmax))
    return EvalReport(episodes, horizon, mean, se, tail)


def _rollout(staged, policy, belief, s, rng, disc, beta, steps):
    base = staged.base
    total = 0.0
    for _ in range(steps):
        b = belief
        acts = []
        for l in range(staged.n):
            gam = policy.prescription(b)
            acts.append(int(gam.table[base.Mmap[l][s]]))
            b = staged.advance_prescription(b, gam)
        row = s * base.AT + base.joint_action_index(tuple(acts))
        total += disc * base._r[row]
        disc *= beta
        pvec = base._P.getrow(row)
        t = rng.choice(pvec.indices.size, p=pvec.data)
        o, s = divmod(int(pvec.indices[t]), base.S)
        belief, _ = staged.advance_chance(b, o)
    return total


def finite_horizon_oracle(staged, T, node_guard=10 ** 6):
    """Optimal T-step discounted value at b0 by exhaustive backward search.

    Enumerates every prescription tuple at every reachable common belief;
    exact up to float arithmetic.  Refuses above ``node_guard`` nodes.
    """
    base = staged.base
    tuples = 1
    for i in range(base.I):
        tuples *= base.A[i] ** base.M[i]
    est = 1
    for _ in range(T):
        est = est * tuples * base.O + 1
        if est > node_guard:
            raise ValueError(f"oracle would visit about {est} belief nodes, "
                             f"above the guard {node_guard}")

    presc = [list(all_prescriptions(base.A[i], base.M[i], i + 1))
             for i in range(base.I)]

    def value(belief, t):
        if t == 0:
            return 0.0
        best = -np.inf
        stack = [(belief, 0)]

        def recurse(b, l):
            if l == staged.n:
                po, posts = staged.chance_profile(b)
                acc = staged.expected_reward(b)
                for o in np.nonzero(po > 0.0)[0]:
                    acc += (base.discount * po[o]
                            * value(StagedBelief(0, posts[o]), t - 1))
                return acc
            out = -np.inf
            for gam in presc[l]:
                out = max(out, recurse(staged.advance_prescription(b, gam), l + 1))
            return out

        del stack
        best = recurse(belief, 0)
        return best

    return value(staged.initial_belief(), T)


def exact_vi_oracle(model, iterations, size_guard=(6, 6, 6)):
    """Literal alpha-vector value iteration for a single-agent model.

    Starts from the zero vector and applies the doubly-exponential update
    (one new vector per action and per observation-to-vector map), pruning
    pointwise-dominated vectors after each sweep.  Returns the final list
    and the per-sweep pre-prune growth counts.
    """
    if model.I != 1 or model.M != (1,):
        raise ValueError("oracle needs one agent with singleton private info")
    S, A, O = model.S, model.AT, model.O
    gS, gA, gO = size_guard
    if S > gS or A > gA or O > gO or iterations > 4:
        raise ValueError("instance above the exact-VI size guard")

    R = np.zeros((A, O, S, S))
    for a in range(A):
        block = model._P[a::A].toarray()          # (S, O*S)
        R[a] = block.reshape(S, O, S).transpose(1, 0, 2)
    r = np.array([model._r[a::A] for a in range(A)])  # (A, S)

    V = [np.zeros(S)]
    growth = []
    for _ in range(iterations):
        growth.append(A * len(V) ** O)
        new = []
        for a in range(A):
            for mu in np.ndindex(*([len(V)] * O)):
                vec = r[a].copy()
                for o in range(O):
                    vec = vec + model.discount * (R[a, o] @ V[mu[o]])
                new.append(vec)
        V = _prune_pointwise(new)
    return V, growth


def _prune_pointwise(vectors):
    keep = []
    for i, v in enumerate(vectors):
        dominated = False
        for j, w in enumerate(vectors):
            if i == j:
                continue
            if np.all(w >= v) and (np.any(w > v) or j < i):
                dominated = True
                break
        if not dominated:
            keep.append(v)
    return keep
