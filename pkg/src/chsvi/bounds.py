"""Certified per-stage value bounds.

The lower bound is a set of alpha-vectors per stage (point-based backups
insert supports, pointwise-dominance pruning trims them); the upper bound
is a polytope of alpha-constraints per stage queried by LP, updated with a
bilinear program at prescription stages and per-observation LPs at the
chance stage.  Soundness contract: every constraint holds for every
alpha-vector of the optimal stage value, so L <= V* <= U throughout.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as spsp

from .lp import SolverStats
from .lp.bilinear import BilinearPrescriptionProgram, solve_bp
from .lp.polytope import Polytope
from .model import Prescription

LB_PRUNE_EVERY = 64
UB_PRUNE_EVERY = 32
ENUM_CUTOFF = 4096


@dataclass
class AlphaVector:
    stage: int
    values: np.ndarray
    tag: Prescription | None
    birth: int


class _StageVectors:
    """Growing matrix of alpha-vectors with insertion-order ages."""

    def __init__(self, dim):
        self.dim = dim
        self._buf = np.zeros((8, dim))
        self.k = 0
        self.tags = []
        self.births = []
        self.since_prune = 0
        self.settled = 0      # leading rows already mutually undominated

    @property
    def V(self):
        return self._buf[: self.k]

    def append(self, values, tag, birth):
        if self.k == self._buf.shape[0]:
            buf = np.zeros((2 * self.k, self.dim))
            buf[: self.k] = self._buf[: self.k]
            self._buf = buf
        self._buf[self.k] = values
        self.tags.append(tag)
        self.births.append(birth)
        self.k += 1
        self.since_prune += 1

    def compact(self, keep):
        self._buf[: len(keep)] = self._buf[keep]
        self.tags = [self.tags[i] for i in keep]
        self.births = [self.births[i] for i in keep]
        self.k = len(keep)
        self.settled = self.k
        self.since_prune = 0


class LowerBoundSet:
    """Stage-indexed alpha-vector sets; values only ever rise."""

    def __init__(self, staged, stats=None):
        self.staged = staged
        self.stats = stats if stats is not None else SolverStats()
        self.stages = [_StageVectors(d) for d in staged.dims]
        self.birth_counter = 0
        self.backup_ops = 0   # (alpha, label, action, supported-state) tuples
        self._groups = []
        for l in range(staged.n):
            mi = staged.base.M[l]
            G = np.zeros((mi, staged.dims[l]))
            G[staged.m_next[l], np.arange(staged.dims[l])] = 1.0
            self._groups.append(G)

    def sizes(self):
        return [sv.k for sv in self.stages]

    def seed(self, stage, values, tag=None):
        """Insert an externally certified vector (init / test oracles)."""
        self.birth_counter += 1
        self.stages[stage].append(values, tag, self.birth_counter)

    def value(self, belief):
        val, _ = self.value_argmax(belief)
        return val

    def value_argmax(self, belief):
        sv = self.stages[belief.stage]
        if sv.k == 0:
            raise RuntimeError("lower bound queried before initialization")
        scores = sv.V @ belief.probs
        idx = int(np.argmax(scores))
        return float(scores[idx]), idx

    def vector(self, stage, idx):
        sv = self.stages[stage]
        return AlphaVector(stage, sv.V[idx].copy(), sv.tags[idx],
                           sv.births[idx])

    def backup(self, belief):
        """Point-based Bellman backup at one belief; inserts the support."""
        l = belief.stage
        staged = self.staged
        if l < staged.n:
            nxt = self.stages[l + 1]
            if nxt.k == 0:
                raise RuntimeError("backup needs a nonempty next-stage set")
            nA = staged.base.A[l]
            k = nxt.k
            W = nxt.V.reshape(k, staged.dims[l], nA) * belief.probs[None, :, None]
            Z = np.einsum("ms,ksa->kma", self._groups[l], W)
            self.backup_ops += k * staged.dims[l] * nA
            gam = np.argmax(Z, axis=2)                    # (k, M)
            J = np.max(Z, axis=2).sum(axis=1)             # (k,)
            star = int(np.argmax(J))
            table = gam[star].astype(np.int64)
            chosen = table[staged.m_next[l]]
            values = nxt.V[star].reshape(staged.dims[l], nA)[
                np.arange(staged.dims[l]), chosen]
            tag = Prescription(l + 1, table)
        else:
            v0 = self.stages[0]
            if v0.k == 0:
                raise RuntimeError("backup needs a nonempty stage-0 set")
            joint = (belief.probs @ staged._P).reshape(
                staged.base.O, staged.base.S)
            scores = joint @ v0.V.T                        # (O, k0)
            choice = np.argmax(scores, axis=1)
            Y = v0.V[choice].ravel()                       # (O*S,) o-major
            values = staged.reward + staged.base.discount * (staged._P @ Y)
            tag = None
        self.birth_counter += 1
        sv = self.stages[l]
        sv.append(values, tag, self.birth_counter)
        if sv.since_prune >= LB_PRUNE_EVERY:
            self.prune(l)
        return AlphaVector(l, values.copy(), tag, self.birth_counter)

    def prune(self, stage=None):
        """Drop pointwise-dominated vectors (ties keep the older one)."""
        if stage is None:
            return sum(self.prune(l) for l in range(len(self.stages)))
        sv = self.stages[stage]
        k = sv.k
        if k <= 1 or sv.settled == k:
            sv.since_prune = 0
            sv.settled = k
            return 0
        V = sv.V
        sums = V.sum(axis=1)
        removed = np.zeros(k, dtype=bool)
        # rows before `settled` survived earlier sweeps and cannot dominate
        # each other; every pair involving a new row is checked
        for j in range(sv.settled, k):
            vj = V[j]
            cand = np.nonzero(~removed & (sums <= sums[j] + 1e-12))[0]
            cand = cand[cand != j]
            if cand.size:
                ge = (vj[None, :] >= V[cand]).all(axis=1)
                victims = cand[ge]
                for i in victims:
                    strict = bool((vj > V[i]).any())
                    if strict or sv.births[j] < sv.births[i]:
                        removed[i] = True
            if removed[j]:
                continue
            cand = np.nonzero(~removed & (sums >= sums[j] - 1e-12))[0]
            cand = cand[cand != j]
            if cand.size:
                ge = (V[cand] >= vj[None, :]).all(axis=1)
                for i in cand[ge]:
                    strict = bool((V[i] > vj).any())
                    if strict or sv.births[i] < sv.births[j]:
                        removed[j] = True
                        break
        keep = [i for i in range(k) if not removed[i]]
        count = k - len(keep)
        sv.compact(keep)
        return count


class UpperBoundSet:
    """Stage-indexed alpha-constraint polytopes; values only ever fall.

    Column layout per stage: the y block over the stage states first, then
    optional auxiliary blocks (marginal-group vectors over the base states).
    Box/pointwise rows live in the column bounds; coupling and marginal
    value rows are never pruned; belief rows carry their defining belief
    and are prunable.
    """

    def __init__(self, staged, stats=None, upper_aux_stages=(),
                 lower_aux_stages=()):
        self.staged = staged
        self.stats = stats if stats is not None else SolverStats()
        base = staged.base
        self.vmin = base.vmin
        self.vmax = base.vmax
        self.n = staged.n
        self.polys = []
        self.aux_up = [None] * (self.n + 1)
        self.aux_lo = [None] * (self.n + 1)
        self.belief_rows = [[] for _ in range(self.n + 1)]  # (id, b, val, birth)
        self._since_prune = [0] * (self.n + 1)
        self.birth_counter = 0
        self.uncertified = False

        for l in range(self.n + 1):
            ncols = staged.dims[l]
            blocks = [ncols]
            if l in upper_aux_stages:
                self.aux_up[l] = ncols
                ncols += base.S
            if l in lower_aux_stages:
                self.aux_lo[l] = ncols
                ncols += base.S
            lo = np.full(ncols, self.vmin)
            up = np.full(ncols, self.vmax)
            poly = Polytope(lo, up, self.stats)
            dim = staged.dims[l]
            if self.aux_up[l] is not None:
                for idx in range(dim):
                    row = np.zeros(ncols)
                    row[idx] = 1.0
                    row[self.aux_up[l] + staged.base_of[l][idx]] = -1.0
                    poly.add_row(row, 0.0)
            if self.aux_lo[l] is not None:
                for idx in range(dim):
                    row = np.zeros(ncols)
                    row[idx] = -1.0
                    row[self.aux_lo[l] + staged.base_of[l][idx]] = 1.0
                    poly.add_row(row, 0.0)
            self.polys.append(poly)

    # --- constraint entry ---------------------------------------------------
    def _pad(self, l, b):
        c = np.zeros(self.polys[l].n)
        c[: self.staged.dims[l]] = b
        return c

    def cap_upper(self, l, idx, values):
        self.polys[l].tighten_upper(idx, values)

    def cap_lower(self, l, idx, values):
        self.polys[l].tighten_lower(idx, values)

    def add_belief_row(self, l, b, value):
        self.birth_counter += 1
        rid = self.polys[l].add_row(self._pad(l, b), value)
        self.belief_rows[l].append((rid, np.asarray(b, float).copy(),
                                    float(value), self.birth_counter))
        self._since_prune[l] += 1
        if self._since_prune[l] >= UB_PRUNE_EVERY:
            self.prune(l)

    def add_marginal_upper(self, l, b1, value):
        off = self.aux_up[l]
        if off is None:
            raise ValueError(f"stage {l} has no upper marginal block")
        row = np.zeros(self.polys[l].n)
        row[off: off + self.staged.base.S] = b1
        self.polys[l].add_row(row, float(value))

    def add_marginal_lower(self, l, b1, value):
        off = self.aux_lo[l]
        if off is None:
            raise ValueError(f"stage {l} has no lower marginal block")
        row = np.zeros(self.polys[l].n)
        row[off: off + self.staged.base.S] = -np.asarray(b1, float)
        self.polys[l].add_row(row, -float(value))

    # --- queries and updates --------------------------------------------------
    def value(self, belief):
        val, _ = self.polys[belief.stage].solve(
            self._pad(belief.stage, belief.probs))
        return float(val)

    def update(self, belief, bp_mode="auto", seed=0):
        """Bellman update at one belief; inserts the new belief row.

        Returns (vbar, prescription-or-None, info); info carries the
        chance-stage posteriors and child values for the search heuristic.
        """
        l = belief.stage
        staged = self.staged
        info = {}
        if l < self.n:
            nA = staged.base.A[l]
            nM = staged.base.M[l]
            bp = BilinearPrescriptionProgram(
                self.polys[l + 1], belief.probs, staged.m_next[l],
                nA, nM, agent=l + 1)
            mode = bp_mode
            if mode == "auto":
                mode = ("enumerate" if bp.prescription_count() <= ENUM_CUTOFF
                        else "branch_bound")
            res = solve_bp(bp, mode=mode, seed=seed, stats=self.stats)
            if res.status != "exact":
                self.uncertified = True
            vbar = res.value
            gamma = Prescription(l + 1, res.table)
        else:
            po, posts = staged.chance_profile(belief)
            u0 = np.full(po.size, np.nan)
            acc = 0.0
            for o in np.nonzero(po > 0.0)[0]:
                val, _ = self.polys[0].solve(self._pad(0, posts[o]))
                u0[o] = val
                acc += po[o] * val
            vbar = staged.expected_reward(belief) + staged.base.discount * acc
            gamma = None
            info = {"po": po, "posts": posts, "u0": u0}
        self.add_belief_row(l, belief.probs, vbar)
        return vbar, gamma, info

    def prune(self, stage=None):
        """Drop geometric-redundant belief rows (leave-one-out LP test)."""
        if stage is None:
            return sum(self.prune(l) for l in range(self.n + 1))
        rows = self.belief_rows[stage]
        poly = self.polys[stage]
        doomed = set()
        for rid, b, value, _ in list(rows):
            c = self._pad(stage, b)
            val, _, lam = poly.solve(c, want_row_duals=True)
            if val < value - 1e-9:
                # slack at the remaining-set optimum: removal cannot move it
                doomed.add(rid)
                poly.remove_rows([rid])
                continue
            if lam.get(rid, 0.0) > 1e-7:
                continue    # strictly binding: removal would raise the optimum
            val2, _ = poly.solve(c, exclude={rid})
            if val2 <= value + 1e-9:
                doomed.add(rid)
                poly.remove_rows([rid])
        if doomed:
            self.belief_rows[stage] = [rec for rec in rows
                                       if rec[0] not in doomed]
        self._since_prune[stage] = 0
        return len(doomed)

    def belief_row_counts(self):
        return [len(rows) for rows in self.belief_rows]


class CoordinationPolicy:
    """Direct-control policy: play the tag of the maximizing alpha-vector."""

    def __init__(self, dims, stage_vectors, stage_tags, stage_births,
                 meta=None):
        self.dims = list(dims)
        self.V = [np.asarray(v, float).reshape(-1, d)
                  for v, d in zip(stage_vectors, dims)]
        self.tags = stage_tags
        self.births = stage_births
        self.meta = meta or {}
        self.n = len(dims) - 1

    def prescription(self, belief):
        if belief.stage >= self.n:
            return None
        scores = self.V[belief.stage] @ belief.probs
        return self.tags[belief.stage][int(np.argmax(scores))]

    def value(self, belief):
        return float(np.max(self.V[belief.stage] @ belief.probs))

    def to_json(self):
        doc = {"dims": self.dims, "meta": self.meta, "stages": []}
        for l in range(self.n + 1):
            vecs = [v.tolist() for v in self.V[l]]
            tags = [None if t is None
                    else {"agent": t.agent, "table": t.table.tolist()}
                    for t in self.tags[l]]
            doc["stages"].append({"vectors": vecs, "tags": tags,
                                  "births": list(self.births[l])})
        return doc

    @classmethod
    def from_json(cls, doc):
        dims = doc["dims"]
        V, tags, births = [], [], []
        for l, st in enumerate(doc["stages"]):
            V.append(np.array(st["vectors"], dtype=float).reshape(-1, dims[l]))
            tags.append([None if t is None
                         else Prescription(t["agent"],
                                           np.array(t["table"], np.int64))
                         for t in st["tags"]])
            births.append(st["births"])
        return cls(dims, V, tags, births, doc.get("meta"))


def direct_control_policy(L: LowerBoundSet) -> CoordinationPolicy:
    vecs, tags, births = [], [], []
    for sv in L.stages:
        vecs.append(sv.V.copy())
        tags.append(list(sv.tags))
        births.append(list(sv.births))
    meta = {"agents": L.staged.base.agents,
            "actions": L.staged.base.actions,
            "private_labels": L.staged.base.private_labels}
    return CoordinationPolicy(L.staged.dims, vecs, tags, births, meta)


# --- fast informed bound ------------------------------------------------------
def fib_tables(model, minimize=False, tol=1e-9):
    """Per-(state, joint action) value bounds by the FIB contraction.

    maximize: fixed point from above bounds every plan's value from above;
    the mirrored minimize run bounds the reward-minimization value from
    below.  Observation branches condition on the full observation of
    ``model`` (for a relaxed model that includes the revealed private info).
    """
    S, AT, O = model.S, model.AT, model.O
    P = model._P.tocsr()
    coo = P.tocoo()
    o_of = coo.col // S
    sp_of = coo.col % S
    # segment ids for (row, o) groups, in the sparsity order of P @ R
    R = spsp.csr_matrix(
        (np.ones(O * S), (np.arange(O * S), np.repeat(np.arange(O), S))),
        shape=(O * S, O))
    Gpat = (P @ R).tocoo()
    seg_index = {(int(r), int(c)): k
                 for k, (r, c) in enumerate(zip(Gpat.row, Gpat.col))}
    seg_of = np.array([seg_index[(int(r), int(o))]
                       for r, o in zip(coo.row, o_of)], dtype=np.int64)
    nseg = len(Gpat.data)
    seg_row = Gpat.row.astype(np.int64)

    r = model._r
    beta = model.discount
    start = model.vmin if minimize else model.vmax
    Q = np.full((S, AT), start)
    pdata = coo.data
    span = abs(model.vmax - model.vmin) + 1.0
    max_iter = int(np.ceil(np.log(tol / span) / np.log(beta))) + 8
    for _ in range(max_iter):
        seg_vals = np.empty((AT, nseg))
        for a in range(AT):
            seg_vals[a] = np.bincount(seg_of, weights=pdata * Q[sp_of, a],
                                      minlength=nseg)
        agg = seg_vals.min(axis=0) if minimize else seg_vals.max(axis=0)
        flow = np.bincount(seg_row, weights=agg, minlength=S * AT)
        Qn = (r + beta * flow).reshape(S, AT)
        delta = float(np.max(np.abs(Qn - Q)))
        Q = Qn
        if delta <= tol:
            break
    return Q


@dataclass
class RelaxedSolution:
    """Bound material produced by the relaxed presolve."""
    qhat: np.ndarray                    # (S, AT) upper caps
    qcheck: np.ndarray                  # (S, AT) lower caps
    stage0_rows: list                   # (belief over S, upper value)
    chance_rows: list                   # (belief over S*AT, upper value)


def init_lower_bound(staged, stats=None) -> LowerBoundSet:
    """Fixed-action (blind) initialization: exact values of constant plans."""
    base = staged.base
    S, AT, O = base.S, base.AT, base.O
    beta = base.discount
    R = spsp.csr_matrix(
        (np.ones(O * S), (np.arange(O * S), np.tile(np.arange(S), O))),
        shape=(O * S, S))
    T = (base._P @ R).toarray().reshape(S, AT, S)   # T[s, a, s']
    alpha = np.zeros((AT, S))
    eye = np.eye(S)
    for a in range(AT):
        alpha[a] = np.linalg.solve(eye - beta * T[:, a, :],
                                   base._r[a::AT])
    L = LowerBoundSet(staged, stats)
    # chance stage: take action embedded in the state, then play a forever
    chance = np.zeros((AT, staged.dims[staged.n]))
    for a in range(AT):
        Y = np.tile(alpha[a], O)
        chance[a] = staged.reward + beta * (base._P @ Y)
    for a in range(AT):
        L.seed(staged.n, chance[a], tag=None)
    # intermediate stages: sections of the chance vectors under fixed tails
    for l in range(staged.n - 1, 0, -1):
        tail_dims = base.A[l:]
        head = staged.dims[l]
        for a in range(AT):
            mat = chance[a].reshape(head, int(np.prod(tail_dims)))
            for tail in range(int(np.prod(tail_dims))):
                first = int(np.unravel_index(tail, tail_dims)[0])
                tag = Prescription(l + 1,
                                   np.full(base.M[l], first, np.int64))
                L.seed(l, mat[:, tail], tag=tag)
    for a in range(AT):
        first = int(np.unravel_index(a, base.A)[0])
        tag = Prescription(1, np.full(base.M[0], first, np.int64))
        L.seed(0, alpha[a], tag=tag)
    L.prune()
    return L


def init_upper_bound(staged, relaxed: RelaxedSolution | None = None,
                     stats=None, **aux_kwargs) -> UpperBoundSet:
    """Box caps from the FIB tables plus relaxed-presolve belief rows.

    Relaxed rows enter at their own stage; point-mass rows additionally
    tighten the per-component caps at every stage sharing the base state
    (the sound fiber lift).  Diffuse rows are never lifted across stages.
    """
    U = UpperBoundSet(staged, stats, **aux_kwargs)
    if relaxed is None:
        return U
    base = staged.base
    qhat = relaxed.qhat.reshape((base.S, *base.A))
    qcheck = relaxed.qcheck.reshape(base.S * base.AT)
    for l in range(staged.n + 1):
        if l == staged.n:
            caps = qhat.reshape(-1)
        else:
            caps = qhat.max(axis=tuple(range(l + 1, staged.n + 1))).reshape(-1)
        U.cap_upper(l, np.arange(staged.dims[l]), caps)
    U.cap_lower(staged.n, np.arange(staged.dims[staged.n]), qcheck)

    for b, v in relaxed.stage0_rows:
        sup = np.nonzero(b)[0]
        if sup.size == 1:
            s = int(sup[0])
            for l in range(staged.n + 1):
                idx = np.nonzero(staged.base_of[l] == s)[0]
                U.cap_upper(l, idx, float(v))
        else:
            U.add_belief_row(0, b, float(v))
    for b2, v in relaxed.chance_rows:
        sup = np.nonzero(b2)[0]
        if sup.size == 1:
            U.cap_upper(staged.n, sup, float(v))
        else:
            U.add_belief_row(staged.n, b2, float(v))
    return U
