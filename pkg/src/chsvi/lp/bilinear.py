"""Prescription-structured bilinear programs.

maximize over (gamma, y) of sum_s b(s) * [gamma(m_s) == a] * y(s, a) with y
ranging over a stored polytope.  The objective is linear in y for fixed
gamma and linear in the 0-1 indicator view of gamma for fixed y; exact
solvers exploit that only the belief's support matters and that labels
without support can be pinned to action 0.
"""

import heapq
from dataclasses import dataclass

import numpy as np

from . import LinearProgram, solve_lp
from .polytope import Polytope

SKIP_TOL = 1e-9


class BilinearPrescriptionProgram:
    """One stage's upper-bound update problem.

    poly: Polytope whose first n_states*n_actions columns are the y block
    (row-major in (state, action)); any further columns are auxiliaries.
    b: belief over the stage states; m_of: per-state private label of the
    acting agent; agent: 1-based agent number carried into the returned
    prescription.
    """

    def __init__(self, poly, b, m_of, n_actions, n_labels, agent):
        self.poly = poly
        self.b = np.asarray(b, dtype=np.float64)
        self.m_of = np.asarray(m_of, dtype=np.int64)
        self.n_actions = int(n_actions)
        self.n_labels = int(n_labels)
        self.agent = int(agent)
        self.n_states = self.b.size
        self.n_y = self.n_states * self.n_actions
        assert poly.n >= self.n_y

    def objective(self, table):
        """Full-width objective vector for a fixed prescription table."""
        c = np.zeros(self.poly.n)
        cols = np.arange(self.n_states) * self.n_actions + table[self.m_of]
        np.add.at(c, cols, self.b)
        return c

    def score(self, table, y):
        """J(b, gamma, y) for a full-width point y."""
        return float(self.objective(table) @ y)

    def prescription_count(self):
        return self.n_actions ** self.n_labels


@dataclass
class BPResult:
    value: float
    table: np.ndarray
    y: np.ndarray
    status: str          # "exact" or "heuristic"
    lp_solves: int


def _support_labels(bp):
    """Labels carrying belief mass, plus per-label supported state lists."""
    mass = np.zeros(bp.n_labels)
    np.add.at(mass, bp.m_of, bp.b)
    labels = [m for m in range(bp.n_labels) if mass[m] > 0.0]
    groups = {m: np.nonzero((bp.m_of == m) & (bp.b > 0.0))[0] for m in labels}
    return labels, groups


def _mixed_radix_gray(radices):
    """Yield (digits, changed_position) with one digit moving +-1 per step."""
    k = len(radices)
    d = [0] * k
    o = [1] * k
    f = list(range(k + 1))
    yield tuple(d), -1
    if k == 0:
        return
    while True:
        j = f[0]
        f[0] = 0
        if j == k:
            return
        d[j] += o[j]
        if d[j] == 0 or d[j] == radices[j] - 1:
            o[j] = -o[j]
            f[j] = f[j + 1]
            f[j + 1] = j + 1
        yield tuple(d), j


class _ReducedView:
    """Support-restricted solve surface; falls back to the full polytope."""

    def __init__(self, bp):
        self.bp = bp
        supp = np.nonzero(bp.b > 0.0)[0]
        ycols = (supp[:, None] * bp.n_actions
                 + np.arange(bp.n_actions)[None, :]).ravel()
        cols = np.concatenate([ycols, np.arange(bp.n_y, bp.poly.n)])
        cols.sort()
        mask = np.zeros(bp.poly.n, dtype=bool)
        mask[cols] = True
        if bp.poly.has_negative_outside(mask):
            self.cols = np.arange(bp.poly.n)
            self.poly = bp.poly
            self.owned = False
        else:
            self.cols = cols
            self.poly = bp.poly.reduced(cols)
            self.owned = True
        self.col_pos = {int(cj): k for k, cj in enumerate(self.cols)}

    def lift(self, x_red):
        if not self.owned:
            return x_red.copy()
        x = self.bp.poly.lo.copy()
        x[self.cols] = x_red
        return x

    def pos(self, s, a):
        return self.col_pos[s * self.bp.n_actions + a]


def _solve_fixed(view, bp, table):
    """Inner LP value for a fixed prescription on the reduced view."""
    c = np.zeros(view.poly.n)
    for s in np.nonzero(bp.b > 0.0)[0]:
        c[view.pos(s, int(table[bp.m_of[s]]))] += bp.b[s]
    val, x = view.poly.solve(c)
    return val, x


def solve_bp(bp, mode="enumerate", seed=0, stats=None):
    """Solve the stage bilinear program.

    enumerate / branch_bound are exact; alternate is block-coordinate
    ascent from multiple starts and reports status "heuristic".
    """
    if stats is not None:
        stats.bp_solves += 1
    if mode == "enumerate":
        return _solve_enumerate(bp)
    if mode == "branch_bound":
        return _solve_branch_bound(bp)
    if mode == "alternate":
        return _solve_alternate(bp, seed)
    raise ValueError(f"unknown BP mode {mode!r}")


def solve_bp_exact(bp, stats=None):
    return solve_bp(bp, mode="enumerate", stats=stats)


def _solve_enumerate(bp):
    labels, groups = _support_labels(bp)
    view = _ReducedView(bp)
    radices = [bp.n_actions] * len(labels)

    table = np.zeros(bp.n_labels, dtype=np.int64)
    c = np.zeros(view.poly.n)
    for m in labels:
        for s in groups[m]:
            c[view.pos(int(s), 0)] += bp.b[s]

    best_val, best_x, cert = view.poly.solve(c, want_cert=True)
    best_table = table.copy()
    solves = 1
    r = None
    bound_sum = 0.0

    def rebase():
        nonlocal r, bound_sum
        r = c - cert.at_lam
        bound_sum = float(np.where(r > 0.0, view.poly.up * r,
                                   view.poly.lo * r).sum())

    def shift(col, delta):
        nonlocal bound_sum
        old = r[col]
        new = old + delta
        lo, up = view.poly.lo[col], view.poly.up[col]
        bound_sum += ((up * new if new > 0.0 else lo * new)
                      - (up * old if old > 0.0 else lo * old))
        r[col] = new
        c[col] += delta

    rebase()
    gen = _mixed_radix_gray(radices)
    next(gen)  # the all-zero table is already evaluated
    for digits, changed in gen:
        m = labels[changed]
        a_new = digits[changed]
        a_old = int(table[m])
        for s in groups[m]:
            shift(view.pos(int(s), a_old), -bp.b[s])
            shift(view.pos(int(s), a_new), bp.b[s])
        table[m] = a_new
        if cert.lam_rhs + bound_sum <= best_val + SKIP_TOL:
            continue
        val, x, cert2 = view.poly.solve(c, want_cert=True)
        solves += 1
        if val > best_val + 1e-12:
            best_val, best_x, best_table = val, x, table.copy()
            cert = cert2
            rebase()

    return BPResult(best_val, best_table, view.lift(best_x), "exact", solves)


def _mccormick_polytope(bp, labels, groups):
    """LP relaxation over (y, aux, gamma, w) with indicator box [0, 1]."""
    poly, nA = bp.poly, bp.n_actions
    k = len(labels)
    n0 = poly.n
    zlo = np.zeros((k, nA))
    zhi = np.zeros((k, nA))
    for t, m in enumerate(labels):
        ss = groups[m]
        for a in range(nA):
            cols = ss * nA + a
            zlo[t, a] = float(bp.b[ss] @ poly.lo[cols])
            zhi[t, a] = float(bp.b[ss] @ poly.up[cols])

    lo = np.concatenate([poly.lo, np.zeros(k * nA),
                         np.minimum(zlo, 0.0).ravel()])
    up = np.concatenate([poly.up, np.ones(k * nA),
                         np.maximum(zhi, 0.0).ravel()])
    big = Polytope(lo, up, poly.stats)
    for p in range(poly.k):
        row = np.zeros(big.n)
        row[:n0] = poly.R[p]
        big.add_row(row, float(poly.rhs[p]))

    def gcol(t, a):
        return n0 + t * nA + a

    def wcol(t, a):
        return n0 + k * nA + t * nA + a

    for t, m in enumerate(labels):
        ss = groups[m]
        row = np.zeros(big.n)
        row[[gcol(t, a) for a in range(nA)]] = 1.0
        big.add_row(row.copy(), 1.0)
        big.add_row(-row, -1.0)
        for a in range(nA):
            row = np.zeros(big.n)
            row[wcol(t, a)] = 1.0
            row[gcol(t, a)] = -zhi[t, a]
            big.add_row(row, 0.0)               # w <= zhi * g
            row = np.zeros(big.n)
            row[wcol(t, a)] = 1.0
            row[ss * nA + a] = -bp.b[ss]
            row[gcol(t, a)] = -zlo[t, a]
            big.add_row(row, -zlo[t, a])        # w <= z - zlo (1 - g)
    cobj = np.zeros(big.n)
    cobj[n0 + k * nA:] = 1.0
    return big, cobj, gcol


def _solve_branch_bound(bp):
    labels, groups = _support_labels(bp)
    view = _ReducedView(bp)
    nA = bp.n_actions
    k = len(labels)

    def node_bound(fixed):
        big, cobj, gcol = _mccormick_polytope(bp, labels, groups)
        for t, a in fixed.items():
            col = gcol(t, a)
            e = np.zeros(big.n)
            e[col] = -1.0
            big.add_row(e, -1.0)    # gamma(t, a) >= 1
        val, x = big.solve(cobj)
        gfrac = np.array([[x[gcol(t, a)] for a in range(nA)]
                          for t in range(k)])
        return val, gfrac

    def leaf_table(assign):
        table = np.zeros(bp.n_labels, dtype=np.int64)
        for t, a in assign.items():
            table[labels[t]] = a
        return table

    incumbent = -np.inf
    best_table = np.zeros(bp.n_labels, dtype=np.int64)
    best_x = None
    solves = 0

    root_bound, gfrac = node_bound({})
    solves += 1
    counter = 0
    heap = [(-root_bound, counter, {}, gfrac)]
    while heap:
        negb, _, fixed, gfrac = heapq.heappop(heap)
        bound = -negb
        if bound <= incumbent + SKIP_TOL:
            continue
        # incumbent from rounding this node's relaxation
        assign = dict(fixed)
        for t in range(k):
            if t not in assign:
                assign[t] = int(np.argmax(gfrac[t]))
        table = leaf_table(assign)
        val, x = _solve_fixed(view, bp, table)
        solves += 1
        if val > incumbent + 1e-12:
            incumbent, best_table, best_x = val, table, x
        if len(fixed) == k:
            continue
        free = [t for t in range(k) if t not in fixed]
        t_star = max(free, key=lambda t: 1.0 - gfrac[t].max())
        for a in range(nA):
            child = dict(fixed)
            child[t_star] = a
            cb, cg = node_bound(child)
            solves += 1
            if cb > incumbent + SKIP_TOL:
                counter += 1
                heap.append((-cb, counter, child, cg))
        heapq.heapify(heap)

    if best_x is None:
        val, best_x = _solve_fixed(view, bp, best_table)
        solves += 1
        incumbent = val
    return BPResult(incumbent, best_table, view.lift(best_x),
                    "exact", solves)


def _solve_alternate(bp, seed):
    labels, groups = _support_labels(bp)
    view = _ReducedView(bp)
    rng = np.random.default_rng(seed)
    nA = bp.n_actions
    starts = [np.zeros(bp.n_labels, dtype=np.int64),
              np.full(bp.n_labels, nA - 1, dtype=np.int64)]
    for _ in range(3):
        starts.append(rng.integers(0, nA, size=bp.n_labels))

    best_val, best_table, best_x = -np.inf, None, None
    solves = 0
    for table in starts:
        table = table.copy()
        last = -np.inf
        for _ in range(50):
            val, x = _solve_fixed(view, bp, table)
            solves += 1
            assert val >= last - 1e-9  # ascent is monotone across sweeps
            last = val
            y = view.lift(x)
            nxt = table.copy()
            for m in labels:
                ss = groups[m]
                z = np.array([float(bp.b[ss] @ y[ss * nA + a])
                              for a in range(nA)])
                nxt[m] = int(np.argmax(z))
            if np.array_equal(nxt, table):
                break
            table = nxt
        if last > best_val:
            best_val, best_table, best_x = last, table, x
    return BPResult(best_val, best_table, view.lift(best_x),
                    "heuristic", solves)


def enumerate_oracle(bp):
    """Brute force over all |A|^|M| prescriptions via the one-shot facade.

    Independent of the warm/screened paths; verification only.
    """
    best = (-np.inf, None)
    senses = ["<"] * bp.poly.k
    for flat in np.ndindex(*([bp.n_actions] * bp.n_labels)):
        table = np.array(flat, dtype=np.int64)
        c = bp.objective(table)
        lp = LinearProgram(c, bp.poly.R.copy(), senses, bp.poly.rhs.copy(),
                           lower=bp.poly.lo, upper=bp.poly.up)
        status, val, _ = solve_lp(lp)
        assert status == "optimal"
        if val > best[0]:
            best = (val, table)
    return best
