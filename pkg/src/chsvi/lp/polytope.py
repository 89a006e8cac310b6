"""Incrementally-edited constraint polytopes with lazy row activation.

A polytope stores box bounds plus dense <=-rows keyed by stable ids.  A
query maximizes an objective with only a small working subset of rows in
the simplex solver, pulling in stored rows a violated batch at a time; an
optimum of the working LP that satisfies every stored row is an optimum of
the full LP.  The working solver keeps its basis warm across objective
swaps and row pulls, which is what the backup/update inner loops lean on.
"""

import numpy as np

from .core import SimplexSolver, SolverStats

PULL_TOL = 1e-8


class Certificate:
    """Weak-duality data for screening: value <= lam_rhs + sum_j phi(r_j)."""

    __slots__ = ("lam_rhs", "at_lam")

    def __init__(self, lam_rhs, at_lam):
        self.lam_rhs = lam_rhs
        self.at_lam = at_lam


class Polytope:
    def __init__(self, lo, up, stats=None):
        self.lo = np.asarray(lo, dtype=np.float64).copy()
        self.up = np.asarray(up, dtype=np.float64).copy()
        self.n = self.lo.size
        self.stats = stats if stats is not None else SolverStats()
        cap = 64
        self._R = np.zeros((cap, self.n))
        self._rhs = np.zeros(cap)
        self._ids = np.zeros(cap, dtype=np.int64)
        self.k = 0
        self._next_id = 0
        self._pos = {}
        self._solver = None
        self._worklist = []     # rid per solver row; None marks a dead row
        self._inwork = set()
        self._dead = 0

    # --- storage ------------------------------------------------------------
    @property
    def R(self):
        return self._R[: self.k]

    @property
    def rhs(self):
        return self._rhs[: self.k]

    @property
    def ids(self):
        return self._ids[: self.k]

    def add_row(self, coef, rhs):
        """Store coef . x <= rhs; activation is lazy."""
        if self.k == self._R.shape[0]:
            cap = 2 * self.k
            R = np.zeros((cap, self.n))
            R[: self.k] = self._R[: self.k]
            self._R = R
            buf = np.zeros(cap)
            buf[: self.k] = self._rhs[: self.k]
            self._rhs = buf
            ids = np.zeros(cap, dtype=np.int64)
            ids[: self.k] = self._ids[: self.k]
            self._ids = ids
        rid = self._next_id
        self._next_id += 1
        self._R[self.k] = coef
        self._rhs[self.k] = rhs
        self._ids[self.k] = rid
        self._pos[rid] = self.k
        self.k += 1
        return rid

    def row(self, rid):
        p = self._pos[rid]
        return self._R[p], float(self._rhs[p])

    def remove_rows(self, rids):
        drop = set(rids)
        keep = [p for p in range(self.k) if int(self._ids[p]) not in drop]
        self._R[: len(keep)] = self._R[keep]
        self._rhs[: len(keep)] = self._rhs[keep]
        self._ids[: len(keep)] = self._ids[keep]
        self.k = len(keep)
        self._pos = {int(self._ids[p]): p for p in range(self.k)}
        if self._solver is not None:
            # neutralize in place; rebuild only when dead rows pile up
            for i, rid in enumerate(self._worklist):
                if rid in drop:
                    self._solver.free_row_slack(i)
                    self._worklist[i] = None
                    self._dead += 1
            self._inwork -= drop
            if self._dead > max(32, self._solver.m // 3):
                self._solver = None
        if self._solver is None:
            self._worklist = [rid for rid in self._worklist
                              if rid is not None and rid not in drop]
            self._inwork = set(self._worklist)
            self._dead = 0

    def tighten_upper(self, idx, values):
        self.up[idx] = np.minimum(self.up[idx], values)
        self._solver = None
        self._worklist = [r for r in self._worklist if r is not None]
        self._dead = 0

    def tighten_lower(self, idx, values):
        self.lo[idx] = np.maximum(self.lo[idx], values)
        self._solver = None
        self._worklist = [r for r in self._worklist if r is not None]
        self._dead = 0

    # --- reduction for support-restricted solves ----------------------------
    def has_negative_outside(self, cols_mask):
        """True if some stored row has a negative entry on a dropped column."""
        if self.k == 0:
            return False
        dropped = ~cols_mask
        if not dropped.any():
            return False
        return bool((self.R[:, dropped] < -1e-15).any())

    def reduced(self, cols):
        """Polytope on a column subset, dropped columns folded at lower bounds.

        Exact when no stored row carries a negative coefficient on a dropped
        column (caller checks) and objectives vanish off the subset.
        """
        mask = np.zeros(self.n, dtype=bool)
        mask[cols] = True
        dropped = ~mask
        assert np.all(np.isfinite(self.lo[dropped]))
        sub = Polytope(self.lo[cols], self.up[cols], self.stats)
        if self.k:
            fold = self.R[:, dropped] @ self.lo[dropped]
            Rsub = self.R[:, cols]
            rhs = self.rhs - fold
            live = np.abs(Rsub).max(axis=1) > 0.0
            for p in np.nonzero(live)[0]:
                sub.add_row(Rsub[p], rhs[p])
        return sub

    # --- queries ------------------------------------------------------------
    def _build_solver(self, working_ids, exclude):
        solver = SimplexSolver(self.n, self.lo, self.up, stats=self.stats,
                               cap_hint=len(working_ids) + 16)
        kept = [rid for rid in working_ids
                if rid not in exclude and rid in self._pos]
        pos = [self._pos[rid] for rid in kept]
        solver.add_rows_bulk(self._R[pos], self._rhs[pos])
        return solver, kept

    def solve(self, c, exclude=(), want_cert=False, want_row_duals=False):
        """Maximize c . x over the stored rows minus ``exclude``.

        Returns (value, x), plus a Certificate and/or a {row id: dual}
        map when requested.  Raises on solver failure; the box bounds keep
        every query bounded and feasible polytopes feasible.
        """
        exclude = set(exclude)
        if exclude:
            # probe solves start empty; row generation pulls what binds
            solver, working = self._build_solver([], exclude)
            in_work = set(working)
        else:
            if self._solver is None:
                self._worklist = [r for r in self._worklist if r is not None]
                self._dead = 0
                self._solver, self._worklist = self._build_solver(
                    self._worklist, exclude)
                self._inwork = set(self._worklist)
            solver, working = self._solver, self._worklist
            in_work = self._inwork

        solver.set_objective(c)
        for _ in range(400):
            status = solver.solve()
            if status != "optimal":
                raise RuntimeError(f"polytope query ended {status}")
            x = solver.x
            if self.k:
                viol = self.R @ x - self.rhs
                cand = [
                    p for p in np.nonzero(viol > PULL_TOL)[0]
                    if int(self._ids[p]) not in in_work
                    and int(self._ids[p]) not in exclude
                ]
            else:
                cand = []
            if not cand:
                value = float(c @ x)
                if not (want_cert or want_row_duals):
                    return value, x.copy()
                lam = np.maximum(solver.duals(), 0.0)
                live = [k for k, rid in enumerate(working) if rid is not None]
                out = [value, x.copy()]
                if want_cert:
                    ids = [self._pos[working[k]] for k in live]
                    if ids:
                        lam_rhs = float(lam[live] @ self._rhs[ids])
                        at_lam = lam[live] @ self._R[ids]
                    else:
                        lam_rhs, at_lam = 0.0, np.zeros(self.n)
                    out.append(Certificate(lam_rhs, at_lam))
                if want_row_duals:
                    out.append({working[k]: float(lam[k]) for k in live})
                return tuple(out)
            cand.sort(key=lambda p: (-viol[p], self._ids[p]))
            for p in cand[:64]:
                rid = int(self._ids[p])
                solver.add_row(self._R[p], "<", self._rhs[p])
                working.append(rid)
                in_work.add(rid)
        raise RuntimeError("row generation did not settle")

    def value(self, c):
        return self.solve(c)[0]

    def screen_bound(self, cert: Certificate, c):
        """Weak-duality upper bound on max c . x from an earlier certificate."""
        r = c - cert.at_lam
        return cert.lam_rhs + float(
            np.where(r > 0.0, self.up * r, self.lo * r).sum())
