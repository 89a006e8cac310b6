"""Bounded-variable revised simplex driver.

Rows are kept dense; the basis inverse is dense and refactorized
periodically (and extended exactly when a row is appended, so a warm basis
survives row insertion).  The pivot loop itself lives in a swappable
kernel: a compiled extension when available, numpy otherwise.
"""

import numpy as np

from . import _kernel_py as K
from .backend import pivot_loop as default_pivot_loop

POSINF = np.inf
NEGINF = -np.inf

_SENSE_BOUNDS = {
    "<": (0.0, POSINF),
    ">": (NEGINF, 0.0),
    "=": (0.0, 0.0),
}


class SolverStats:
    """Shared counters (LP solves, BP solves, pivots) for telemetry."""

    __slots__ = ("lp_solves", "bp_solves", "pivots")

    def __init__(self):
        self.lp_solves = 0
        self.bp_solves = 0
        self.pivots = 0


class SimplexError(RuntimeError):
    """Numerical stall or iteration-bound failure; callers abort the run."""


class SimplexSolver:
    """max c.x  s.t.  A x (sense) rhs,  lo <= x <= up.

    Supports objective swaps and row appends between solves while keeping
    the basis warm.  All arrays live in capacity-doubled buffers whose
    leading slices stay C-contiguous for the kernel.
    """

    REFACTOR_EVERY = 256

    def __init__(self, n, lo, up, stats=None, kernel=None, cap_hint=16):
        self.n = int(n)
        self.m = 0
        self.stats = stats if stats is not None else SolverStats()
        self.kernel = kernel if kernel is not None else default_pivot_loop
        cap = max(16, int(cap_hint))
        self._rows = np.zeros((cap, self.n))
        self._rhs = np.zeros(cap)
        self._c = np.zeros(self.n + cap)
        self._lo = np.empty(self.n + cap)
        self._up = np.empty(self.n + cap)
        self._x = np.zeros(self.n + cap)
        self._vstat = np.zeros(self.n + cap, dtype=np.int8)
        self._basis = np.zeros(cap, dtype=np.int64)
        self._lo[: self.n] = np.asarray(lo, dtype=np.float64)
        self._up[: self.n] = np.asarray(up, dtype=np.float64)
        self._movable = np.zeros(self.n + cap, dtype=np.uint8)
        self._movable[: self.n] = (self._up[: self.n] > self._lo[: self.n])
        self._counters = np.zeros(2, dtype=np.int64)
        self.Binv = np.zeros((0, 0))
        self._pivots_since_refactor = 0
        self._needs_reset = True

    # --- views ------------------------------------------------------------
    @property
    def A(self):
        return self._rows[: self.m]

    @property
    def rhs(self):
        return self._rhs[: self.m]

    def _w(self, buf):
        return buf[: self.n + self.m]

    # --- construction -----------------------------------------------------
    def set_objective(self, c):
        self._c[: self.n] = c
        self._c[self.n:] = 0.0

    def add_row(self, coef, sense, rhs):
        """Append one constraint; the current basis stays valid."""
        mcap = self._rows.shape[0]
        if self.m == mcap:
            self._grow(2 * mcap)
        i = self.m
        self._rows[i] = coef
        self._rhs[i] = rhs
        slo, sup = _SENSE_BOUNDS[sense]
        tot = self.n + i
        # slack block sits at [n, n+m); buffers sized for it
        self._lo[tot] = slo
        self._up[tot] = sup
        self._c[tot] = 0.0
        self._movable[tot] = sup > slo
        self.m = i + 1
        if self._needs_reset:
            return
        # extend the warm basis with the new slack kept basic
        g = np.zeros(i)
        for k in range(i):
            jb = self._basis[k]
            if jb < self.n:
                g[k] = coef[jb]
        newB = np.zeros((i + 1, i + 1))
        newB[:i, :i] = self.Binv
        newB[i, :i] = -g @ self.Binv
        newB[i, i] = 1.0
        self.Binv = newB
        self._basis[i] = tot
        self._vstat[tot] = K.BASIC
        self._x[tot] = rhs - float(coef @ self._x[: self.n])

    def free_row_slack(self, i):
        """Neutralize row i in place: its slack becomes a free variable.

        The constraint can never bind again and the warm basis stays
        valid; the dead row is compacted away at the next rebuild.
        """
        tot = self.n + i
        self._lo[tot] = NEGINF
        self._up[tot] = POSINF
        self._movable[tot] = 1
        if self._vstat[tot] != K.BASIC:
            self._vstat[tot] = K.FREE

    def add_rows_bulk(self, R, rhs):
        """Append many <=-rows at once (storage only; basis resets)."""
        k = R.shape[0]
        if k == 0:
            return
        mcap = self._rows.shape[0]
        if self.m + k > mcap:
            self._grow(max(2 * mcap, self.m + k))
        i = self.m
        self._rows[i: i + k] = R
        self._rhs[i: i + k] = rhs
        tot = self.n + i
        self._lo[tot: tot + k] = 0.0
        self._up[tot: tot + k] = POSINF
        self._c[tot: tot + k] = 0.0
        self._movable[tot: tot + k] = 1
        self.m = i + k
        self._needs_reset = True

    def _grow(self, cap):
        n = self.n
        rows = np.zeros((cap, n))
        rows[: self.m] = self._rows[: self.m]
        self._rows = rows
        for name in ("_rhs",):
            buf = np.zeros(cap)
            buf[: self.m] = getattr(self, name)[: self.m]
            setattr(self, name, buf)
        for name, dt in (("_c", np.float64), ("_lo", np.float64),
                         ("_up", np.float64), ("_x", np.float64),
                         ("_vstat", np.int8), ("_movable", np.uint8)):
            buf = np.zeros(n + cap, dtype=dt)
            buf[: n + self.m] = getattr(self, name)[: n + self.m]
            setattr(self, name, buf)
        basis = np.zeros(cap, dtype=np.int64)
        basis[: self.m] = self._basis[: self.m]
        self._basis = basis

    # --- basis management ---------------------------------------------------
    def reset_basis(self):
        """All-slack basis, structurals at a finite bound (or 0 if free)."""
        n, m = self.n, self.m
        lo, up = self._w(self._lo), self._w(self._up)
        x, vstat = self._w(self._x), self._w(self._vstat)
        flo = np.isfinite(lo[:n])
        fup = np.isfinite(up[:n])
        x[:n] = np.where(flo, lo[:n], np.where(fup, up[:n], 0.0))
        vstat[:n] = np.where(flo, K.AT_LO,
                             np.where(fup, K.AT_UP, K.FREE)).astype(np.int8)
        self._basis[:m] = n + np.arange(m)
        vstat[n:] = K.BASIC
        self.Binv = np.eye(m)
        x[n:] = self.rhs - self.A @ x[:n]
        self._pivots_since_refactor = 0
        self._needs_reset = False

    def refactor(self):
        n, m = self.n, self.m
        B = np.zeros((m, m))
        basis = self._basis[:m]
        struct = basis < n
        if struct.any():
            B[:, struct] = self._rows[:m][:, basis[struct]]
        slack = ~struct
        if slack.any():
            B[basis[slack] - n, np.nonzero(slack)[0]] = 1.0
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            self.reset_basis()
            return
        x = self._w(self._x)
        xn = x.copy()
        xn[self._basis[:m]] = 0.0
        resid = self.rhs - self.A @ xn[:n] - xn[n:]
        x[self._basis[:m]] = self.Binv @ resid
        self._pivots_since_refactor = 0

    # --- solving ------------------------------------------------------------
    def solve(self):
        """Returns one of 'optimal', 'infeasible', 'unbounded', 'stalled'."""
        self.stats.lp_solves += 1
        n, m = self.n, self.m
        if self._needs_reset:
            self.reset_basis()
        A = self.A
        c, lo, up = self._w(self._c), self._w(self._lo), self._w(self._up)
        x, vstat = self._w(self._x), self._w(self._vstat)
        basis = self._basis[:m]
        movable = self._movable[: n + m]
        bland_after = 5 * (m + n)
        cap = 50 * (m + n) + 2000
        counters = self._counters
        counters[:] = 0
        numerical_retries = 0

        phase = 1
        phase1_pivots = 0
        while True:
            budget = min(self.REFACTOR_EVERY - self._pivots_since_refactor,
                         cap - int(counters[1]))
            if budget <= 0:
                if counters[1] >= cap:
                    raise SimplexError(f"iteration bound {cap} exhausted")
                self.refactor()
                continue
            before = int(counters[1])
            status = self.kernel(A, c, lo, up, x, basis, vstat, self.Binv,
                                 movable, phase, budget, bland_after,
                                 counters)
            made = int(counters[1]) - before
            self._pivots_since_refactor += made
            self.stats.pivots += made
            if phase == 1:
                phase1_pivots += made
            if status == K.BUDGET:
                continue
            if status == K.NUMERICAL:
                numerical_retries += 1
                if numerical_retries > 3:
                    raise SimplexError("numerical stall")
                self.refactor()
                continue
            if status == K.UNBOUNDED:
                if phase == 1:
                    raise SimplexError("unblocked phase-1 ray")
                return "unbounded"
            if status == K.STUCK:
                return "infeasible"
            # DONE for this phase
            if phase == 1:
                if phase1_pivots > 0 and self._pivots_since_refactor > 0:
                    # re-derive basic values before trusting feasibility
                    self.refactor()
                    xB = x[basis]
                    if (np.any(xB < lo[basis] - K.FTOL)
                            or np.any(xB > up[basis] + K.FTOL)):
                        numerical_retries += 1
                        if numerical_retries > 3:
                            raise SimplexError("phase-1 feasibility drift")
                        continue
                phase = 2
                continue
            return "optimal"

    @property
    def x(self):
        return self._x[: self.n]

    def objective_value(self):
        return float(self._c[: self.n] @ self._x[: self.n])

    def duals(self):
        """Row dual vector y = Binv^T c_B at the current basis."""
        m = self.m
        cB = self._w(self._c)[self._basis[:m]]
        return self.Binv.T @ cB

    def snapshot_basis(self):
        m = self.m
        return (self._basis[:m].copy(),
                self._w(self._vstat).copy(), self._w(self._x).copy())
