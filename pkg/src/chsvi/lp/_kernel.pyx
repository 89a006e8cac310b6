# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled revised-simplex pivot loop.

Same contract as ``_kernel_py.pivot_loop``; this is the hot kernel the
import machinery prefers.  Float accumulation order differs from numpy's
pairwise sums, so pivot sequences can diverge harmlessly between backends.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, fabs

AT_LO, AT_UP, BASIC, FREE = 0, 1, 2, 3
DONE, UNBOUNDED, STUCK, BUDGET, NUMERICAL = 0, 1, 2, 3, 4

cdef double FTOL = 1e-7
cdef double OTOL = 1e-9
cdef double PIVTOL = 1e-10
cdef double DEGTOL = 1e-10

cdef int C_AT_LO = 0, C_AT_UP = 1, C_BASIC = 2, C_FREE = 3
cdef int C_DONE = 0, C_UNBOUNDED = 1, C_STUCK = 2, C_BUDGET = 3
cdef int C_NUMERICAL = 4


def pivot_loop(double[:, ::1] A, double[::1] c, double[::1] lo,
               double[::1] up, double[::1] x, long long[::1] basis,
               signed char[::1] vstat, double[:, ::1] Binv,
               cnp.uint8_t[::1] movable, int phase, long long budget,
               long long bland_after, long long[::1] counters):
    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t n = A.shape[1]
    cdef Py_ssize_t i, jj, j, r, jb
    cdef long long it, degen
    cdef bint bland, any_infeas, improving, block_is_up
    cdef int dirn
    cdef double best, dj, t_own, t_rows, t, rate_i, xb, tgt, ti, wr
    cdef double tie, wabs, cost, block_tgt

    cdef double[::1] cB = np.empty(m)
    cdef double[::1] y = np.empty(m)
    cdef double[::1] d = np.empty(n + m)
    cdef double[::1] w = np.empty(m)

    degen = counters[0]
    bland = degen > bland_after

    for it in range(budget):
        # phase-dependent basic costs
        any_infeas = False
        for i in range(m):
            jb = basis[i]
            xb = x[jb]
            if phase == 1:
                if xb < lo[jb] - FTOL:
                    cB[i] = 1.0
                    any_infeas = True
                elif xb > up[jb] + FTOL:
                    cB[i] = -1.0
                    any_infeas = True
                else:
                    cB[i] = 0.0
            else:
                cB[i] = c[jb]
        if phase == 1 and not any_infeas:
            counters[0] = degen
            return C_DONE

        # y = Binv^T cB
        for jj in range(m):
            y[jj] = 0.0
        for i in range(m):
            cost = cB[i]
            if cost != 0.0:
                for jj in range(m):
                    y[jj] += Binv[i, jj] * cost

        # reduced costs
        for jj in range(n):
            d[jj] = c[jj] if phase == 2 else 0.0
        for i in range(m):
            cost = y[i]
            if cost != 0.0:
                for jj in range(n):
                    d[jj] -= cost * A[i, jj]
        for i in range(m):
            d[n + i] = (c[n + i] if phase == 2 else 0.0) - y[i]

        # entering variable (Dantzig, or Bland after a degenerate run)
        j = -1
        best = 0.0
        dirn = 0
        for jj in range(n + m):
            if vstat[jj] == C_BASIC or not movable[jj]:
                continue
            dj = d[jj]
            improving = False
            if (vstat[jj] == C_AT_LO or vstat[jj] == C_FREE) and dj > OTOL:
                improving = True
            elif (vstat[jj] == C_AT_UP or vstat[jj] == C_FREE) and dj < -OTOL:
                improving = True
            if not improving:
                continue
            if bland:
                j = jj
                dirn = 1 if dj > 0.0 else -1
                break
            wabs = fabs(dj)
            if wabs > best:
                best = wabs
                j = jj
                dirn = 1 if dj > 0.0 else -1
        if j < 0:
            counters[0] = degen
            return C_DONE if phase == 2 else C_STUCK

        # w = Binv @ entering column
        if j < n:
            for i in range(m):
                cost = 0.0
                for jj in range(m):
                    cost += Binv[i, jj] * A[jj, j]
                w[i] = cost
        else:
            for i in range(m):
                w[i] = Binv[i, j - n]

        # ratio test; remember which bound blocks
        t_own = up[j] - lo[j]
        t_rows = INFINITY
        r = -1
        wr = 0.0
        tie = 0.0
        block_tgt = 0.0
        block_is_up = False
        for i in range(m):
            rate_i = -dirn * w[i]
            jb = basis[i]
            xb = x[jb]
            if rate_i < -PIVTOL:
                if phase == 1 and xb > up[jb] + FTOL:
                    tgt = up[jb]
                    improving = True          # blocks at the upper bound
                elif phase == 1 and xb < lo[jb] - FTOL:
                    continue
                else:
                    tgt = lo[jb]
                    if tgt == -INFINITY:
                        continue
                    improving = False
            elif rate_i > PIVTOL:
                if phase == 1 and xb < lo[jb] - FTOL:
                    tgt = lo[jb]
                    improving = False
                elif phase == 1 and xb > up[jb] + FTOL:
                    continue
                else:
                    tgt = up[jb]
                    if tgt == INFINITY:
                        continue
                    improving = True
            else:
                continue
            ti = (tgt - xb) / rate_i
            if ti < 0.0:
                ti = 0.0
            if ti < t_rows - tie:
                t_rows = ti
                tie = 1e-9 * (1.0 + t_rows)
                r = i
                wr = fabs(w[i])
                block_tgt = tgt
                block_is_up = improving
            elif ti <= t_rows + tie:
                if bland:
                    if basis[i] < basis[r]:
                        r = i
                        wr = fabs(w[i])
                        block_tgt = tgt
                        block_is_up = improving
                elif fabs(w[i]) > wr:
                    r = i
                    wr = fabs(w[i])
                    block_tgt = tgt
                    block_is_up = improving

        t = t_own if t_own < t_rows else t_rows
        if t == INFINITY:
            counters[0] = degen
            return C_UNBOUNDED if phase == 2 else C_NUMERICAL

        if t_own <= t_rows:
            for i in range(m):
                x[basis[i]] += (-dirn * w[i]) * t_own
            x[j] = up[j] if dirn > 0 else lo[j]
            vstat[j] = C_AT_UP if dirn > 0 else C_AT_LO
        else:
            if fabs(w[r]) < PIVTOL:
                counters[0] = degen
                return C_NUMERICAL
            for i in range(m):
                x[basis[i]] += (-dirn * w[i]) * t
            x[j] += dirn * t
            jb = basis[r]
            x[jb] = block_tgt
            vstat[jb] = C_AT_UP if block_is_up else C_AT_LO
            basis[r] = j
            vstat[j] = C_BASIC
            wr = w[r]
            for jj in range(m):
                Binv[r, jj] /= wr
            for i in range(m):
                if i != r:
                    cost = w[i]
                    if cost != 0.0:
                        for jj in range(m):
                            Binv[i, jj] -= cost * Binv[r, jj]

        counters[1] += 1
        if t <= DEGTOL:
            degen += 1
            if degen > bland_after:
                bland = True
        else:
            degen = 0
            bland = False

    counters[0] = degen
    return C_BUDGET
