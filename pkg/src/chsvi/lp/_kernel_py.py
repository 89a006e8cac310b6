"""Pure-numpy revised-simplex pivot loop.

Shares its contract with the compiled twin in ``_kernel.pyx``: bounded
variables, composite phase 1 (costs rebuilt from the violated basics each
iteration), Dantzig pricing with a Bland fallback, and an explicitly
maintained dense basis inverse updated rank-1 per pivot.  The caller owns
refactorization and phase sequencing.

Status codes: 0 done (phase-2 optimal / phase-1 feasible), 1 unbounded,
2 no improving direction left in phase 1, 3 iteration budget exhausted,
4 numerical trouble (caller refactorizes and retries).
"""

import numpy as np

AT_LO, AT_UP, BASIC, FREE = 0, 1, 2, 3
DONE, UNBOUNDED, STUCK, BUDGET, NUMERICAL = 0, 1, 2, 3, 4

FTOL = 1e-7   # bound feasibility
OTOL = 1e-9   # reduced-cost optimality
PIVTOL = 1e-10
DEGTOL = 1e-10


def pivot_loop(A, c, lo, up, x, basis, vstat, Binv, movable,
               phase, budget, bland_after, counters):
    """Run simplex pivots in place; counters = [degenerate_run, total_iters].

    Maximizes c.x in phase 2; phase 1 maximizes minus the total bound
    violation of the basic variables.
    """
    m, n = A.shape
    movable = movable.view(bool)
    degen = int(counters[0])
    bland = degen > bland_after

    for _ in range(budget):
        xB = x[basis]
        loB = lo[basis]
        upB = up[basis]
        below = xB < loB - FTOL
        above = xB > upB + FTOL
        if phase == 1:
            if not (below.any() or above.any()):
                counters[0] = degen
                return DONE
            cB = below.astype(np.float64) - above.astype(np.float64)
        else:
            cB = c[basis]

        y = Binv.T @ cB
        if phase == 1:
            d = np.concatenate((-(y @ A), -y))
        else:
            d = np.concatenate((c[:n] - y @ A, c[n:] - y))

        stat = vstat
        can_inc = (((stat == AT_LO) | (stat == FREE)) & (d > OTOL) & movable)
        can_dec = (((stat == AT_UP) | (stat == FREE)) & (d < -OTOL) & movable)
        elig = can_inc | can_dec
        if not elig.any():
            counters[0] = degen
            return DONE if phase == 2 else STUCK
        if bland:
            j = int(np.argmax(elig))
        else:
            score = np.where(elig, np.abs(d), -1.0)
            j = int(np.argmax(score))
        dirn = 1.0 if can_inc[j] else -1.0

        if j < n:
            w = Binv @ A[:, j]
        else:
            w = Binv[:, j - n].copy()
        rate = -dirn * w

        # blocking step lengths for the basics
        t_arr = np.full(m, np.inf)
        dn = rate < -PIVTOL
        if dn.any():
            tgt = loB[dn].copy()
            if phase == 1:
                tgt[above[dn]] = upB[dn][above[dn]]
                tgt[below[dn]] = -np.inf
            t_arr[dn] = (tgt - xB[dn]) / rate[dn]
        upm = rate > PIVTOL
        if upm.any():
            tgt = upB[upm].copy()
            if phase == 1:
                tgt[below[upm]] = loB[upm][below[upm]]
                tgt[above[upm]] = np.inf
            t_arr[upm] = (tgt - xB[upm]) / rate[upm]
        np.maximum(t_arr, 0.0, out=t_arr)

        t_own = up[j] - lo[j]  # inf when either bound is infinite
        t_rows = t_arr.min() if m else np.inf
        t = min(t_rows, t_own)
        if not np.isfinite(t):
            counters[0] = degen
            return UNBOUNDED if phase == 2 else NUMERICAL

        if t_own <= t_rows:
            # bound flip, no basis change
            x[basis] += rate * t_own
            x[j] = up[j] if dirn > 0 else lo[j]
            vstat[j] = AT_UP if dirn > 0 else AT_LO
        else:
            ties = np.nonzero(t_arr <= t + 1e-9 * (1.0 + t))[0]
            if bland:
                r = int(ties[np.argmin(basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(w[ties]))])
            if abs(w[r]) < PIVTOL:
                counters[0] = degen
                return NUMERICAL
            x[basis] += rate * t
            x[j] += dirn * t
            leave = basis[r]
            if rate[r] < 0.0:
                hit_up = phase == 1 and above[r]
            else:
                hit_up = not (phase == 1 and below[r])
            x[leave] = up[leave] if hit_up else lo[leave]
            vstat[leave] = AT_UP if hit_up else AT_LO
            basis[r] = j
            vstat[j] = BASIC
            row_r = Binv[r] / w[r]
            Binv -= np.outer(w, row_r)
            Binv[r] = row_r

        counters[1] += 1
        if t <= DEGTOL:
            degen += 1
            if degen > bland_after:
                bland = True
        else:
            degen = 0
            bland = False

    counters[0] = degen
    return BUDGET
