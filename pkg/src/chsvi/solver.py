"""Heuristic-search value iteration on the staged coordinator model.

The outer loop shrinks the initial-belief gap by a factor zeta per
exploration; each exploration walks down the stage graph updating both
bounds, steering by the prescription the upper-bound update returns and,
at the chance stage, by the observation with the largest weighted excess
gap.  Interrupting at any record still yields a valid policy and bracket.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .bounds import (LowerBoundSet, RelaxedSolution, UpperBoundSet,
                     direct_control_policy, fib_tables, init_lower_bound,
                     init_upper_bound)
from .envs import relax_model
from .lp import SolverStats
from .model import StagedBelief, build_staged


@dataclass
class SolverConfig:
    zeta: float = 0.85
    precision: float = 0.01
    time_limit_s: float = 86400.0
    max_depth: int | None = None
    seed: int = 0
    bp_mode: str = "auto"
    presolve: bool = True
    presolve_precision: float = 0.02
    presolve_budget_frac: float = 0.10
    progress_every: int = 25

    def __post_init__(self):
        if not 0.0 < self.zeta < 1.0:
            raise ValueError("zeta must lie in (0, 1)")
        if self.precision <= 0.0:
            raise ValueError("precision must be positive")


@dataclass
class ExploreFrame:
    belief: StagedBelief
    epsilon: float
    depth: int
    phase: int = 0


@dataclass
class ProgressRecord:
    t_s: float
    U0: float
    L0: float
    nV: list
    nC: list
    explore_calls: int
    lp_solves: int
    bp_solves: int

    @staticmethod
    def csv_header(n_stages=3):
        v = ",".join(f"nV{l}" for l in range(n_stages))
        c = ",".join(f"nC{l}" for l in range(n_stages))
        return f"t_s,U0,L0,{v},{c},explore_calls,lp_solves,bp_solves"

    def csv_row(self):
        v = ",".join(str(k) for k in self.nV)
        c = ",".join(str(k) for k in self.nC)
        return (f"{self.t_s:.3f},{self.U0:.10g},{self.L0:.10g},{v},{c},"
                f"{self.explore_calls},{self.lp_solves},{self.bp_solves}")


@dataclass
class SolveResult:
    policy: object
    U0: float
    L0: float
    records: list
    reason: str
    uncertified: bool
    stats: SolverStats
    lower: LowerBoundSet
    upper: UpperBoundSet
    depth_cap_hits: int = 0
    max_seen_depth: int = 0

    @property
    def gap(self):
        return self.U0 - self.L0


def default_max_depth(staged, precision):
    span = staged.base.vmax - staged.base.vmin
    steps = math.ceil(math.log(max(span, precision) / precision)
                      / math.log(1.0 / staged.base.discount))
    return 5 * staged.n * max(steps, 1)


class CHSVI:
    def __init__(self, staged, cfg: SolverConfig, relaxed=None,
                 stats=None):
        self.staged = staged
        self.cfg = cfg
        self.stats = stats if stats is not None else SolverStats()
        self.relaxed = relaxed
        self.records = []
        self.explore_calls = 0
        self.depth_cap_hits = 0
        self.max_seen_depth = 0
        self._t0 = None
        self._deadline = None
        self.L = None
        self.U = None

    # --- bookkeeping -------------------------------------------------------
    def _record(self):
        b0 = self.staged.initial_belief()
        rec = ProgressRecord(
            t_s=time.perf_counter() - self._t0,
            U0=self.U.value(b0),
            L0=self.L.value(b0),
            nV=self.L.sizes(),
            nC=self.U.belief_row_counts(),
            explore_calls=self.explore_calls,
            lp_solves=self.stats.lp_solves,
            bp_solves=self.stats.bp_solves,
        )
        self.records.append(rec)
        return rec

    def _time_left(self):
        return self._deadline - time.perf_counter()

    # --- search ------------------------------------------------------------
    def choose_next(self, belief, gamma, info, eps):
        staged = self.staged
        if belief.stage < staged.n:
            return staged.advance_prescription(belief, gamma), eps
        beta = staged.base.discount
        eps_next = eps / beta
        po, posts, u0 = info["po"], info["posts"], info["u0"]
        best_o, best_score = -1, -np.inf
        for o in range(po.size):
            if po[o] <= 0.0:
                continue
            l0 = self.L.value(StagedBelief(0, posts[o]))
            score = po[o] * (u0[o] - l0 - eps_next)
            if score > best_score:
                best_o, best_score = o, score
        return StagedBelief(0, posts[best_o]), eps_next

    def _explore(self, eps0, max_depth):
        cfg = self.cfg
        stack = [ExploreFrame(self.staged.initial_belief(), eps0, 0)]
        while stack:
            if self._time_left() <= 0.0:
                return False
            fr = stack[-1]
            if fr.phase == 0:
                self.explore_calls += 1
                self.max_seen_depth = max(self.max_seen_depth, fr.depth)
                if self.explore_calls % cfg.progress_every == 0:
                    self._record()
                _, gamma, info = self.U.update(fr.belief, cfg.bp_mode,
                                               cfg.seed)
                self.L.backup(fr.belief)
                gap = self.U.value(fr.belief) - self.L.value(fr.belief)
                if gap <= fr.epsilon:
                    stack.pop()
                    continue
                if fr.depth >= max_depth:
                    self.depth_cap_hits += 1
                    stack.pop()
                    continue
                child, ceps = self.choose_next(fr.belief, gamma, info,
                                               fr.epsilon)
                fr.phase = 1
                stack.append(ExploreFrame(child, ceps, fr.depth + 1))
            else:
                self.U.update(fr.belief, cfg.bp_mode, cfg.seed)
                self.L.backup(fr.belief)
                stack.pop()
        return True

    # --- main loop -----------------------------------------------------------
    def solve(self):
        cfg = self.cfg
        self._t0 = time.perf_counter()
        self._deadline = self._t0 + cfg.time_limit_s

        if self.relaxed is None and cfg.presolve:
            budget = cfg.presolve_budget_frac * cfg.time_limit_s
            self.relaxed = presolve_relaxed(self.staged.base, cfg, budget,
                                            stats=self.stats)
        if self.L is None:
            self.L = init_lower_bound(self.staged, self.stats)
        if self.U is None:
            self.U = init_upper_bound(self.staged, self.relaxed, self.stats)

        max_depth = (cfg.max_depth if cfg.max_depth is not None
                     else default_max_depth(self.staged, cfg.precision))
        b0 = self.staged.initial_belief()
        reason = "time_limit"
        while True:
            rec = self._record()
            gap = rec.U0 - rec.L0
            if gap <= cfg.precision:
                reason = "precision"
                break
            if self._time_left() <= 0.0:
                reason = "time_limit"
                break
            if not self._explore(cfg.zeta * gap, max_depth):
                reason = "time_limit"
                self._record()
                break

        policy = direct_control_policy(self.L)
        last = self.records[-1]
        return SolveResult(policy, last.U0, last.L0, self.records, reason,
                           self.U.uncertified, self.stats, self.L, self.U,
                           self.depth_cap_hits, self.max_seen_depth)


def solve(staged, cfg: SolverConfig, relaxed=None, stats=None):
    return CHSVI(staged, cfg, relaxed=relaxed, stats=stats).solve()


def presolve_relaxed(model, cfg: SolverConfig, budget_s, stats=None):
    """FIB tables plus belief rows from solving the relaxed model.

    The relaxed run reuses this engine (singleton private info makes the
    bilinear update an action enumeration).  Belief rows are exported only
    when the initial private tuple is common knowledge, re-evaluated
    against the final relaxed upper bound and deduplicated; on budget
    exhaustion whatever rows exist are still sound.
    """
    rel = relax_model(model)
    qhat = fib_tables(rel)
    qcheck = fib_tables(rel, minimize=True)

    det = True
    sup = np.nonzero(model.b0)[0]
    for i in range(model.I):
        if np.unique(model.Mmap[i][sup]).size > 1:
            det = False
    if not det:
        return RelaxedSolution(qhat, qcheck, [], [])

    sub_cfg = SolverConfig(
        zeta=cfg.zeta,
        precision=cfg.presolve_precision,
        time_limit_s=max(budget_s, 1.0),
        seed=cfg.seed,
        bp_mode="auto",
        presolve=False,
        progress_every=10 ** 9,
    )
    rel_staged = build_staged(rel)
    engine = CHSVI(rel_staged, sub_cfg,
                   relaxed=RelaxedSolution(qhat, qcheck, [], []),
                   stats=stats)
    result = engine.solve()

    def export(stage):
        seen = {}
        for _, b, _, _ in result.upper.belief_rows[stage]:
            key = b.tobytes()
            if key not in seen:
                val = result.upper.value(StagedBelief(stage, b))
                seen[key] = (b, val)
        return list(seen.values())

    return RelaxedSolution(qhat, qcheck, export(0), export(rel_staged.n))
