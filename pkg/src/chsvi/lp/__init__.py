"""Self-contained linear and prescription-bilinear programming.

``solve_lp`` is the one-shot facade over the revised-simplex engine;
``Polytope`` is the incremental constraint store the bound sets build on;
``bilinear`` holds the prescription-structured solvers.  The pivot kernel
is compiled when available (see ``backend.BACKEND``).
"""

import numpy as np

from .backend import BACKEND, pivot_loop
from .core import SimplexError, SimplexSolver, SolverStats
from .polytope import Certificate, Polytope

__all__ = [
    "BACKEND", "Certificate", "LinearProgram", "Polytope", "SimplexError",
    "SimplexSolver", "SolverStats", "solve_lp", "pivot_loop",
]


class LinearProgram:
    """max objective . x subject to sparse sense rows and variable bounds.

    rows: iterable of (indices, coefficients) pairs or dense vectors;
    senses: string per row out of "<", ">", "=";
    bounds default to (-inf, +inf) per variable.
    """

    def __init__(self, objective, rows, senses, rhs, lower=None, upper=None):
        self.objective = np.asarray(objective, dtype=np.float64)
        n = self.objective.size
        dense = []
        for row in rows:
            if isinstance(row, tuple) and len(row) == 2:
                idx, coef = row
                v = np.zeros(n)
                v[np.asarray(idx, dtype=np.int64)] = coef
                dense.append(v)
            else:
                dense.append(np.asarray(row, dtype=np.float64))
        self.rows = np.array(dense).reshape(len(dense), n)
        self.senses = list(senses)
        self.rhs = np.asarray(rhs, dtype=np.float64)
        self.lower = (np.full(n, -np.inf) if lower is None
                      else np.asarray(lower, dtype=np.float64))
        self.upper = (np.full(n, np.inf) if upper is None
                      else np.asarray(upper, dtype=np.float64))
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("non-finite constraint coefficient")
        if len(self.senses) != self.rows.shape[0] or self.rhs.size != len(self.senses):
            raise ValueError("rows, senses and rhs sizes disagree")

    def dump(self, fh):
        """Write LP-format text for external cross-checks."""
        n = self.objective.size
        fh.write("Maximize\n obj: " + " ".join(
            f"{v:+g} x{j}" for j, v in enumerate(self.objective) if v) + "\n")
        fh.write("Subject To\n")
        for i, row in enumerate(self.rows):
            terms = " ".join(f"{v:+g} x{j}" for j, v in enumerate(row) if v)
            op = {"<": "<=", ">": ">=", "=": "="}[self.senses[i]]
            fh.write(f" c{i}: {terms} {op} {self.rhs[i]:g}\n")
        fh.write("Bounds\n")
        for j in range(n):
            fh.write(f" {self.lower[j]:g} <= x{j} <= {self.upper[j]:g}\n")
        fh.write("End\n")


def solve_lp(lp: LinearProgram, stats=None):
    """Returns (status, value, point); point is None unless optimal.

    Optimal outcomes are certified: primal residuals within 1e-7 and the
    weak-duality gap within 1e-7 relative, else the status degrades to
    "stalled".
    """
    solver = SimplexSolver(lp.objective.size, lp.lower, lp.upper, stats=stats)
    for row, sense, rhs in zip(lp.rows, lp.senses, lp.rhs):
        solver.add_row(row, sense, rhs)
    solver.set_objective(lp.objective)
    try:
        status = solver.solve()
    except SimplexError:
        return "stalled", np.nan, None
    if status != "optimal":
        return status, np.nan, None
    x = solver.x.copy()
    value = float(lp.objective @ x)

    ax = lp.rows @ x if lp.rows.size else np.zeros(0)
    for i, sense in enumerate(lp.senses):
        gap = ax[i] - lp.rhs[i]
        bad = (sense == "<" and gap > 1e-7) or \
              (sense == ">" and gap < -1e-7) or \
              (sense == "=" and abs(gap) > 1e-7)
        if bad:
            return "stalled", np.nan, None
    y = solver.duals()
    for i, sense in enumerate(lp.senses):
        if sense == "<":
            y[i] = max(y[i], 0.0)
        elif sense == ">":
            y[i] = min(y[i], 0.0)
    r = lp.objective - (y @ lp.rows if lp.rows.size else 0.0)
    with np.errstate(invalid="ignore"):
        term = np.where(r > 0.0, lp.upper * r, lp.lower * r)
    term = np.where(r == 0.0, 0.0, term)
    dual_value = float(y @ lp.rhs) + float(term.sum())
    if abs(dual_value - value) > 1e-7 * (1.0 + abs(value)):
        return "stalled", np.nan, None
    return "optimal", value, x
