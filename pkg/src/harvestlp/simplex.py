"""Dense two-phase primal simplex with lexicographic anti-cycling.

Solves  max/min c'x  s.t.  A_eq x = b_eq, A_ub x <= b_ub, x >= 0  on dense
tableaus.  Entering variable: Dantzig rule (most negative reduced cost,
first index on ties).  Leaving variable: minimum ratio, with ties resolved
by lexicographic comparison of the scaled tableau rows, which rules out
cycling even on the heavily degenerate instances the occupation-measure
discretization produces (most right-hand sides are exactly zero there).
Every choice is deterministic, so a given instance always produces the same
pivot path, solution, and objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PIVOT_TOL = 1e-10
RCOST_TOL = 1e-9
FEAS_TOL = 1e-7


class SimplexError(RuntimeError):
    """Pivot limit exceeded; carries an iteration dump for debugging."""


@dataclass
class SimplexResult:
    status: str                 # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float | None
    iterations: int
    ray: np.ndarray | None = None        # improving direction when unbounded
    artificial_residual: float = 0.0     # phase-1 objective when infeasible


def solve_dense_lp(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None,
                   maximize: bool = False, max_iter: int | None = None) -> SimplexResult:
    c = np.asarray(c, dtype=float)
    n = len(c)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A_eq))
            and np.all(np.isfinite(A_ub))):
        raise ValueError("LP coefficients must be finite")

    m_eq, m_ub = len(b_eq), len(b_ub)
    m = m_eq + m_ub
    obj_sign = -1.0 if maximize else 1.0

    # Columns: n structural, m_ub slacks, then one artificial per row that
    # needs one.  Rows are sign-flipped so every right-hand side is >= 0.
    A = np.vstack([np.hstack([A_eq, np.zeros((m_eq, m_ub))]),
                   np.hstack([A_ub, np.eye(m_ub)])]) if m else np.zeros((0, n + m_ub))
    b = np.concatenate([b_eq, b_ub])
    neg = b < 0.0
    A[neg] *= -1.0
    b = np.abs(b)

    # Slack of an un-flipped inequality row can start basic; everything else
    # gets an artificial.
    needs_art = np.ones(m, dtype=bool)
    for i in range(m_ub):
        if not neg[m_eq + i]:
            needs_art[m_eq + i] = False
    art_rows = np.flatnonzero(needs_art)
    n_art = len(art_rows)
    n_total = n + m_ub + n_art

    T = np.zeros((m + 1, n_total + 1))
    T[:m, :n + m_ub] = A
    T[:m, -1] = b
    basis = np.empty(m, dtype=int)
    for i in range(m_ub):
        basis[m_eq + i] = n + i
    for j, i in enumerate(art_rows):
        T[i, n + m_ub + j] = 1.0
        basis[i] = n + m_ub + j

    if max_iter is None:
        max_iter = 10_000 + 50 * (m + n_total)

    iters = 0

    def pivot(row, col):
        nonlocal T
        T[row] /= T[row, col]
        factors = T[:, col].copy()
        factors[row] = 0.0
        T -= np.outer(factors, T[row])
        basis[row] = col

    def leaving_row(entering: int) -> int:
        col = T[:m, entering]
        ok = col > PIVOT_TOL
        if not ok.any():
            return -1
        ratios = np.full(m, np.inf)
        ratios[ok] = T[:m, -1][ok] / col[ok]
        best = np.min(ratios)
        tied = np.flatnonzero(ratios <= best + PIVOT_TOL)
        if len(tied) == 1:
            return int(tied[0])
        # lexicographic tie break on the scaled rows; exact ties are
        # impossible because tableau rows stay linearly independent
        cols = T.shape[1]
        for j in range(cols):
            vals = T[tied, j] / col[tied]
            vmin = np.min(vals)
            tied = tied[vals <= vmin + PIVOT_TOL]
            if len(tied) == 1:
                break
        return int(tied[0])

    def run(allowed: int) -> str:
        """Pivot on the current tableau; columns >= allowed are barred from
        entering."""
        nonlocal iters
        while True:
            rc = T[-1, :allowed]
            j = int(np.argmin(rc))
            if rc[j] >= -RCOST_TOL:
                return "optimal"
            leave = leaving_row(j)
            if leave < 0:
                return "unbounded:%d" % j
            pivot(leave, j)
            iters += 1
            if iters > max_iter:
                raise SimplexError(
                    f"pivot limit {max_iter} exceeded (iterations={iters}, "
                    f"objective={-T[-1, -1]:.6g}, basis head={basis[:8].tolist()})")

    # Phase 1: minimize the artificial mass.
    if n_art:
        T[-1, n + m_ub:n_total] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        status = run(n_total)
        if status.startswith("unbounded"):
            raise SimplexError("phase-1 subproblem unbounded; inconsistent tableau")
        resid = -T[-1, -1]
        if resid > FEAS_TOL:
            return SimplexResult(status="infeasible", x=None, objective=None,
                                 iterations=iters, artificial_residual=float(resid))
        # Remove lingering artificials from the basis (degenerate rows).
        drop = []
        for i in range(m):
            if basis[i] >= n + m_ub:
                sub = np.abs(T[i, :n + m_ub])
                j = int(np.argmax(sub))
                if sub[j] > PIVOT_TOL:
                    pivot(i, j)
                else:
                    drop.append(i)   # redundant constraint row
        if drop:
            keep = [i for i in range(m) if i not in drop]
            T_new = np.vstack([T[keep], T[-1:]])
            T = T_new
            basis = basis[keep]
            m = len(keep)

    # Phase 2 on the real objective.
    T[-1, :] = 0.0
    T[-1, :n] = obj_sign * c
    for i in range(m):
        if T[-1, basis[i]] != 0.0:
            T[-1] -= T[-1, basis[i]] * T[i]
    status = run(n + m_ub)
    if status.startswith("unbounded"):
        entering = int(status.split(":")[1])
        ray = np.zeros(n)
        if entering < n:
            ray[entering] = 1.0
        for i in range(m):
            if basis[i] < n:
                ray[basis[i]] = -T[i, entering]
        return SimplexResult(status="unbounded", x=None, objective=None,
                             iterations=iters, ray=ray)

    x = np.zeros(n_total)
    x[basis] = T[:m, -1]
    obj = float(np.dot(c, x[:n]))
    xs = x[:n].copy()
    xs[np.abs(xs) < 1e-12] = 0.0
    return SimplexResult(status="optimal", x=xs, objective=obj, iterations=iters)
