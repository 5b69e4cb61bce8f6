"""Harvest threshold: smallest maximizer of the marginal-yield ratio f/psi'.

The barrier bstar is the smallest b such that f(x)/psi'(x) <= f(b)/psi'(b)
everywhere, f/psi' is nonincreasing to the right of b, and f is smooth
there.  Found by a coarse scan of the ratio on the solution grid followed by
golden-section refinement of the bracketing interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fundamental import FundamentalSolution, dpsi_at
from .model import BoundaryClass, ModelSpec, yield_at

REL_TOL = 1e-9          # conditions (i)/(ii) are checked to this relative slack
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ConditionReport:
    cond_i_ok: bool
    cond_ii_ok: bool
    cond_iii_ok: bool
    worst_violation: float     # max relative excess over the allowed slack (<=0 means clean)
    witness_x: float           # node realizing the worst violation (or the argmax)

    @property
    def all_ok(self) -> bool:
        return self.cond_i_ok and self.cond_ii_ok and self.cond_iii_ok


@dataclass(frozen=True)
class Threshold:
    bstar: float
    h_max: float               # f(bstar)/psi'(bstar); +inf when psi'(0+) = 0
    report: ConditionReport
    at_domain_edge: bool = False   # maximizer abuts the truncated domain


def _ratio(m: ModelSpec, fs: FundamentalSolution, x: float) -> float:
    return yield_at(m, x) / float(dpsi_at(fs, x))


def _ratio_on_grid(m: ModelSpec, fs: FundamentalSolution) -> np.ndarray:
    f = np.array([yield_at(m, x) for x in fs.grid])
    return f / fs.dpsi


def _golden_max(fn, lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    return a if fn(a) >= fn(b) else b


def _dpsi_limit_at_zero(fs: FundamentalSolution) -> float:
    """psi'(0+), defined as a limit when the grid does not reach 0.

    The closed forms evaluate there directly.  Otherwise the local power
    behaviour psi' ~ x^s decides: s > 0 means the derivative vanishes at 0,
    s ~ 0 means a finite limit, recovered by quadratic extrapolation through
    the three smallest nodes.
    """
    if fs.closed_form is not None:
        return float(fs.closed_form.dpsi(0.0)) if fs.closed_form.kind != "power" \
            or fs.closed_form.gamma >= 1.0 else math.inf
    x = fs.grid[:3]
    y = fs.dpsi[:3]
    slope = math.log(y[1] / y[0]) / math.log(x[1] / x[0])
    if slope > 0.01:
        return 0.0
    if slope < -0.01:
        return math.inf
    return float(np.polyval(np.polyfit(x, y, 2), 0.0))


def _h_limit_at_zero(m: ModelSpec, fs: FundamentalSolution) -> float:
    d0 = _dpsi_limit_at_zero(fs)
    if d0 <= 1e-12 * float(np.max(fs.dpsi[:3])):
        return math.inf
    if math.isinf(d0):
        return 0.0
    return yield_at(m, 0.0) / d0


def find_bstar(m: ModelSpec, fs: FundamentalSolution,
               tol: float | None = None) -> Threshold:
    """Locate the threshold and verify the admissibility conditions at it.

    Returns bstar = 0 when the ratio is maximized in the x -> 0 limit (the
    ratio is then nonincreasing everywhere).  Raises when the ratio is still
    rising at the right edge of the truncated domain, since no admissible
    barrier exists on it.
    """
    tol = tol if tol is not None else 1e-8 * m.scale
    h = _ratio_on_grid(m, fs)
    i = int(np.argmax(h))          # first maximizer: ties resolve leftward
    n = len(h)
    edge = False

    if i == n - 1:
        if h[-1] > h[-2] * (1.0 + REL_TOL):
            raise RuntimeError("no admissible threshold: f/psi' is still rising "
                               f"at x_max = {fs.grid[-1]:.6g}; condition (i) "
                               "fails on the truncated domain")
        bstar = _golden_max(lambda x: _ratio(m, fs, x),
                            fs.grid[-2], fs.grid[-1], tol)
        edge = True
    elif i == 0:
        # Maximum towards the boundary: the infimum of admissible barriers is 0.
        bstar = 0.0
        edge = fs.boundary is BoundaryClass.NATURAL
    else:
        bstar = _golden_max(lambda x: _ratio(m, fs, x),
                            fs.grid[i - 1], fs.grid[i + 1], tol)

    if bstar > 0.0 or fs.grid[0] == 0.0:
        h_max = _ratio(m, fs, bstar)
    else:
        h_max = _h_limit_at_zero(m, fs)

    report = verify_conditions(m, fs, bstar, h_at_b=h_max)
    return Threshold(bstar=bstar, h_max=h_max, report=report, at_domain_edge=edge)


def verify_conditions(m: ModelSpec, fs: FundamentalSolution, b: float,
                      h_at_b: float | None = None) -> ConditionReport:
    """Check the three admissibility conditions at barrier b.

    (i) on the full grid, (ii) as a monotone node sequence on [b, x_max],
    (iii) analytically: every built-in yield family is smooth on (0, inf).
    """
    if h_at_b is None:
        if b > 0.0 or fs.grid[0] == 0.0:
            h_at_b = _ratio(m, fs, b)
        else:
            h_at_b = _h_limit_at_zero(m, fs)

    h = _ratio_on_grid(m, fs)

    if math.isinf(h_at_b):
        viol_i = np.full_like(h, -1.0)
    else:
        viol_i = h / h_at_b - 1.0
    worst_i = float(np.max(viol_i))
    cond_i_ok = worst_i <= REL_TOL
    witness = float(fs.grid[int(np.argmax(viol_i))])

    mask = fs.grid >= b
    xs_right = fs.grid[mask]
    right = h[mask]
    if math.isfinite(h_at_b) and (len(xs_right) == 0 or xs_right[0] > b):
        xs_right = np.concatenate([[b], xs_right])
        right = np.concatenate([[h_at_b], right])
    if len(right) >= 2:
        steps = (right[1:] - right[:-1]) / np.abs(right[:-1])
        worst_ii = float(np.max(steps))
        cond_ii_ok = worst_ii <= REL_TOL
        if worst_ii > worst_i:
            witness = float(xs_right[int(np.argmax(steps)) + 1])
    else:
        worst_ii = 0.0
        cond_ii_ok = True

    # (iii): constant, exponential and rational yields are all C^1 on (0, inf).
    cond_iii_ok = m.yield_fn.kind in ("constant", "exponential", "rational")

    return ConditionReport(cond_i_ok=cond_i_ok, cond_ii_ok=cond_ii_ok,
                           cond_iii_ok=cond_iii_ok,
                           worst_violation=max(worst_i, worst_ii),
                           witness_x=witness)
