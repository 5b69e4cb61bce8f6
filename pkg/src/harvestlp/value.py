"""Closed-form harvest value and the two inequalities that certify it.

The value has two branches around the threshold: below it the population is
left to grow and the value is proportional to the fundamental solution;
above it an instantaneous continuous sweep down to the threshold collects
the yield integral on the way.  Two numerical certificates back the upper
bounds: a generator inequality for the yield antiderivative and a
difference-quotient bound for the yield/derivative ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fundamental import FundamentalSolution, dpsi_at, psi_at, psi_at_extended
from .model import (ModelSpec, drift_at, sigma2_at, yield_at,
                    yield_derivative_at, yield_integral)
from .threshold import Threshold

BRANCH_LOW = "at_or_below_threshold"
BRANCH_HIGH = "above_threshold"


@dataclass(frozen=True)
class ValueBreakdown:
    x0: float
    branch: str
    sweep_term: float      # yield integral from the threshold up to x0 (0 below)
    reflect_term: float    # f(b) psi(min(x0, b)) / psi'(b)
    total: float


@dataclass(frozen=True)
class InequalityReport:
    name: str
    passed: bool
    worst_excess: float    # largest amount by which the bound is exceeded
    witness: tuple         # node(s) where the worst excess occurs
    n_checked: int
    tol: float


def reflect_ratio(fs: FundamentalSolution, b: float) -> float:
    """psi(b)/psi'(b), extended continuously to b = 0.

    When the grid does not reach 0 the limit is taken by quadratic
    extrapolation of the ratio over the three smallest nodes; this is exact
    for the power behaviour psi ~ x^gamma (ratio x/gamma) and for a regular
    boundary (ratio ~ x).
    """
    if b >= fs.x_min or fs.grid[0] == 0.0:
        return float(psi_at(fs, b)) / float(dpsi_at(fs, b))
    if fs.closed_form is not None and fs.closed_form.kind == "power":
        return b / fs.closed_form.gamma
    x = fs.grid[:3]
    v = fs.psi[:3] / fs.dpsi[:3]
    return float(np.polyval(np.polyfit(x, v, 2), b))


def value_at(m: ModelSpec, fs: FundamentalSolution, th: Threshold,
             x0: float) -> ValueBreakdown:
    """Optimal harvest value started from population x0."""
    if not x0 > 0.0:
        raise ValueError("initial population x0 must be positive")
    b = th.bstar
    fb = yield_at(m, b)
    if x0 <= b:
        reflect = fb * float(psi_at(fs, x0)) / float(dpsi_at(fs, b))
        return ValueBreakdown(x0=x0, branch=BRANCH_LOW, sweep_term=0.0,
                              reflect_term=reflect, total=reflect)
    sweep = yield_integral(m, b, x0)
    reflect = fb * reflect_ratio(fs, b)
    return ValueBreakdown(x0=x0, branch=BRANCH_HIGH, sweep_term=sweep,
                          reflect_term=reflect, total=sweep + reflect)


def g_at(m: ModelSpec, th: Threshold, x: float) -> float:
    """Yield antiderivative anchored at the threshold: integral of f over
    [bstar, x]."""
    if x < th.bstar:
        raise ValueError(f"g is defined on [bstar, inf); got x = {x} < {th.bstar}")
    return yield_integral(m, th.bstar, x)


def check_generator_bound(m: ModelSpec, fs: FundamentalSolution, th: Threshold,
                          grid, tol: float = 1e-9) -> InequalityReport:
    """(A - r) g(x) <= r f(b) psi(b)/psi'(b) on a grid right of the threshold.

    The left side is (1/2) sigma^2 f' + b f - r g with f' analytic, so the
    check is free of difference noise and tight at the threshold.
    """
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < th.bstar):
        raise ValueError("generator bound grid must lie in (bstar, x_max]")
    rhs = m.discount * yield_at(m, th.bstar) * reflect_ratio(fs, th.bstar)
    lhs = np.array([0.5 * sigma2_at(m, x) * yield_derivative_at(m, x)
                    + drift_at(m, x) * yield_at(m, x)
                    - m.discount * g_at(m, th, x) for x in grid])
    excess = lhs - rhs
    worst = int(np.argmax(excess))
    return InequalityReport(name="generator_bound", passed=bool(excess[worst] <= tol),
                            worst_excess=float(excess[worst]),
                            witness=(float(grid[worst]),),
                            n_checked=len(grid), tol=tol)


def check_density_bound(m: ModelSpec, fs: FundamentalSolution, th: Threshold,
                        xz_pairs, tol: float = 1e-9) -> InequalityReport:
    """Difference-quotient bound f(x) z / (psi(x) - psi(x-z)) <= f(b)/psi'(b)
    over pairs 0 <= z <= x, with the z = 0 entries read as f(x)/psi'(x)."""
    worst = -math.inf
    witness = (math.nan, math.nan)
    n = 0
    for x, z in xz_pairs:
        if z < 0.0 or z > x:
            raise ValueError(f"pair (x={x}, z={z}) outside 0 <= z <= x")
        if z == 0.0:
            ratio = yield_at(m, x) / float(dpsi_at(fs, x))
        else:
            dpsi_gap = float(psi_at_extended(fs, x)) - float(psi_at_extended(fs, x - z))
            if dpsi_gap <= 0.0:
                raise RuntimeError(f"psi(x) - psi(x-z) = {dpsi_gap} <= 0 at "
                                   f"(x={x}, z={z}); contradicts strict monotonicity")
            ratio = yield_at(m, x) * z / dpsi_gap
        excess = ratio / th.h_max - 1.0 if math.isfinite(th.h_max) else -1.0
        n += 1
        if excess > worst:
            worst, witness = excess, (float(x), float(z))
    return InequalityReport(name="density_bound", passed=bool(worst <= tol),
                            worst_excess=float(worst), witness=witness,
                            n_checked=n, tol=tol)


def density_pairs(th: Threshold, x_max: float, n_x: int = 40,
                  n_z: int = 8) -> list[tuple[float, float]]:
    """Default (x, z) probe set: z = 0 plus geometric jump sizes per state."""
    lo = max(1e-3 * x_max, 1e-6)
    pairs = []
    for x in np.linspace(lo, x_max, n_x):
        pairs.append((float(x), 0.0))
        for z in np.geomspace(1e-4 * x, x, n_z):
            pairs.append((float(x), float(z)))
    return pairs
