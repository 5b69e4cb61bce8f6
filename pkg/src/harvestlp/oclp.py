"""Finite discretizations of the occupation-measure linear programs.

The harvesting problem embeds into a linear program over three expected
discounted measures: the stopped state (mu_tau), the running state (mu_0),
and the harvest action on the state-jump wedge 0 <= z <= x (mu_1).  Each
C^2 test function g contributes one equality

    int g dmu_tau - int (Ag - r g) dmu_0 - int Bg dmu_1 = g(x0)

where Bg(x, z) is the harvest difference quotient (g(x-z) - g(x))/z, read
as -g'(x) at z = 0.  Discretizing measures to atoms on a state/jump grid
and testing against a cubic B-spline basis gives a dense LP; replacing the
whole basis by the single increasing fundamental solution gives the
one-constraint auxiliary LP whose value dominates the full one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .fundamental import FundamentalSolution, dpsi_at, psi_at, psi_at_extended
from .model import ModelSpec, drift_at, sigma2_at, yield_at
from .simplex import SimplexResult, solve_dense_lp
from .threshold import Threshold
from .value import reflect_ratio, value_at

JUMP_RATIO_FLOOR = 1e-6     # smallest jump is 1e-6 * state; z = 0 covers the limit


def default_x_max(m: ModelSpec, x0: float, bstar: float) -> float:
    return max(4.0 * x0, 4.0 * bstar, 10.0 * m.scale)


@dataclass(frozen=True)
class MeasureGrid:
    """Atom locations for the three measures.

    states carries the mu_0 atoms and the x part of mu_1 atoms; mu_tau gets
    an extra atom at 0 because the stopped state sits there at extinction.
    Every state's jump menu is {0} plus geometrically spaced jumps up to a
    full harvest z = x.
    """

    states: np.ndarray            # strictly increasing, positive, contains x0
    jumps: tuple                  # per state: array of z values, jumps[i][0] == 0
    x0: float

    @property
    def n_tau(self) -> int:
        return len(self.states) + 1

    @property
    def n_mu0(self) -> int:
        return len(self.states)

    @property
    def n_mu1(self) -> int:
        return sum(len(z) for z in self.jumps)

    @property
    def n_vars(self) -> int:
        return self.n_tau + self.n_mu0 + self.n_mu1

    def labels(self) -> list[tuple]:
        out = [("mu_tau", 0.0)]
        out += [("mu_tau", float(x)) for x in self.states]
        out += [("mu_0", float(x)) for x in self.states]
        for x, zs in zip(self.states, self.jumps):
            out += [("mu_1", float(x), float(z)) for z in zs]
        return out


def make_measure_grid(m: ModelSpec, x0: float, bstar: float,
                      x_max: float | None = None, n_states: int = 40,
                      n_jump_levels: int = 16) -> MeasureGrid:
    """Uniform positive state grid with x0 (and the threshold) made exact
    grid nodes; the surrounding uniform nodes are dropped so spacing stays
    close to uniform."""
    if x0 <= 0.0:
        raise ValueError("x0 must be positive")
    xm = x_max if x_max is not None else default_x_max(m, x0, bstar)
    if x0 > xm:
        raise ValueError("x0 beyond the truncation bound")
    base = np.linspace(xm / n_states, xm, n_states)
    special = [x0] + ([bstar] if bstar > 0.0 else [])
    spacing = xm / n_states
    keep = np.ones(len(base), dtype=bool)
    for s in special:
        keep &= np.abs(base - s) > 0.4 * spacing
    states = np.unique(np.concatenate([base[keep], special]))
    ratios = np.power(JUMP_RATIO_FLOOR,
                      np.arange(n_jump_levels - 1, -1, -1) / (n_jump_levels - 1))
    jumps = tuple(np.concatenate([[0.0], x * ratios]) for x in states)
    return MeasureGrid(states=states, jumps=jumps, x0=float(x0))


@dataclass
class TestFunctionBasis:
    """Cubic B-splines on uniform knots spanning [0, x_max + pad].

    Each element is C^2 with compact support; together they sum to one on
    the working interval, which pins the discretization of constant test
    functions exactly.
    """

    knots: np.ndarray
    n_basis: int
    _splines: list
    _d1: list
    _d2: list

    def g(self, j: int, x):
        return np.nan_to_num(self._splines[j](x))

    def dg(self, j: int, x):
        return np.nan_to_num(self._d1[j](x))

    def ddg(self, j: int, x):
        return np.nan_to_num(self._d2[j](x))

    @property
    def unity_span(self) -> tuple[float, float]:
        return float(self.knots[3]), float(self.knots[self.n_basis])


def make_basis(x_max: float, n_basis: int = 40,
               pad_fraction: float = 0.05) -> TestFunctionBasis:
    if n_basis < 8:
        raise ValueError("need at least 8 basis elements")
    span = x_max * (1.0 + pad_fraction)
    step = span / (n_basis - 3)
    knots = step * np.arange(-3, n_basis + 1)
    splines, d1, d2 = [], [], []
    for j in range(n_basis):
        b = BSpline.basis_element(knots[j:j + 5], extrapolate=False)
        splines.append(b)
        d1.append(b.derivative(1))
        d2.append(b.derivative(2))
    return TestFunctionBasis(knots=knots, n_basis=n_basis,
                             _splines=splines, _d1=d1, _d2=d2)


@dataclass
class LPInstance:
    name: str
    c: np.ndarray                 # objective, maximized
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    labels: list


@dataclass
class LPSolution:
    status: str
    objective: float | None
    x: np.ndarray | None
    support: list                 # (label, weight) pairs for the active atoms
    max_eq_violation: float
    max_ub_violation: float
    iterations: int


def build_full_lp(m: ModelSpec, fs: FundamentalSolution, x0: float,
                  grid: MeasureGrid, basis: TestFunctionBasis) -> LPInstance:
    """One equality row per basis element, one row testing against the
    increasing fundamental solution, plus the two mass bounds mu_tau(S) <= 1
    and mu_0(S) <= 1/r; objective is the harvest yield.

    The fundamental-solution row is essential on a finite grid: with more
    harvest atoms than spline rows the spline system alone admits
    nonnegative null directions (the LP would be unbounded), while the
    strictly positive coefficients of -B psi bound every harvest atom and
    force the full value under the auxiliary one structurally.
    """
    if x0 not in grid.states:
        raise ValueError("x0 must be a grid state")
    ns = len(grid.states)
    n_rows = basis.n_basis + 1
    A_eq = np.zeros((n_rows, grid.n_vars))
    b_eq = np.zeros(n_rows)
    tau_sites = np.concatenate([[0.0], grid.states])
    s2 = np.array([sigma2_at(m, x) for x in grid.states])
    bdr = np.array([drift_at(m, x) for x in grid.states])

    for j in range(basis.n_basis):
        A_eq[j, :grid.n_tau] = basis.g(j, tau_sites)
        gen = 0.5 * s2 * basis.ddg(j, grid.states) \
            + bdr * basis.dg(j, grid.states) - m.discount * basis.g(j, grid.states)
        A_eq[j, grid.n_tau:grid.n_tau + ns] = -gen
        col = grid.n_tau + ns
        for i, x in enumerate(grid.states):
            zs = grid.jumps[i]
            vals = np.empty(len(zs))
            vals[0] = basis.dg(j, x)                      # -Bg at z = 0
            vals[1:] = (basis.g(j, x) - basis.g(j, x - zs[1:])) / zs[1:]
            A_eq[j, col:col + len(zs)] = vals
            col += len(zs)
        b_eq[j] = basis.g(j, x0)

    # psi row: (A - r) psi = 0 and psi(0) = 0 empty the mu_0 block and the
    # extinction atom, leaving positive coefficients everywhere else.
    A_eq[-1, 1:grid.n_tau] = [float(psi_at_extended(fs, s)) for s in grid.states]
    col = grid.n_tau + ns
    for i, x in enumerate(grid.states):
        zs = grid.jumps[i]
        vals = np.empty(len(zs))
        vals[0] = float(dpsi_at(fs, x))
        vals[1:] = [(float(psi_at_extended(fs, x))
                     - float(psi_at_extended(fs, x - z))) / z for z in zs[1:]]
        A_eq[-1, col:col + len(zs)] = vals
        col += len(zs)
    b_eq[-1] = float(psi_at_extended(fs, x0))

    A_ub = np.zeros((2, grid.n_vars))
    A_ub[0, :grid.n_tau] = 1.0
    A_ub[1, grid.n_tau:grid.n_tau + ns] = 1.0
    b_ub = np.array([1.0, 1.0 / m.discount])

    c = np.zeros(grid.n_vars)
    col = grid.n_tau + ns
    for i, x in enumerate(grid.states):
        c[col:col + len(grid.jumps[i])] = yield_at(m, x)
        col += len(grid.jumps[i])
    return LPInstance(name="full", c=c, A_eq=A_eq, b_eq=b_eq,
                      A_ub=A_ub, b_ub=b_ub, labels=grid.labels())


def build_aux_lp(m: ModelSpec, fs: FundamentalSolution, x0: float,
                 grid: MeasureGrid) -> LPInstance:
    """Single-constraint relaxation: only the harvest measure survives, tested
    against the increasing fundamental solution."""
    coefs = []
    labels = []
    cs = []
    for i, x in enumerate(grid.states):
        zs = grid.jumps[i]
        f = yield_at(m, x)
        for z in zs:
            if z == 0.0:
                coefs.append(float(dpsi_at(fs, x)))
            else:
                coefs.append((float(psi_at_extended(fs, x))
                              - float(psi_at_extended(fs, x - z))) / z)
            labels.append(("mu_1", float(x), float(z)))
            cs.append(f)
    A_eq = np.array([coefs])
    b_eq = np.array([float(psi_at_extended(fs, x0))])
    return LPInstance(name="aux", c=np.array(cs), A_eq=A_eq, b_eq=b_eq,
                      A_ub=np.zeros((0, len(cs))), b_ub=np.zeros(0),
                      labels=labels)


def solve_lp(lp: LPInstance, support_tol: float = 1e-10) -> LPSolution:
    """Solve by the dense two-phase simplex and re-verify the returned primal
    against the instance rows, independent of the pivoting path."""
    res: SimplexResult = solve_dense_lp(lp.c, A_eq=lp.A_eq, b_eq=lp.b_eq,
                                        A_ub=lp.A_ub, b_ub=lp.b_ub, maximize=True)
    if res.status != "optimal":
        return LPSolution(status=res.status, objective=None, x=None, support=[],
                          max_eq_violation=math.inf, max_ub_violation=math.inf,
                          iterations=res.iterations)
    x = res.x
    eq_v = float(np.max(np.abs(lp.A_eq @ x - lp.b_eq))) if len(lp.b_eq) else 0.0
    ub_v = float(np.max(lp.A_ub @ x - lp.b_ub)) if len(lp.b_ub) else 0.0
    obj = float(lp.c @ x)
    if eq_v > 1e-8 or ub_v > 1e-8:
        raise RuntimeError(f"simplex returned an infeasible point "
                           f"(eq {eq_v:.2e}, ub {ub_v:.2e})")
    if abs(obj - res.objective) > 1e-10 * max(1.0, abs(obj)):
        raise RuntimeError("objective mismatch between tableau and primal")
    support = [(lp.labels[i], float(x[i]))
               for i in np.flatnonzero(x > support_tol)]
    return LPSolution(status="optimal", objective=obj, x=x, support=support,
                      max_eq_violation=eq_v, max_ub_violation=max(ub_v, 0.0),
                      iterations=res.iterations)


@dataclass(frozen=True)
class Mu1StarReport:
    """Feasibility and value of the discretized optimal harvest measure:
    Lebesgue density on [bstar, x0] at z = 0 plus the reflection atom at
    (bstar, 0) with mass psi(bstar)/psi'(bstar)."""

    spacing: float
    constraint_residual: float    # |sum psi' w + psi(bstar) - psi(x0)|
    objective: float
    expected: float               # closed-form value at x0
    objective_gap: float


def feasibility_check_mu1star(m: ModelSpec, fs: FundamentalSolution,
                              th: Threshold, x0: float,
                              n_points: int = 201) -> Mu1StarReport:
    if not x0 > th.bstar:
        raise ValueError("the swept measure needs x0 above the threshold")
    b = th.bstar
    ys = np.linspace(b, x0, n_points)
    h = (x0 - b) / (n_points - 1)
    w = np.full(n_points, h)
    w[0] = w[-1] = h / 2.0
    atom = reflect_ratio(fs, b)

    lebesgue = float(np.dot(w, [float(dpsi_at(fs, y)) for y in ys]))
    # aux constraint: trapezoid mass + psi'(b) * atom must reproduce psi(x0),
    # and psi'(b) * psi(b)/psi'(b) collapses to psi(b)
    residual = abs(lebesgue + float(psi_at_extended(fs, b))
                   - float(psi_at_extended(fs, x0)))

    objective = float(np.dot(w, [yield_at(m, y) for y in ys])) \
        + yield_at(m, b) * atom
    expected = value_at(m, fs, th, x0).total
    return Mu1StarReport(spacing=h, constraint_residual=residual,
                         objective=objective, expected=expected,
                         objective_gap=abs(objective - expected))
