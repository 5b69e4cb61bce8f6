"""Increasing fundamental solution of the killed generator equation.

Solves (A - r) u = 0 for the strictly increasing solution normalized to
vanish at 0, where A g = (1/2) sigma^2 g'' + b g'.  Drifted Brownian motion
and geometric Brownian motion admit closed forms (an exponential pair and a
power, respectively); the logistic family is integrated numerically.  The
numeric route is also available for the closed-form families so the two can
cross-validate each other.

The solution is only determined up to a positive scale; every downstream
quantity (threshold, value, LP coefficients) is a ratio, so the scale is
fixed purely for numerical conditioning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .model import BoundaryClass, ModelSpec, drift_at, sigma2_at


@dataclass(frozen=True)
class ClosedForm:
    """Exact evaluation tag.

    kind "exp_pair": u(x) = exp(lam_plus x) - exp(lam_minus x)  (drifted BM)
    kind "power":    u(x) = x ** gamma                          (GBM)
    """

    kind: str
    lam_plus: float = 0.0
    lam_minus: float = 0.0
    gamma: float = 0.0

    def psi(self, x):
        if self.kind == "exp_pair":
            return np.exp(self.lam_plus * x) - np.exp(self.lam_minus * x)
        return np.power(x, self.gamma)

    def dpsi(self, x):
        if self.kind == "exp_pair":
            return (self.lam_plus * np.exp(self.lam_plus * x)
                    - self.lam_minus * np.exp(self.lam_minus * x))
        return self.gamma * np.power(x, self.gamma - 1.0)

    def ddpsi(self, x):
        if self.kind == "exp_pair":
            return (self.lam_plus ** 2 * np.exp(self.lam_plus * x)
                    - self.lam_minus ** 2 * np.exp(self.lam_minus * x))
        return self.gamma * (self.gamma - 1.0) * np.power(x, self.gamma - 2.0)


@dataclass(frozen=True)
class GridParams:
    """Evaluation grid: log-spaced near 0, linear above the switch point."""

    x_max: float | None = None     # default 10 * model scale
    x_min_factor: float = 1e-6     # x_min = factor * scale for natural boundaries
    n_log: int = 160
    n_lin: int = 840
    rtol: float = 1e-10
    atol: float = 1e-13
    tol_res: float = 1e-8
    tol_limit: float = 1e-4        # psi(x_min) <= tol_limit * psi(x_max) when natural


@dataclass
class FundamentalSolution:
    """Grid representation of the increasing solution and its derivatives.

    Immutable by convention once constructed; the Hermite interpolants are
    built at construction time and shared.
    """

    model: ModelSpec
    grid: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    ddpsi: np.ndarray
    boundary: BoundaryClass
    closed_form: ClosedForm | None = None
    _psi_spline: CubicHermiteSpline | None = None
    _dpsi_spline: CubicHermiteSpline | None = None

    def __post_init__(self):
        if self._psi_spline is None:
            self._psi_spline = CubicHermiteSpline(self.grid, self.psi, self.dpsi)
            self._dpsi_spline = CubicHermiteSpline(self.grid, self.dpsi, self.ddpsi)

    @property
    def x_min(self) -> float:
        return float(self.grid[0])

    @property
    def x_max(self) -> float:
        return float(self.grid[-1])


def characteristic_exponents(m: ModelSpec) -> tuple[float, float]:
    """Roots of (sigma^2/2) t^2 + mu t - r = 0 (drifted BM) or of
    (sigma^2/2) t (t-1) + mu t - r = 0 (GBM and the logistic small-x regime),
    ordered (positive root, negative root)."""
    half_s2 = 0.5 * m.sigma ** 2
    if m.family == "drifted_bm":
        a, b, c = half_s2, m.mu, -m.discount
    else:
        a, b, c = half_s2, m.mu - half_s2, -m.discount
    disc = math.sqrt(b * b - 4.0 * a * c)
    return (-b + disc) / (2.0 * a), (-b - disc) / (2.0 * a)


def _closed_form_for(m: ModelSpec) -> ClosedForm | None:
    if m.family == "drifted_bm":
        lp, lm = characteristic_exponents(m)
        return ClosedForm(kind="exp_pair", lam_plus=lp, lam_minus=lm)
    if m.family == "gbm":
        gp, _ = characteristic_exponents(m)
        return ClosedForm(kind="power", gamma=gp)
    return None


def make_grid(m: ModelSpec, bc: BoundaryClass, gp: GridParams) -> np.ndarray:
    x_max = gp.x_max if gp.x_max is not None else 10.0 * m.scale
    x_min = gp.x_min_factor * m.scale
    switch = min(1.0 * m.scale, x_max / 4.0)
    log_part = np.geomspace(x_min, switch, gp.n_log)
    lin_part = np.linspace(switch, x_max, gp.n_lin + 1)[1:]
    grid = np.concatenate([log_part, lin_part])
    if bc is not BoundaryClass.NATURAL:
        grid = np.concatenate([[0.0], grid])
    return grid


def solve_fundamental(m: ModelSpec, bc: BoundaryClass,
                      grid_params: GridParams | None = None,
                      use_closed_form: bool = True) -> FundamentalSolution:
    """Compute the increasing solution on the grid.

    Regular/exit boundary: integrate the IVP u(0)=0, u'(0)=1 rightward,
    which realizes the vanishing-at-zero normalization directly (up to
    positive scale).  Natural boundary: the equation is singular at 0, so
    integration starts at x_min with the family's power asymptotics imposed
    there and the vanishing limit is checked rather than imposed.
    """
    gp = grid_params or GridParams()
    grid = make_grid(m, bc, gp)

    cf = _closed_form_for(m) if use_closed_form else None
    if cf is not None:
        psi, dpsi, ddpsi = cf.psi(grid), cf.dpsi(grid), cf.ddpsi(grid)
        if cf.kind == "power" and grid[0] == 0.0:  # x**(gamma-2) blows up at 0
            raise RuntimeError("power closed form on a grid containing 0")
    elif bc is not BoundaryClass.NATURAL:
        psi, dpsi, ddpsi = _integrate_direct(m, grid, gp)
    else:
        psi, dpsi, ddpsi = _integrate_log(m, grid, gp)

    if cf is None:
        # Conditioning only: unit derivative near the (guessed) threshold.
        anchor = max(1.0, float(grid[int(np.argmin(dpsi))]))
        anchor = min(anchor, float(grid[-1]))
        s = float(np.interp(anchor, grid, dpsi))
        psi, dpsi, ddpsi = psi / s, dpsi / s, ddpsi / s

    _check_invariants(m, bc, grid, psi, dpsi, ddpsi, gp)
    return FundamentalSolution(model=m, grid=grid, psi=psi, dpsi=dpsi,
                               ddpsi=ddpsi, boundary=bc, closed_form=cf)


def _rhs_direct(m: ModelSpec):
    def rhs(x, y):
        u, v = y
        return [v, 2.0 * (m.discount * u - drift_at(m, x) * v) / sigma2_at(m, x)]
    return rhs


def _integrate_direct(m: ModelSpec, grid, gp: GridParams):
    sol = solve_ivp(_rhs_direct(m), (grid[0], grid[-1]), [0.0, 1.0],
                    method="RK45", rtol=gp.rtol, atol=gp.atol, dense_output=True)
    if not sol.success:
        raise RuntimeError(f"IVP integration failed: {sol.message}")
    u, v = sol.sol(grid)
    ddpsi = _from_ode_relation(m, grid, u, v)
    return u, v, ddpsi


def _integrate_log(m: ModelSpec, grid, gp: GridParams):
    """Integrate in y = log x, where the state-proportional-noise families
    have bounded coefficients: w'' = (1 - 2 b(x)/(sigma^2 x)) w' + (2r/sigma^2) w."""
    s2 = m.sigma ** 2
    gamma_plus, _ = characteristic_exponents(m)

    def rhs(y, z):
        w, dw = z
        x = math.exp(y)
        bx_over_x = m.mu if m.family == "gbm" else m.mu * (1.0 - x / m.K)
        return [dw, (1.0 - 2.0 * bx_over_x / s2) * dw + (2.0 * m.discount / s2) * w]

    y_grid = np.log(grid)
    sol = solve_ivp(rhs, (y_grid[0], y_grid[-1]), [1.0, gamma_plus],
                    method="RK45", rtol=gp.rtol, atol=gp.atol, dense_output=True)
    if not sol.success:
        raise RuntimeError(f"IVP integration failed: {sol.message}")
    w, dw = sol.sol(y_grid)
    psi = w
    dpsi = dw / grid
    ddpsi = _from_ode_relation(m, grid, psi, dpsi)
    return psi, dpsi, ddpsi


def _from_ode_relation(m: ModelSpec, grid, psi, dpsi):
    """psi'' recovered from the equation itself, 2(r psi - b psi')/sigma^2,
    which is exact on the continuous solution and free of difference noise."""
    b = np.array([drift_at(m, x) for x in grid])
    s2 = np.array([sigma2_at(m, x) for x in grid])
    if grid[0] == 0.0 and s2[0] == 0.0:
        raise RuntimeError("degenerate diffusion at a grid node at 0")
    return 2.0 * (m.discount * psi - b * dpsi) / s2


def _check_invariants(m, bc, grid, psi, dpsi, ddpsi, gp: GridParams):
    if not np.all(np.isfinite(psi)) or not np.all(np.isfinite(dpsi)):
        raise RuntimeError("fundamental solution overflowed; reduce x_max "
                           "(rapid growth above the carrying capacity)")
    if np.any(dpsi <= 0.0) or np.any(np.diff(psi) <= 0.0):
        bad = int(np.argmin(dpsi))
        raise RuntimeError("increasing solution not isolated; refine grid or "
                           f"check parameters (psi' = {dpsi[bad]:.3e} at "
                           f"x = {grid[bad]:.6g})")
    res = 0.5 * np.array([sigma2_at(m, x) for x in grid]) * ddpsi \
        + np.array([drift_at(m, x) for x in grid]) * dpsi - m.discount * psi
    bound = gp.tol_res * (1.0 + np.abs(m.discount * psi))
    if np.any(np.abs(res) > bound):
        worst = int(np.argmax(np.abs(res) - bound))
        raise RuntimeError(f"ODE residual {res[worst]:.3e} exceeds tolerance at "
                           f"x = {grid[worst]:.6g}")
    if bc is BoundaryClass.NATURAL and psi[0] > gp.tol_limit * psi[-1]:
        raise RuntimeError("psi does not vanish towards 0 within tolerance; "
                           "x_min may be too large for this model")


def _check_range(fs: FundamentalSolution, x) -> None:
    x = np.asarray(x)
    if fs.closed_form is not None:
        if np.any(x < 0.0):
            raise ValueError("psi evaluation needs x >= 0")
        return
    slack = 1e-12 * max(1.0, fs.x_max)
    if np.any(x < fs.x_min - slack) or np.any(x > fs.x_max + slack):
        raise ValueError(f"x outside the computed range [{fs.x_min:.6g}, "
                         f"{fs.x_max:.6g}] and no closed form is available")


def psi_at(fs: FundamentalSolution, x):
    _check_range(fs, x)
    if fs.closed_form is not None:
        return fs.closed_form.psi(x)
    return fs._psi_spline(np.clip(x, fs.x_min, fs.x_max))


def dpsi_at(fs: FundamentalSolution, x):
    _check_range(fs, x)
    if fs.closed_form is not None:
        return fs.closed_form.dpsi(x)
    return fs._dpsi_spline(np.clip(x, fs.x_min, fs.x_max))


def psi_at_extended(fs: FundamentalSolution, x):
    """psi with the gap [0, x_min) filled by the local power behaviour.

    Natural-boundary grids stop at x_min > 0, but harvesting jumps evaluate
    psi all the way down to extinction; psi(t) ~ psi(x_min) (t/x_min)^s with
    the slope fitted at the two smallest nodes is exact for power solutions
    and vanishes at 0 as required.
    """
    if fs.closed_form is not None or fs.grid[0] == 0.0:
        return psi_at(fs, x)
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0.0):
        raise ValueError("psi evaluation needs x >= 0")
    s = math.log(fs.psi[1] / fs.psi[0]) / math.log(fs.grid[1] / fs.grid[0])
    below = xs < fs.x_min
    out = np.where(below,
                   fs.psi[0] * np.power(np.maximum(xs, 0.0) / fs.x_min,
                                        max(s, 1e-12)),
                   fs._psi_spline(np.clip(xs, fs.x_min, fs.x_max)))
    if np.any(xs > fs.x_max + 1e-12 * max(1.0, fs.x_max)):
        raise ValueError(f"x above the computed range {fs.x_max:.6g}")
    return out if np.ndim(x) else float(out)


def ddpsi_at(fs: FundamentalSolution, x):
    """Second derivative through the equation, consistent with the stored
    node values by construction."""
    _check_range(fs, x)
    if fs.closed_form is not None:
        return fs.closed_form.ddpsi(x)
    m = fs.model
    xs = np.clip(x, fs.x_min, fs.x_max)
    b = _vec(lambda t: drift_at(m, t), xs)
    s2 = _vec(lambda t: sigma2_at(m, t), xs)
    out = 2.0 * (m.discount * fs._psi_spline(xs) - b * fs._dpsi_spline(xs)) / s2
    return out if np.ndim(x) else float(out)


def ode_residual(fs: FundamentalSolution, x):
    """(A - r) psi evaluated through the interpolants; a direct accuracy probe."""
    m = fs.model
    s2 = _vec(lambda t: sigma2_at(m, t), x)
    b = _vec(lambda t: drift_at(m, t), x)
    out = 0.5 * s2 * ddpsi_at(fs, x) + b * dpsi_at(fs, x) - m.discount * psi_at(fs, x)
    return out if np.ndim(x) else float(out)


def _vec(fn, x):
    if np.ndim(x) == 0:
        return fn(float(x))
    return np.array([fn(float(t)) for t in np.asarray(x).ravel()]).reshape(np.shape(x))
