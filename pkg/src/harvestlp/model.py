"""Problem data for the harvesting model: diffusion family, discount, yield.

Three parametric diffusion families on the nonnegative half line are
supported (drifted Brownian motion, geometric Brownian motion, stochastic
logistic growth) together with three nonincreasing marginal-yield families.
Everything here is a pure function of the immutable spec, so instances can
be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from scipy.integrate import quad

FAMILIES = ("drifted_bm", "gbm", "logistic")
YIELD_KINDS = ("constant", "exponential", "rational")


class BoundaryClass(Enum):
    """Feller type of the boundary point 0.

    Entrance behaviour is rejected outright: a population that went extinct
    does not reappear, so models whose boundary 0 can only be entered from
    outside make no sense here.
    """

    EXIT = "exit"
    NATURAL = "natural"
    REGULAR = "regular"


@dataclass(frozen=True)
class YieldSpec:
    """Marginal yield f(x): continuous, nonincreasing, 0 < f(0) < inf.

    kind "constant":    f(x) = p
    kind "exponential": f(x) = p * exp(-alpha x)
    kind "rational":    f(x) = p / (1 + alpha x)
    """

    kind: str
    p: float
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in YIELD_KINDS:
            raise ValueError(f"unknown yield kind {self.kind!r}")
        if not self.p > 0:
            raise ValueError("yield level p must be positive")
        if self.alpha < 0:
            raise ValueError("yield decay alpha must be nonnegative (f nonincreasing)")


@dataclass(frozen=True)
class ModelSpec:
    """Diffusion dX = b(X)dt + sigma(X)dW with discount r and yield f.

    family "drifted_bm": b(x) = mu,           sigma(x) = sigma
    family "gbm":        b(x) = mu x,         sigma(x) = sigma x
    family "logistic":   b(x) = mu x (1-x/K), sigma(x) = sigma x
    """

    family: str
    mu: float
    sigma: float
    discount: float
    yield_fn: YieldSpec
    K: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.discount > 0:
            raise ValueError("discount rate must be positive")
        if self.family == "logistic":
            if self.K is None or not self.K > 0:
                raise ValueError("logistic family needs a positive carrying capacity K")
            if not self.mu > 0:
                raise ValueError("logistic growth rate mu must be positive")
        elif self.K is not None:
            raise ValueError(f"family {self.family!r} takes no carrying capacity")

    @property
    def scale(self) -> float:
        """Characteristic state scale used for grid and truncation defaults."""
        return float(self.K) if self.family == "logistic" else 1.0

    def to_json(self) -> dict:
        params = {"mu": self.mu, "sigma": self.sigma}
        if self.family == "logistic":
            params["K"] = self.K
        ypar = {"p": self.yield_fn.p}
        if self.yield_fn.kind != "constant":
            ypar["alpha"] = self.yield_fn.alpha
        return {
            "family": self.family,
            "params": params,
            "discount": self.discount,
            "yield": {"kind": self.yield_fn.kind, "params": ypar},
        }

    @staticmethod
    def from_json(doc: dict) -> "ModelSpec":
        y = doc["yield"]
        yield_fn = YieldSpec(kind=y["kind"], p=y["params"]["p"],
                             alpha=y["params"].get("alpha", 0.0))
        params = doc["params"]
        return ModelSpec(family=doc["family"], mu=params["mu"], sigma=params["sigma"],
                         discount=doc["discount"], yield_fn=yield_fn,
                         K=params.get("K"))


def drift_at(m: ModelSpec, x: float) -> float:
    """Drift b(x) of the uncontrolled diffusion."""
    if m.family == "drifted_bm":
        return m.mu
    if m.family == "gbm":
        return m.mu * x
    return m.mu * x * (1.0 - x / m.K)


def sigma2_at(m: ModelSpec, x: float) -> float:
    """Squared diffusion coefficient sigma(x)^2."""
    if m.family == "drifted_bm":
        return m.sigma ** 2
    return (m.sigma * x) ** 2


def yield_at(m: ModelSpec, x: float) -> float:
    """Marginal yield f(x)."""
    y = m.yield_fn
    if y.kind == "constant":
        return y.p
    if y.kind == "exponential":
        return y.p * math.exp(-y.alpha * x)
    return y.p / (1.0 + y.alpha * x)


def yield_derivative_at(m: ModelSpec, x: float) -> float:
    """Analytic f'(x); never finite-differenced (the downstream generator
    inequality is tight at the threshold, so difference noise is not
    acceptable there)."""
    y = m.yield_fn
    if y.kind == "constant":
        return 0.0
    if y.kind == "exponential":
        return -y.p * y.alpha * math.exp(-y.alpha * x)
    return -y.p * y.alpha / (1.0 + y.alpha * x) ** 2


def yield_integral(m: ModelSpec, a: float, b: float) -> float:
    """Exact integral of f over [a, b] (closed form per family)."""
    y = m.yield_fn
    if b < a:
        raise ValueError("yield_integral needs a <= b")
    if y.kind == "constant" or y.alpha == 0.0:
        return y.p * (b - a)
    if y.kind == "exponential":
        return y.p * (math.exp(-y.alpha * a) - math.exp(-y.alpha * b)) / y.alpha
    return (y.p / y.alpha) * math.log((1.0 + y.alpha * b) / (1.0 + y.alpha * a))


# ---------------------------------------------------------------------------
# Boundary classification at 0
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegrationParams:
    """Probe used to classify the boundary by integral divergence.

    The hitting and entering integrals are computed on [eps, x_ref] for a
    sweep of shrinking eps; divergence is read off the growth trend of the
    increments, which is compared against the logarithmic-divergence rate.
    """

    x_ref: float = 1.0
    eps_sweep: tuple = (1e-4, 1e-6, 1e-8)
    abs_tol: float = 1e-8
    quad_limit: int = 200


class AmbiguousBoundaryError(RuntimeError):
    """Raised when the divergence trend is too close to call; the caller
    should refine the probe (smaller eps, tighter quadrature)."""


def _scale_logdensity(m: ModelSpec, x: float, x_ref: float) -> float:
    """log of the scale density s(x) = exp(-int_{x_ref}^x 2 b / sigma^2),
    closed form for every family."""
    if m.family == "drifted_bm":
        return -2.0 * m.mu * (x - x_ref) / m.sigma ** 2
    alpha = 2.0 * m.mu / m.sigma ** 2
    out = -alpha * math.log(x / x_ref)
    if m.family == "logistic":
        out += (alpha / m.K) * (x - x_ref)
    return out


def scale_density(m: ModelSpec, x: float, x_ref: float = 1.0) -> float:
    return math.exp(_scale_logdensity(m, x, x_ref))


def speed_density(m: ModelSpec, x: float, x_ref: float = 1.0) -> float:
    return 1.0 / (sigma2_at(m, x) * scale_density(m, x, x_ref))


def _tail(fn, a: float, b: float, limit: int) -> float:
    """Integral of fn over [a, b] with 0 < a << b, done in log space where the
    power-law behaviour near 0 is tame.  full_output=1 suppresses the
    IntegrationWarning chatter from borderline-divergent integrands."""
    out = quad(lambda u: fn(math.exp(u)) * math.exp(u),
               math.log(a), math.log(b), limit=limit, full_output=1)
    return out[0]


def classify_boundary_zero(m: ModelSpec,
                           probe: IntegrationParams | None = None) -> BoundaryClass:
    """Classify the boundary point 0 as exit, natural, or regular.

    Uses the standard two scale/speed integrals near 0:
      hitting  H(eps) = int_eps^c s(y) * M((y, c]) dy   (finite <=> 0 attainable)
      entering E(eps) = int_eps^c m(y) * S((y, c]) dy   (finite <=> 0 can enter)
    regular = both finite, exit = H finite only, natural = both infinite.
    Entrance (E finite only) is rejected: extinction must be absorbing.
    """
    probe = probe or IntegrationParams()
    c = probe.x_ref * m.scale
    s = lambda y: scale_density(m, y, c)
    mm = lambda y: speed_density(m, y, c)

    def hitting(eps):
        return _tail(lambda y: s(y) * _tail(mm, y, c, probe.quad_limit),
                     eps, c, probe.quad_limit)

    def entering(eps):
        return _tail(lambda y: mm(y) * _tail(s, y, c, probe.quad_limit),
                     eps, c, probe.quad_limit)

    h_fin = _converges(hitting, probe)
    e_fin = _converges(entering, probe)
    if h_fin and e_fin:
        return BoundaryClass.REGULAR
    if h_fin and not e_fin:
        return BoundaryClass.EXIT
    if not h_fin and not e_fin:
        return BoundaryClass.NATURAL
    raise ValueError("boundary 0 classifies as entrance; the model is rejected "
                     "because an extinct population cannot reappear")


def _converges(integral, probe: IntegrationParams) -> bool:
    """Decide convergence of integral(eps) as eps -> 0 from the sweep trend.

    Increments of a log-divergent integral stay constant between successive
    eps decades, power divergence grows, an integrable singularity decays
    geometrically. The increment ratio separates the three cleanly; a ratio
    in the ambiguous band aborts with advice to refine.
    """
    vals = []
    for eps in probe.eps_sweep:
        v = integral(eps)
        if not math.isfinite(v) or v > 1e12:
            return False
        vals.append(v)
    d = [vals[i + 1] - vals[i] for i in range(len(vals) - 1)]
    scale = max(abs(vals[-1]), 1.0)
    if all(abs(di) <= probe.abs_tol * scale for di in d):
        return True
    if abs(d[0]) <= probe.abs_tol * scale < abs(d[-1]):
        return False
    ratio = d[-1] / d[0]
    if ratio >= 0.8:
        return False
    if ratio <= 0.2:
        return True
    raise AmbiguousBoundaryError(
        f"increment ratio {ratio:.3f} is too close to the log-divergence rate; "
        "refine IntegrationParams (smaller eps_sweep / larger quad_limit)")
