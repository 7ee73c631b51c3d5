"""Explicit bounds for SK-metrics and sampled comparison checks.

The checks here are numerical: the SK property (curvature at most -4)
is spot-checked at the sample points plus a seeded batch of random
points, and domination is tested pointwise. A passing verdict is evidence,
not proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np

from . import config
from .errors import ConstraintError, PoleError, SKCheckError
from .metrics import (
    MetricField,
    LambdaAlphaRParams,
    hyperbolic_disk_density,
    lambda_alpha_R,
    numeric_curvature,
)

# Lanczos approximation, g = 7 with the usual nine coefficients
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma_fn(x: float) -> float:
    """Gamma function by the Lanczos approximation, reflected below 1/2."""
    x = float(x)
    if x <= 0 and x == math.floor(x):
        raise PoleError(f"Gamma has a pole at {x:g}", x)
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))
    x -= 1.0
    acc = _LANCZOS[0]
    for i, c in enumerate(_LANCZOS[1:], start=1):
        acc += c / (x + i)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (x + 0.5) * math.exp(-t) * acc


def binom_general(tau: float, j: int) -> float:
    """``tau (tau-1) ... (tau-j+1) / j!`` for real ``tau``."""
    if j < 0 or int(j) != j:
        raise ValueError("j must be a nonnegative integer")
    out = 1.0
    for i in range(int(j)):
        out *= (tau - i) / (i + 1)
    return out


class ThreePunctureParams(NamedTuple):
    """Orders at the three punctures; the bound concerns the first one."""

    alpha: float
    beta: float
    gamma: float

    def validate(self) -> ThreePunctureParams:
        a, b, g = self
        if not (0 < a < 1 and 0 < b < 1 and 0 < g <= 1):
            raise ConstraintError(f"need alpha, beta in (0,1) and gamma in (0,1], got {tuple(self)}")
        if not a + b + g > 2:
            raise ConstraintError(f"need alpha + beta + gamma > 2, got {a + b + g:g}")
        return self

    @property
    def a(self) -> float:
        return (self.alpha + self.beta - self.gamma) / 2

    @property
    def b(self) -> float:
        return (self.alpha + self.beta + self.gamma - 2) / 2

    @property
    def c(self) -> float:
        return self.alpha

    def permuted(self, order: Sequence[int]) -> ThreePunctureParams:
        """Reassign roles, e.g. ``(1, 0, 2)`` puts ``beta`` first. Applying
        the formula at another puncture this way is an interpretation."""
        vals = tuple(self)
        return ThreePunctureParams(*(vals[i] for i in order))


class DeltaBound(NamedTuple):
    delta: float
    bound: float
    params: ThreePunctureParams


def delta_three_puncture(p: ThreePunctureParams) -> DeltaBound:
    """The Gamma-product ``delta`` and the bound ``delta (1-alpha) / (1-delta^2)``."""
    p = ThreePunctureParams(*p).validate()
    a, b, c = p.a, p.b, p.c
    num = [1 - a, 1 - b, a + 1 - c, b + 1 - c]
    den = [a, b, c - a, c - b]
    vals = {}
    for x in [c, 2 - c] + num + den:
        try:
            vals[x] = gamma_fn(x)
        except PoleError as exc:
            raise PoleError(f"Gamma pole at argument {x:g} for {tuple(p)}", x) from exc
    ratio = math.prod(vals[x] for x in num) / math.prod(vals[x] for x in den)
    if not ratio > 0:
        raise ConstraintError(f"Gamma ratio {ratio:g} is not positive for {tuple(p)}")
    delta = vals[c] / vals[2 - c] * math.sqrt(ratio)
    bound = math.inf if delta == 1 else delta * (1 - p.alpha) / (1 - delta**2)
    return DeltaBound(delta, bound, p)


# -- verdicts --------------------------------------------------------------

@dataclass
class Verdict:
    check: str
    passed: bool
    measured: float | None = None
    margin: float | None = None
    witness: complex | None = None
    details: dict[str, Any] = field(default_factory=dict)
    message: str = ""


def _random_points(rng, n, r_lo, r_hi):
    rad = r_lo * (r_hi / r_lo) ** rng.random(n)
    return rad * np.exp(2j * math.pi * rng.random(n))


def sk_spot_check(sigma: MetricField, sample, *, n_random: int = config.SK_RANDOM_POINTS,
                  tol: float = config.SK_CURVATURE_TOL, seed: int = config.DEFAULT_SEED) -> float:
    """Raise ``SKCheckError`` unless the numeric curvature is at most
    ``-4 + tol`` at every sample point and at ``n_random`` seeded random
    points of the domain. Returns the largest curvature seen."""
    dom = sigma.domain
    outer = min(dom.outer, 1.0) if math.isfinite(dom.outer) else 1.0
    rng = np.random.default_rng(seed)
    pts = list(np.ravel(np.asarray(sample, dtype=complex)))
    pts += list(dom.center + _random_points(rng, n_random, 1e-3 * outer, 0.95 * outer))
    worst = -math.inf
    for z in pts:
        k = numeric_curvature(sigma, z)
        worst = max(worst, k)
        if k > -4.0 + tol:
            raise SKCheckError(
                f"{sigma.name}: curvature {k:.6g} > -4 at {complex(z)!r}; not an SK-metric",
                complex(z), k)
    return worst


def _domination(check, sigma, bound, pts, **details):
    s = np.asarray(sigma(pts), dtype=float)
    b = np.asarray(bound(pts), dtype=float)
    rel = (b - s) / b
    k = int(np.argmin(rel))
    ok = bool(np.all(s <= b * (1 + 1e-12)))
    n_bad = int(np.sum(s > b * (1 + 1e-12)))
    return Verdict(check, ok, measured=float(s[k] / b[k]), margin=float(rel[k]),
                   witness=complex(pts[k]),
                   details={"violations": n_bad, "points": int(len(pts)), **details},
                   message="dominated" if ok else f"{n_bad} violation(s)")


def _default_sample(seed, n, outer):
    rng = np.random.default_rng(seed)
    return _random_points(rng, n, 1e-3 * outer, 0.99 * outer)


def ahlfors_check(sigma: MetricField, sample=None, *, seed: int = config.DEFAULT_SEED,
                  n_sample: int = 200, tol: float = config.SK_CURVATURE_TOL) -> Verdict:
    """``sigma <= lambda_D`` on the sample, after the SK spot-check."""
    pts = _default_sample(seed, n_sample, 1.0) if sample is None else np.asarray(sample, complex)
    pts = np.ravel(pts)
    worst = sk_spot_check(sigma, pts, tol=tol, seed=seed)
    return _domination("ahlfors", sigma, hyperbolic_disk_density, pts, max_curvature=worst)


def maximality_check(sigma: MetricField, alpha: float, R: float, sample=None, *,
                     seed: int = config.DEFAULT_SEED, n_sample: int = 200,
                     tol: float = config.SK_CURVATURE_TOL, order_tol: float = 0.02) -> Verdict:
    """``sigma <= lambda_{alpha,R}`` on the sample, after the SK spot-check."""
    from .asymptotics import estimate_order

    p = LambdaAlphaRParams(alpha, R).validate()
    pts = _default_sample(seed, n_sample, R) if sample is None else np.asarray(sample, complex)
    pts = np.ravel(pts)
    worst = sk_spot_check(sigma, pts, tol=tol, seed=seed)
    v = _domination("maximality", sigma, lambda z: lambda_alpha_R(p, z), pts,
                    max_curvature=worst, alpha=alpha, R=R)
    order = estimate_order(sigma)
    v.details["order"] = order.alpha
    if order.alpha > alpha + order_tol:
        v.passed = False
        v.message = (f"order {order.alpha:.3f} exceeds {alpha:g}: sigma cannot stay below "
                     f"the bound near the puncture; " + v.message)
    return v


def corner_bound_check(field: MetricField, alpha: float, *, seed: int = config.DEFAULT_SEED,
                       sample=None, tol: float = 0.01, order_tol: float = 0.02,
                       sk_tol: float = config.SK_CURVATURE_TOL) -> Verdict:
    """``limsup |z|^alpha sigma(z) <= 1 - alpha`` for an SK-metric of order ``alpha``."""
    from .asymptotics import estimate_order, sk_limsup

    if not 0 < alpha < 1:
        raise ConstraintError(f"corner order must lie in (0,1), got {alpha}")
    pts = np.ravel(np.asarray([] if sample is None else sample, dtype=complex))
    worst = sk_spot_check(field, pts, tol=sk_tol, seed=seed)
    order = estimate_order(field)
    l_val = sk_limsup(field, alpha)
    margin = (1.0 - alpha) - l_val
    v = Verdict("corner_bound", margin >= -tol, measured=l_val, margin=margin,
                details={"alpha": alpha, "bound": 1.0 - alpha, "order": order.alpha,
                         "max_curvature": worst})
    v.message = "l <= 1 - alpha" if v.passed else "l exceeds 1 - alpha"
    if abs(order.alpha - alpha) > order_tol:
        v.passed = False
        v.message = f"order mismatch: measured {order.alpha:.3f}, claimed {alpha:g}"
    return v
