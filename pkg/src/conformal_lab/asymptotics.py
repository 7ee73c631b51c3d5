"""Orders, growth rates and limits of metrics at an isolated singularity.

The limits of interest converge like powers of ``1/L`` with
``L = log(1/|z - p|)``, so sampling at a tiny radius is not enough: every
limit is evaluated on a ladder of radii ``r = s e^{-L}`` and extrapolated
to ``1/L = 0`` by polynomial (Neville) extrapolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import config
from .bounds import binom_general
from .errors import (
    ConstraintError,
    DegenerateFitError,
    LimitDivergenceError,
    ParameterError,
)
from .metrics import MetricField, wirtinger_derivs
from .solver import RemainderField


@dataclass(frozen=True)
class LimitEstimate:
    value: float
    raw_tail: float
    extrapolation_error: float
    converged: bool = True
    expected: float | None = None
    spread: float = 0.0
    samples: tuple = ()

    def agrees(self, target: float, atol: float = 0.0, rtol: float = 0.0) -> bool:
        return abs(self.value - target) <= atol + rtol * abs(target)


@dataclass(frozen=True)
class OrderEstimate:
    alpha: float
    samples: tuple
    regression_residual: float
    converged: bool = True


@dataclass(frozen=True)
class RateFit:
    p: float
    q: float
    C: float
    r_squared: float
    residual: float = 0.0


@dataclass(frozen=True)
class RateCheck:
    pattern: tuple[int, int]
    fit: RateFit | None
    predicted: tuple[float, float]
    consistent: bool
    matches: bool
    note: str = ""


@dataclass
class LimitTable:
    mode: str
    entries: dict[tuple[int, int], LimitEstimate]
    closed_form: dict[tuple[int, int], float]

    def max_relative_error(self) -> float:
        errs = []
        for k, est in self.entries.items():
            ref = self.closed_form[k]
            errs.append(abs(est.value - ref) / max(abs(ref), 1e-300))
        return max(errs)

    def symmetric(self, slack: float = 1e-6) -> bool:
        for (n1, n2), est in self.entries.items():
            other = self.entries.get((n2, n1))
            if other is None:
                continue
            bar = est.extrapolation_error + other.extrapolation_error + slack * (1 + abs(est.value))
            if abs(est.value - other.value) > bar:
                return False
        return True


# -- sampling helpers -----------------------------------------------------

def _unpack(field):
    """Callable, puncture, domain radius for a metric or a bare callable."""
    if isinstance(field, MetricField):
        dom = field.domain
        return field.eval, dom.center, dom.outer
    if callable(field):
        return field, 0j, math.inf
    raise ParameterError("expected a MetricField or a callable")


def _default_radii(outer: float):
    scale = 1.0 if not math.isfinite(outer) else min(1.0, outer)
    return config.limit_radii(scale)


def _ring(center, r, n_theta):
    return center + r * np.exp(2j * math.pi * (np.arange(n_theta) + 0.5) / n_theta)


def _check_radii(radii, minimum):
    radii = [float(r) for r in radii]
    if len(radii) < minimum:
        raise ParameterError(f"need at least {minimum} radii, got {len(radii)}")
    if any(not r > 0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ParameterError("radii must be positive and strictly decreasing")
    return radii


def _extrapolate(x, y, max_levels=config.RICHARDSON_LEVELS):
    """Neville extrapolation of ``y(x)`` to ``x = 0`` on the tail of the data.

    Extrapolants through the last 1, 2, ... points are compared; the one
    whose increment over its predecessor is smallest is returned together
    with that increment. Returns ``(value, error, converged)``.
    """
    x = np.asarray(x, dtype=float)[-max_levels:]
    y = np.asarray(y, dtype=float)[-max_levels:]
    n = len(x)
    # T[k] = extrapolant through the last k+1 points
    table = list(y)
    diag = [y[-1]]
    for k in range(1, n):
        new = []
        for i in range(n - k):
            xi, xj = x[i], x[i + k]
            new.append((xj * table[i] - xi * table[i + 1]) / (xj - xi))
        table = new
        diag.append(table[-1])
    diag = np.asarray(diag)
    if n == 1:
        return float(diag[0]), math.inf, False
    inc = np.abs(np.diff(diag))
    k = int(np.argmin(inc))
    value, err = float(diag[k + 1]), float(inc[k])
    # a growing final increment with no settled earlier one signals an
    # oscillating or divergent tail
    scale = 1.0 + abs(value)
    converged = bool(err <= 1e-2 * scale or inc[-1] <= inc[0])
    return value, err, converged


def richardson_limit(samples: Sequence[tuple[float, float]], *,
                     max_levels: int = config.RICHARDSON_LEVELS) -> LimitEstimate:
    """Limit of ``g(r)`` as ``r -> 0`` assuming ``g = g0 + c1/L + c2/L^2 + ...``."""
    if len(samples) < 4:
        raise ParameterError("need at least 4 samples to extrapolate")
    r = np.array([s[0] for s in samples], dtype=float)
    g = np.array([s[1] for s in samples], dtype=float)
    if np.any(r <= 0) or np.any(r >= 1):
        raise ParameterError("radii must lie in (0, 1) so that L = log(1/r) > 0")
    order = np.argsort(-r)
    r, g = r[order], g[order]
    x = 1.0 / np.log(1.0 / r)
    value, err, ok = _extrapolate(x, g, max_levels)
    return LimitEstimate(value, float(g[-1]), err, ok, samples=tuple(zip(r.tolist(), g.tolist())))


def _unit_derivs(f, k, z, center):
    """``r^k dbar^a d^b f(z)`` for ``a + b = k``, ``r = |z - center|``.

    Differentiating ``g(t) = f(z + r t)`` at ``t = 0`` keeps the numbers
    of order one even where ``r^{-k}`` alone would overflow.
    """
    w = z - center
    r = abs(w)

    def g(t):
        return f(z + r * np.asarray(t))

    return wirtinger_derivs(g, k, 0j, center=-w / r)


# -- orders ------------------------------------------------------------------

def estimate_order(field, radii=None, *, n_theta: int = config.THETA_SAMPLES) -> OrderEstimate:
    """Order of ``log lambda`` at the puncture.

    ``M(r) = max_theta log lambda`` is sampled on the radii; the slope
    ``(M_i - M_{i+1}) / (L_i - L_{i+1})`` has the same limit as
    ``M / L`` but without the ``O(1/L)`` offset, and is extrapolated in
    ``1/L``.
    """
    f, center, outer = _unpack(field)
    radii = _check_radii(_default_radii(outer) if radii is None else radii, 4)
    M = np.array([np.max(np.log(f(_ring(center, r, n_theta)))) for r in radii])
    L = np.log(1.0 / np.asarray(radii))
    slopes = np.diff(M) / np.diff(L)
    L_mid = 0.5 * (L[1:] + L[:-1])
    value, err, ok = _extrapolate(1.0 / L_mid, slopes)
    if not ok:
        raise LimitDivergenceError(f"order estimate does not settle (increment {err:.3g})")
    return OrderEstimate(value, tuple(zip(radii, M.tolist())), err, ok)


# -- rate fits ---------------------------------------------------------------

def fit_rate(samples: Sequence[tuple[float, float]], *, fit_log: bool = True) -> RateFit:
    """Least-squares fit ``g ~ C r^p (log 1/r)^q`` in log coordinates."""
    if len(samples) < 5:
        raise ParameterError("need at least 5 samples for a rate fit")
    r = np.array([s[0] for s in samples], dtype=float)
    g = np.array([s[1] for s in samples], dtype=float)
    if np.any(np.diff(r) >= 0):
        raise ParameterError("radii must be strictly decreasing")
    if np.any(r <= 0) or np.any(r >= 1):
        raise ParameterError("radii must lie in (0, 1)")
    if np.any(g <= 0) or not np.all(np.isfinite(g)):
        raise ParameterError("sampled values must be positive and finite")
    cols = [np.ones_like(r), np.log(r)]
    if fit_log:
        cols.append(np.log(np.log(1.0 / r)))
    A = np.column_stack(cols)
    y = np.log(g)
    if np.linalg.cond(A) > 1e10:
        raise DegenerateFitError("radii too clustered to separate the power and log exponents")
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    ss_res = float(res @ res)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    q = float(coef[2]) if fit_log else 0.0
    return RateFit(float(coef[1]), q, float(math.exp(coef[0])), r2, float(np.max(np.abs(res))))


def predicted_rate(alpha: float, n1: int, n2: int) -> tuple[float, float]:
    """Exponents ``(p, q)`` of the upper bound for ``dbar^n1 d^n2`` of the remainder."""
    n = n1 + n2
    if alpha == 1:
        return (-float(n), -2.0 if n1 == 0 or n2 == 0 else -3.0)
    if n == 1:
        return (1.0 - 2.0 * alpha if alpha > 0.5 else 0.0, 0.0)
    return (2.0 - 2.0 * alpha - n, 0.0)


def _smooth_interpolant(rem: RemainderField):
    """Quintic spline of nodal remainder values in (log r, theta)."""
    from scipy.interpolate import RectBivariateSpline

    g = rem.grid
    pad = 6
    th = g.thetas
    th_ext = np.concatenate([th[-pad:] - 2 * math.pi, th, th[:pad] + 2 * math.pi])
    vals = np.concatenate([rem.values[:, -pad:], rem.values, rem.values[:, :pad]], axis=1)
    spl = RectBivariateSpline(np.log(g.radii), th_ext, vals, kx=5, ky=5)

    def f(z):
        z = np.asarray(z, dtype=complex)
        t = np.mod(np.angle(z), 2 * math.pi)
        return spl.ev(np.log(np.abs(z)), t).reshape(z.shape)

    return f, g.r_min, g.r_max


def check_remainder_rates(rem, alpha: float, n: int, radii=None, *,
                          n_theta: int = 8, p_tol: float = 0.05, q_tol: float = 0.3,
                          patterns=None, center: complex = 0j) -> list[RateCheck]:
    """Fit the decay of ``|dbar^n1 d^n2 rem|`` for every pattern of total order
    ``1..n`` (or the given ``patterns``) and compare with the predicted
    exponents.

    ``rem`` is a callable remainder (closed form) or a ``RemainderField``
    from the solver, which is differentiated through a quintic spline.
    ``consistent`` means the measured growth is no faster than predicted;
    ``matches`` means the exponents agree within the tolerances.
    """
    if not 1 <= n <= 5:
        raise ParameterError("derivative order must be between 1 and 5")
    if not alpha <= 1:
        raise ParameterError("alpha must be <= 1")
    if radii is None:
        radii = config.CUSP_RATE_RADII if alpha == 1 else config.RATE_RADII
    if isinstance(rem, RemainderField):
        f, r_lo, r_hi = _smooth_interpolant(rem)
        radii = [r for r in radii if 1.2 * r_lo < r < 0.8 * r_hi]
    else:
        f = rem
    radii = _check_radii(radii, 5)
    if patterns is None:
        patterns = [(k - j, j) for k in range(1, n + 1) for j in range(k + 1)]
    orders = sorted({a + b for a, b in patterns})
    g = {pat: [] for pat in patterns}
    for r in radii:
        best = {pat: 0.0 for pat in patterns}
        for z in _ring(center, r, n_theta):
            for k in orders:
                d = wirtinger_derivs(f, k, z, center=center)
                for pat in patterns:
                    if sum(pat) == k:
                        best[pat] = max(best[pat], abs(d[pat]))
        for pat in patterns:
            g[pat].append(best[pat])
    out = []
    for pat in patterns:
        pred = predicted_rate(alpha, *pat)
        vals = np.asarray(g[pat])
        if np.all(vals <= 1e-300):
            out.append(RateCheck(pat, None, pred, True, False, "derivative vanishes"))
            continue
        fit = fit_rate(list(zip(radii, vals)), fit_log=alpha == 1)
        consistent = fit.p >= pred[0] - p_tol
        matches = abs(fit.p - pred[0]) <= p_tol and (alpha != 1 or abs(fit.q - pred[1]) <= q_tol)
        out.append(RateCheck(pat, fit, pred, bool(consistent), bool(matches)))
    return out


# -- limits ------------------------------------------------------------------

def _limit_of(quantity: Callable[[complex, float], complex], center, radii, n_theta,
              reduce: str = "mean", expected=None) -> LimitEstimate:
    """Extrapolated limit of ``quantity(z, L)`` sampled on rings."""
    tails, spreads = [], []
    for r in radii:
        vals = np.array([quantity(z, math.log(1.0 / r)) for z in _ring(center, r, n_theta)])
        if reduce == "max":
            tails.append(float(np.max(np.real(vals))))
        else:
            tails.append(float(np.mean(np.real(vals))))
        spreads.append(float(np.max(np.abs(vals - np.mean(vals)))))
    est = richardson_limit(list(zip(radii, tails)))
    return LimitEstimate(est.value, est.raw_tail, est.extrapolation_error, est.converged,
                         expected, spreads[-1], est.samples)


def minda_limit(field, p: complex | None = None, radii=None, *,
                n_theta: int = config.THETA_SAMPLES) -> LimitEstimate:
    """``lim |z-p| log(1/|z-p|) lambda(z)``: ``1/sqrt(-kappa(p))`` at a cusp, 0 at a corner."""
    f, center, outer = _unpack(field)
    center = center if p is None else complex(p)
    radii = _check_radii(_default_radii(outer) if radii is None else radii, 4)
    kap = getattr(field, "curvature_hint", None)
    order = getattr(field, "order_hint", None)
    expected = None
    if order is not None and order < 1:
        expected = 0.0
    elif order == 1 and kap is not None:
        expected = 1.0 / math.sqrt(-kap)

    def q(z, L):
        return abs(z - center) * L * float(f(np.asarray(z)))

    return _limit_of(q, center, radii, n_theta, "max", expected)


def cusp_derivative_limits(field, kappa0: float, radii=None, *,
                           n_theta: int = config.THETA_SAMPLES) -> tuple[LimitEstimate, ...]:
    """Limits of ``(z-p)|z-p| L lambda_z``, ``(z-p)^2 |z-p| L lambda_zz`` and
    ``|z-p|^3 L lambda_{z zbar}`` at a cusp."""
    if not kappa0 < 0:
        raise ConstraintError("curvature at the puncture must be negative")
    f, center, outer = _unpack(field)
    radii = _check_radii(_default_radii(outer) if radii is None else radii, 4)
    s = math.sqrt(-kappa0)
    targets = (-1.0 / (2 * s), 3.0 / (4 * s), 1.0 / (4 * s))

    def first(z, L):
        d = _unit_derivs(f, 1, z, center)
        w = z - center
        return (w / abs(w)) * abs(w) * L * d[(0, 1)]

    def second(z, L):
        d = _unit_derivs(f, 2, z, center)
        w = z - center
        u = w / abs(w)
        return u**2 * abs(w) * L * d[(0, 2)], abs(w) * L * d[(1, 1)]

    cache: dict[complex, tuple] = {}

    def ii(z, L):
        cache[z] = second(z, L)
        return cache[z][0]

    def iii(z, L):
        return cache[z][1] if z in cache else second(z, L)[1]

    return (_limit_of(first, center, radii, n_theta, expected=targets[0]),
            _limit_of(ii, center, radii, n_theta, expected=targets[1]),
            _limit_of(iii, center, radii, n_theta, expected=targets[2]))


def _as_u(u_field):
    if isinstance(u_field, MetricField):
        return (lambda z: np.log(u_field.eval(z))), u_field.domain.center, u_field.domain.outer
    return u_field, 0j, math.inf


# the L^2 factor amplifies rounding, so the rescaled limit stays at moderate L
RESCALED_LOG_LEVELS = tuple(8.0 * 2.0 ** (k / 2) for k in range(7))


def _drop_log_term(f, center, alpha):
    """``u + alpha log|z - center|``: same mixed derivatives (the log is
    harmonic) but without the large ``alpha L`` offset that costs digits."""
    def g(z):
        z = np.asarray(z)
        return f(z) + alpha * np.log(np.abs(z - center))
    return g


def u_deriv_limits(u_field, alpha: float, n1: int, n2: int, radii=None, *,
                   n_theta: int = 8) -> LimitEstimate:
    """Limit of ``zbar^n1 z^n2 dbar^n1 d^n2 u`` at the puncture.

    Pure derivatives tend to ``(alpha/2)(-1)^n (n-1)!``, mixed ones to 0.
    ``u_field`` is a callable (``u``) or a ``MetricField`` (``u = log lambda``).
    """
    n = n1 + n2
    if n1 < 0 or n2 < 0 or not 1 <= n <= 5:
        raise ParameterError("need 1 <= n1 + n2 <= 5")
    f, center, outer = _as_u(u_field)
    radii = _check_radii(_default_radii(outer) if radii is None else radii, 4)
    pure = n1 == 0 or n2 == 0
    if not pure:
        f = _drop_log_term(f, center, alpha)
    expected = (alpha / 2) * (-1) ** n * math.factorial(n - 1) if pure else 0.0

    def q(z, L):
        w = z - center
        e = w / abs(w)
        d = _unit_derivs(f, n, z, center)[(n1, n2)]
        return np.conj(e) ** n1 * e**n2 * d

    return _limit_of(q, center, radii, n_theta, expected=expected)


def rescaled_mixed_limit(u_field, n1: int, n2: int, radii=None, *,
                         n_theta: int = 8) -> LimitEstimate:
    """Cusp case: limit of ``L^2 zbar^n1 z^n2 dbar^n1 d^n2 u`` for ``n1, n2 >= 1``.

    ``expected`` holds the magnitude ``(n1-1)!(n2-1)!/4``; only the
    magnitude is meant to be compared, the sign is reported by ``value``.
    """
    if n1 < 1 or n2 < 1 or n1 + n2 > 5:
        raise ParameterError("need n1, n2 >= 1 and n1 + n2 <= 5")
    f, center, outer = _as_u(u_field)
    if radii is None:
        scale = 1.0 if not math.isfinite(outer) else min(1.0, outer)
        radii = config.limit_radii(scale, RESCALED_LOG_LEVELS)
    radii = _check_radii(radii, 4)
    f = _drop_log_term(f, center, 1.0)
    n = n1 + n2

    def q(z, L):
        w = z - center
        e = w / abs(w)
        d = _unit_derivs(f, n, z, center)[(n1, n2)]
        return L**2 * np.conj(e) ** n1 * e**n2 * d

    mag = math.factorial(n1 - 1) * math.factorial(n2 - 1) / 4.0
    return _limit_of(q, center, radii, n_theta, expected=mag)


def l_closed_form(n1: int, n2: int, *, kappa0: float | None = None,
                  alpha: float | None = None, l_prime: float | None = None) -> float:
    """Closed-form table entry: cusp if ``kappa0`` is given, corner otherwise."""
    if kappa0 is not None:
        return binom_general(-0.5, n1) * binom_general(-0.5, n2) / math.sqrt(-kappa0)
    if alpha is None or l_prime is None:
        raise ParameterError("corner entries need alpha and l_prime")
    return binom_general(-alpha / 2, n1) * binom_general(-alpha / 2, n2) * l_prime


def l_table(field, mode: str, n: int, radii=None, *, kappa0: float | None = None,
            alpha: float | None = None, l_prime: float | None = None,
            n_theta: int = 8) -> LimitTable:
    """Numeric and closed-form ``l_{n1,n2}`` for ``n1 + n2 <= n``.

    The cusp weight is ``|z| log(1/|z|)``; the corner weight is
    ``|z|^alpha`` (with weight ``|z|`` the corner entries would all vanish).
    """
    if not 0 <= n <= 4:
        raise ParameterError("table order must be between 0 and 4")
    f, center, outer = _unpack(field)
    radii = _check_radii(_default_radii(outer) if radii is None else radii, 4)
    if mode == "cusp":
        if kappa0 is None or not kappa0 < 0:
            raise ConstraintError("cusp table needs kappa0 < 0")
        def weight(w, L):
            return abs(w) * L
        cf = {"kappa0": kappa0}
    elif mode == "corner":
        if alpha is None or not 0 <= alpha < 1:
            raise ConstraintError("corner table needs 0 <= alpha < 1")
        if l_prime is None:
            l_prime = sk_limsup(field, alpha, radii)
        def weight(w, L):
            return abs(w) ** alpha
        cf = {"alpha": alpha, "l_prime": l_prime}
    else:
        raise ParameterError(f"unknown mode {mode!r}")

    entries, closed = {}, {}
    for k in range(n + 1):
        for n1 in range(k + 1):
            n2 = k - n1

            def q(z, L, n1=n1, n2=n2, k=k):
                w = z - center
                e = w / abs(w)
                if k == 0:
                    d = float(f(np.asarray(z)))
                else:
                    d = _unit_derivs(f, k, z, center)[(n1, n2)]
                return weight(w, L) * np.conj(e) ** n1 * e**n2 * d / (
                    math.factorial(n1) * math.factorial(n2))

            ref = l_closed_form(n1, n2, **cf)
            entries[(n1, n2)] = _limit_of(q, center, radii, n_theta, expected=ref)
            closed[(n1, n2)] = ref
    return LimitTable(mode, entries, closed)


def sk_limsup(field, alpha: float, radii=None, *, n_theta: int = config.THETA_SAMPLES) -> float:
    """``limsup |z|^alpha lambda(z)`` at the puncture (corner order ``alpha < 1``)."""
    if not alpha < 1:
        raise ConstraintError("the corner limit needs alpha < 1")
    f, center, outer = _unpack(field)
    radii = _check_radii(_default_radii(outer) if radii is None else radii, 4)
    tops = [float(np.max(np.abs(_ring(0, r, n_theta)) ** alpha * f(_ring(center, r, n_theta))))
            for r in radii]
    # upper envelope of the tail: sup over all smaller radii
    env = np.maximum.accumulate(np.asarray(tops)[::-1])[::-1]
    est = richardson_limit(list(zip(radii, env)))
    if not est.converged or (tops[-1] > 2 * tops[-2] and tops[-2] > 2 * tops[-3]):
        raise LimitDivergenceError(f"|z|^alpha lambda grows at the puncture (tail {tops[-1]:.3g})")
    return est.value
