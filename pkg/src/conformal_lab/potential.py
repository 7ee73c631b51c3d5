"""Logarithmic potentials and their derivatives.

The potential of a source ``f`` supported in the disk ``D_r`` is
``omega(z) = (1/2pi) int_{D_r} log|z - zeta| f(zeta) dA(zeta)``. Area
integrals are done in polar coordinates centred at the evaluation point,
``zeta = z + rho e^{i theta}``: the Jacobian ``rho`` absorbs the kernel
singularity, rays are cut where they cross the support circle, and
Gauss-Legendre panels are graded geometrically toward ``rho = 0``.
Sources that blow up at the origin (``origin_singular=True``) get extra
grading toward the ray through the origin and toward its closest
approach along every ray.

Derivatives of ``omega`` use the compensated representation formulas:
first order by the plain kernel integral, order ``n >= 2`` by the area
integral of ``d^J L (f - P_{n-2}[f])`` over a larger disk ``D_R`` minus
circle integrals over ``dD_R`` of lower kernel derivatives against
Taylor polynomials of derivatives of ``f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

from . import config
from .errors import (
    DomainError,
    GrowthHypothesisError,
    MissingDerivativeError,
    ParameterError,
    QuadratureError,
    SingularPointError,
)
from .grid import AnnularGrid, GridField

TWO_PI = 2.0 * math.pi
EPS = np.finfo(float).eps


class MultiIndex(NamedTuple):
    j1: int
    j2: int

    @property
    def order(self) -> int:
        return self.j1 + self.j2

    @property
    def factorial(self) -> int:
        return math.factorial(self.j1) * math.factorial(self.j2)

    def __add__(self, other):
        return MultiIndex(self.j1 + other[0], self.j2 + other[1])

    def steps(self) -> list[MultiIndex]:
        """Unit steps ``e_1..e_n``: all (1,0) first, then all (0,1)."""
        return [MultiIndex(1, 0)] * self.j1 + [MultiIndex(0, 1)] * self.j2

    def theta(self, tau: int) -> MultiIndex:
        """Partial sum ``e_1 + ... + e_tau``."""
        return _sum_steps(self.steps()[:tau])

    def phi(self, tau: int) -> MultiIndex:
        """Tail ``e_{tau+2} + ... + e_n`` (zero for ``tau = n-1``)."""
        return _sum_steps(self.steps()[tau + 1:])

    def step(self, tau: int) -> MultiIndex:
        """``e_tau`` with 1-based ``tau``."""
        return self.steps()[tau - 1]


def _sum_steps(steps) -> MultiIndex:
    return MultiIndex(sum(s[0] for s in steps), sum(s[1] for s in steps))


def multi_indices(n: int):
    """All multi-indices with ``|a| <= n``."""
    return [MultiIndex(a1, k - a1) for k in range(n + 1) for a1 in range(k, -1, -1)]


@dataclass(frozen=True)
class SourceField:
    """Density of a logarithmic potential, extended by zero outside ``D_r``.

    ``derivs(a, z)`` returns ``d1^a1 d2^a2 f(z)``; it is needed by the
    Taylor-compensated derivative formulas. ``radial`` declares that
    ``f`` depends on ``|z|`` only (so its potential is radial too).
    """

    eval: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    derivs: Callable[[MultiIndex, complex], float] | None = None
    hoelder: tuple[int, float] | None = None
    origin_singular: bool = False
    radial: bool = False

    def __post_init__(self):
        if not self.support_radius > 0:
            raise ParameterError("support radius must be positive")

    def value(self, zeta) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=complex)
        inside = np.abs(zeta) < self.support_radius
        out = np.zeros(zeta.shape)
        if np.any(inside):
            out[inside] = self.eval(zeta[inside])
        return out

    def deriv(self, a, z: complex) -> float:
        a = MultiIndex(*a)
        if self.derivs is None:
            if a.order == 0:
                return float(self.eval(np.asarray(z)))
            raise MissingDerivativeError(f"source has no derivatives, needed order {a}")
        return float(self.derivs(a, z))


def constant_source(c: float = 1.0, radius: float = 1.0) -> SourceField:
    def derivs(a, z):
        return float(c) if MultiIndex(*a).order == 0 else 0.0

    return SourceField(lambda z: np.full(np.shape(z), float(c)), radius, derivs,
                       hoelder=(100, 1.0), radial=True)


class PotentialResult(NamedTuple):
    value: float
    quadrature_error_estimate: float


# -- kernel -----------------------------------------------------------------

def _kernel(J, w):
    """``d^J log|w|`` in the variable ``w`` (array)."""
    j1, j2 = J
    n = j1 + j2
    if n == 0:
        return np.log(np.abs(w))
    # d1 acts on holomorphic log w as d/dw, d2 as i d/dw
    return np.real((1j) ** j2 * ((-1) ** (n - 1) * math.factorial(n - 1)) / w**n)


def log_kernel_deriv(J, z, zeta) -> float:
    """``d^J_z log|z - zeta|`` (derivative in ``z``)."""
    w = complex(z) - complex(zeta)
    if w == 0:
        raise SingularPointError("kernel evaluated at z == zeta")
    return float(_kernel(MultiIndex(*J), w))


# -- Taylor polynomial -----------------------------------------------------

def _taylor_terms(f: SourceField, n: int, z: complex, shift=(0, 0)):
    terms = []
    for a in multi_indices(n):
        d = f.deriv(MultiIndex(*a) + shift, z)
        if d != 0.0:
            terms.append((a.j1, a.j2, d / a.factorial))
    return terms


def _eval_taylor(terms, d):
    dx, dy = d.real, d.imag
    out = np.zeros(np.shape(d))
    for a1, a2, c in terms:
        out = out + c * dx**a1 * dy**a2
    return out


def taylor_poly(f: SourceField, n: int, z, zeta, shift=(0, 0)):
    """``sum_{|a|<=n} (zeta - z)^a d^(a+shift) f(z) / a!``."""
    if n < 0:
        raise ParameterError("Taylor degree must be >= 0")
    z = complex(z)
    d = np.asarray(zeta, dtype=complex) - z
    out = _eval_taylor(_taylor_terms(f, n, z, shift), d)
    return out if out.ndim else float(out)


# -- quadrature rules --------------------------------------------------------

@lru_cache(maxsize=None)
def _gl(order):
    return np.polynomial.legendre.leggauss(order)


@lru_cache(maxsize=None)
def _graded_rule(n_panels: int, order: int):
    """Nodes, weights on [0, 1] with panels [0, 2^-K], ..., [1/2, 1].

    Also returns a mask of the nodes in the innermost panel so callers can
    drop it (the cutoff used by the compensated derivative formulas).
    """
    x, w = _gl(order)
    edges = np.concatenate([[0.0], 0.5 ** np.arange(n_panels, -1, -1)])
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (b - a) * x[None, :] + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w[None, :]).ravel()
    first = np.zeros(nodes.shape, dtype=bool)
    first[:order] = True
    return nodes, weights, first


@lru_cache(maxsize=None)
def _two_sided_rule(n_panels: int, order: int):
    t, w, first = _graded_rule(n_panels, order)
    nodes = np.concatenate([0.5 * t, 1.0 - 0.5 * t[::-1]])
    weights = np.concatenate([0.5 * w, 0.5 * w[::-1]])
    mask = np.concatenate([first, np.zeros_like(first)])
    return nodes, weights, mask


@lru_cache(maxsize=None)
def _uniform_rule(n_panels: int, order: int):
    x, w = _gl(order)
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    return (0.5 * (b - a) * x + 0.5 * (a + b)).ravel(), (0.5 * (b - a) * w).ravel()


def _n_shells(floor_rel: float) -> int:
    return max(4, int(math.ceil(math.log2(1.0 / floor_rel))))


class _Plan(NamedTuple):
    order: int
    n_theta: int
    theta_panels: int


def _plans(levels):
    return [_Plan(6 + 6 * k, 48 * 2**k, 24) for k in range(levels)]


def _polar_area_integral(integrand, z, r_support, r_outer, plan, *, origin_singular,
                         floor_rel):
    """``int int integrand(zeta, rho, e, inside) rho d rho d theta``.

    Region: the disk ``|zeta| < r_outer`` (>= r_support), with ``z``
    inside the support disk. ``e`` is the ray direction ``e^{i theta}``.
    """
    R0 = abs(z)
    order = plan.order

    if origin_singular and R0 > 0:
        theta0 = math.atan2(-z.imag, -z.real)
        t, wt, _ = _two_sided_rule(plan.theta_panels, order)
        theta = theta0 + TWO_PI * t
        wtheta = TWO_PI * wt
    elif R0 > 0.5 * r_support:
        # near the support edge the chord length loses smoothness at the
        # directions tangent to the circle through z; split there and grade
        theta_z = math.atan2(z.imag, z.real)
        t, wt, _ = _two_sided_rule(plan.theta_panels, order)
        theta = np.concatenate([theta_z - 0.5 * math.pi + math.pi * t,
                                theta_z + 0.5 * math.pi + math.pi * t])
        wtheta = np.concatenate([math.pi * wt, math.pi * wt])
    else:
        theta = TWO_PI * np.arange(plan.n_theta) / plan.n_theta
        wtheta = np.full(plan.n_theta, TWO_PI / plan.n_theta)

    e = np.exp(1j * theta)[:, None]
    c = np.real(np.conj(z) * e)  # Re(z-bar e): ray parameter of the foot point is -c

    def chord(radius):
        return np.maximum(-c + np.sqrt(np.maximum(c * c + radius * radius - R0 * R0, 0.0)), 0.0)

    rho_b = chord(r_support)
    K = _n_shells(floor_rel)
    total = 0.0

    def add(rho, w, inside):
        nonlocal total
        zeta = z + rho * e
        live = np.broadcast_to(w != 0, rho.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = integrand(zeta, rho, e, inside)
            contrib = np.where(live, wtheta[:, None] * w * vals * rho, 0.0)
        total += float(np.sum(contrib))

    if origin_singular and R0 > 0:
        foot = np.clip(-c, 0.0, rho_b)
        tA, wA, mA = _two_sided_rule(K, order)
        wA = np.where(mA[None, :], 0.0, wA[None, :])
        add(foot * tA[None, :], foot * wA, True)
        tB, wB, mB = _graded_rule(K, order)
        seg = rho_b - foot
        wB = np.where(mB[None, :] & (foot == 0), 0.0, wB[None, :])
        add(foot + seg * tB[None, :], seg * wB, True)
    else:
        tB, wB, mB = _graded_rule(K, order)
        wB = np.where(mB, 0.0, wB)
        add(rho_b * tB[None, :], rho_b * wB[None, :], True)

    if r_outer > r_support:
        rho_R = chord(r_outer)
        tU, wU = _uniform_rule(4, order)
        seg = rho_R - rho_b
        add(rho_b + seg * tU[None, :], seg * wU[None, :], False)
    return total


def _origin_polar_integral(integrand, r_support, plan):
    """``int_{D_r} integrand(zeta) dA`` in polar coordinates about 0."""
    order = plan.order
    t, w, _ = _graded_rule(40, order)
    s = r_support * t
    ws = r_support * w
    n_phi = 2 * plan.n_theta
    phi = TWO_PI * np.arange(n_phi) / n_phi
    zeta = s[:, None] * np.exp(1j * phi)[None, :]
    vals = integrand(zeta)
    return float(np.sum((ws * s)[:, None] * vals) * TWO_PI / n_phi)


def _refine(compute, tol, max_levels, what):
    plans = _plans(max_levels)
    prev = compute(plans[0])
    err = math.inf
    for plan in plans[1:]:
        cur = compute(plan)
        err = abs(cur - prev)
        prev = cur
        if err <= tol:
            return cur, err
    raise QuadratureError(f"{what}: refinement stalled at error {err:.3g} > tol {tol:.3g}")


# -- potential ---------------------------------------------------------------

def log_potential(f: SourceField, z, *, tol: float = config.QUAD_TOL,
                  max_levels: int = config.QUAD_MAX_LEVELS) -> PotentialResult:
    """``(1/2pi) int_{D_r} log|z - zeta| f(zeta) dA`` with an error estimate."""
    z = complex(z)
    r = f.support_radius
    if abs(z) <= r:
        def integrand(zeta, rho, e, inside):
            return np.log(rho) * f.value(zeta)

        def compute(plan):
            return _polar_area_integral(integrand, z, r, r, plan,
                                        origin_singular=f.origin_singular, floor_rel=1e-9)
    else:
        def integrand(zeta):
            return np.log(np.abs(z - zeta)) * f.value(zeta)

        def compute(plan):
            return _origin_polar_integral(integrand, r, plan)

    val, err = _refine(compute, tol * TWO_PI, max_levels, "log_potential")
    return PotentialResult(val / TWO_PI, err / TWO_PI)


def _boundary_integral(z, R, kernel_J, poly_terms, direction, n_nodes):
    """``int_{|zeta|=R} d^K L(z - zeta) P(zeta) <N, e> |d zeta|`` by the trapezoid rule."""
    phi = TWO_PI * np.arange(n_nodes) / n_nodes
    N = np.exp(1j * phi)
    zeta = R * N
    dot = N.real if direction == (1, 0) else N.imag
    vals = _kernel(kernel_J, z - zeta) * _eval_taylor(poly_terms, zeta - z) * dot
    return float(np.sum(vals) * R * TWO_PI / n_nodes)


def boundary_kernel_integral(z, r, e1=(1, 0), e2=(0, 1), n_nodes=512) -> float:
    """``int_{dD_r} d^{e1} L(z - zeta) <N, e2> |d zeta|``, the circle term of the
    compensated formulas with a unit polynomial factor."""
    return _boundary_integral(complex(z), r, MultiIndex(*e1), [(0, 0, 1.0)], tuple(e2), n_nodes)


def _derivative_floor(n: int) -> float:
    if n <= 1:
        return 1e-12
    if n == 2:
        return 1e-8
    return EPS ** (1.0 / n)


def potential_deriv_with_error(f: SourceField, J, z, R: float | None = None, *,
                               tol: float = config.QUAD_TOL,
                               max_levels: int = config.QUAD_MAX_LEVELS) -> PotentialResult:
    J = MultiIndex(*J)
    n = J.order
    z = complex(z)
    r = f.support_radius
    if n < 1:
        raise ParameterError("use log_potential for |J| = 0")
    if not abs(z) < r:
        raise DomainError(f"z={z!r} must lie inside the support disk of radius {r}")
    R = 2.0 * r if R is None else float(R)
    if not R > r:
        raise ParameterError(f"boundary radius R={R} must exceed the support radius {r}")

    floor = _derivative_floor(n)
    if n == 1:
        def integrand(zeta, rho, e, inside):
            return _kernel(J, -rho * e) * f.value(zeta)

        def compute(plan):
            return _polar_area_integral(integrand, z, r, r, plan,
                                        origin_singular=f.origin_singular, floor_rel=floor)

        val, err = _refine(compute, tol * TWO_PI, max_levels, "potential_deriv")
        return PotentialResult(val / TWO_PI, err / TWO_PI)

    p_terms = _taylor_terms(f, n - 2, z)

    def integrand(zeta, rho, e, inside):
        comp = _eval_taylor(p_terms, zeta - z)
        fz = f.value(zeta) if inside else 0.0
        return _kernel(J, -rho * e) * (fz - comp)

    def compute(plan):
        return _polar_area_integral(integrand, z, r, R, plan,
                                    origin_singular=f.origin_singular, floor_rel=floor)

    area, err = _refine(compute, tol * TWO_PI, max_levels, "potential_deriv")

    boundary = 0.0
    for tau in range(1, n):
        terms = _taylor_terms(f, tau - 1, z, shift=J.phi(tau))
        if not terms:
            continue
        kj, e_next = J.theta(tau), tuple(J.step(tau + 1))
        coarse = _boundary_integral(z, R, kj, terms, e_next, 256)
        fine = _boundary_integral(z, R, kj, terms, e_next, 512)
        err += abs(fine - coarse)
        boundary += fine
    return PotentialResult((area - boundary) / TWO_PI, err / TWO_PI)


def potential_deriv(f: SourceField, J, z, R: float | None = None, **kw) -> float:
    """``d^J omega(z)`` from the compensated representation formula.

    ``R`` (default ``2 r``) is the radius of the auxiliary circle; the
    result does not depend on it beyond quadrature error.
    """
    return potential_deriv_with_error(f, J, z, R, **kw).value


# -- Riesz decomposition -------------------------------------------------

class RieszDecomposition(NamedTuple):
    h: GridField
    omega: GridField
    mean_value_residual: float
    growth_ratio: float
    quadrature_error: float
    mean_value_tol: float = config.MEAN_VALUE_TOL

    @property
    def mean_value_ok(self) -> bool:
        return self.mean_value_residual <= self.mean_value_tol


def growth_ratio(grid: AnnularGrid, u_values, rings: int = 4) -> float:
    """Slope of ``sup_theta u`` against ``log(1/r)`` on the innermost rings.

    Tends to the same limit as ``sup u / log(1/r)`` but without the slow
    ``1/log`` transient of the plain quotient.
    """
    u = np.asarray(u_values, dtype=float)
    M = u[:rings].max(axis=1)
    L = -np.log(grid.radii[:rings])
    return float((M[0] - M[1]) / (L[0] - L[1]))


def riesz_decompose(grid: AnnularGrid, u_values, laplacian_u: SourceField, *,
                    growth_tol: float = 0.1, tol: float = config.QUAD_TOL,
                    mean_value_tol: float = config.MEAN_VALUE_TOL) -> RieszDecomposition:
    """Split ``u = h + omega`` with ``omega`` the potential of ``Delta u``.

    ``grid`` must lie inside the support disk of ``laplacian_u``. The
    harmonic part is checked by comparing its circle means, which must be
    constant for a function harmonic in the whole disk.
    """
    u = GridField(grid, u_values)
    if grid.r_max > laplacian_u.support_radius * (1 + 1e-12):
        raise DomainError("grid extends beyond the support disk of the Laplacian")
    ratio = growth_ratio(grid, u.values)
    if abs(ratio) > growth_tol:
        raise GrowthHypothesisError(
            f"u grows like {ratio:.3g} * log(1/r) at the puncture; the split needs o(log(1/r))",
            ratio)

    pts = grid.points
    omega = np.empty(grid.shape)
    qerr = 0.0
    if laplacian_u.radial:
        for i, rad in enumerate(grid.radii):
            res = log_potential(laplacian_u, complex(rad), tol=tol)
            omega[i, :] = res.value
            qerr = max(qerr, res.quadrature_error_estimate)
    else:
        for idx in np.ndindex(grid.shape):
            res = log_potential(laplacian_u, complex(pts[idx]), tol=tol)
            omega[idx] = res.value
            qerr = max(qerr, res.quadrature_error_estimate)
    om = GridField(grid, omega)
    h = u - om
    means = h.ring_means()
    resid = float(np.max(np.abs(means - means.mean())))
    return RieszDecomposition(h, om, resid, ratio, qerr, mean_value_tol)
