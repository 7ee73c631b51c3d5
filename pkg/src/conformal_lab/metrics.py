"""Closed-form singular conformal metrics and numerical differentiation.

A density is any callable taking complex ``z`` (scalar or ndarray) and
returning positive reals. ``MetricField`` wraps such a callable together
with its punctured-disk domain and optional metadata (singularity order,
curvature at the puncture).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Callable, NamedTuple

import numpy as np

from . import config
from .errors import AccuracyWarning, DomainError, ParameterError, StepTooLargeError


def as_point(z) -> complex:
    """Coerce to a finite complex number."""
    if isinstance(z, (tuple, list)) and len(z) == 2:
        z = complex(float(z[0]), float(z[1]))
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"point {z!r} is not finite")
    return z


@dataclass(frozen=True)
class PuncturedDisk:
    """The annulus ``inner < |z - center| < outer``.

    With ``punctured=False`` and ``inner == 0`` the center itself belongs
    to the domain (used for the hyperbolic metric of the unit disk).
    """

    center: complex = 0j
    inner: float = 0.0
    outer: float = math.inf
    punctured: bool = True

    def __post_init__(self):
        if self.inner < 0 or not self.outer > self.inner:
            raise ParameterError(f"empty annulus inner={self.inner}, outer={self.outer}")

    def contains(self, z) -> np.ndarray:
        d = np.abs(np.asarray(z, dtype=complex) - self.center)
        inside = d < self.outer
        if self.punctured or self.inner > 0:
            inside &= d > self.inner
        return inside

    def distance_to_boundary(self, z: complex) -> float:
        d = abs(z - self.center)
        out = self.outer - d
        if self.punctured or self.inner > 0:
            out = min(out, d - self.inner)
        return out


@dataclass(frozen=True)
class MetricField:
    density: Callable[[np.ndarray], np.ndarray]
    domain: PuncturedDisk = field(default_factory=PuncturedDisk)
    order_hint: float | None = None
    curvature_hint: float | None = None
    name: str = "metric"

    def __post_init__(self):
        if self.order_hint is not None and self.order_hint > 1:
            raise ParameterError(f"singularity order must be <= 1, got {self.order_hint}")
        if self.curvature_hint is not None and not self.curvature_hint < 0:
            raise ParameterError(f"curvature at the puncture must be < 0, got {self.curvature_hint}")

    @property
    def center(self) -> complex:
        return self.domain.center

    def eval(self, z):
        zz = np.asarray(z, dtype=complex)
        if not np.all(self.domain.contains(zz)):
            bad = zz[~self.domain.contains(zz)] if zz.ndim else zz
            raise DomainError(f"{self.name}: point(s) outside the domain, e.g. {complex(np.ravel(bad)[0])!r}")
        return self.density(zz)

    __call__ = eval

    def scaled(self, c: float) -> MetricField:
        """The density ``c * lambda``; curvature scales by ``1/c**2``."""
        if not c > 0:
            raise ParameterError("scale factor must be positive")
        dens = self.density
        kap = None if self.curvature_hint is None else self.curvature_hint / c**2
        return MetricField(lambda z: c * dens(z), self.domain, self.order_hint, kap,
                           f"{c:g}*{self.name}")

    def restricted(self, outer: float) -> MetricField:
        """Same density on a smaller concentric disk."""
        if outer > self.domain.outer:
            raise ParameterError("restriction must shrink the domain")
        dom = PuncturedDisk(self.domain.center, self.domain.inner, outer, self.domain.punctured)
        return MetricField(self.density, dom, self.order_hint, self.curvature_hint, self.name)

    def log_density(self, z):
        return np.log(self.eval(z))


class LambdaAlphaRParams(NamedTuple):
    alpha: float
    R: float = 1.0

    def validate(self) -> LambdaAlphaRParams:
        if not (self.alpha <= 1 and math.isfinite(self.alpha)):
            raise ParameterError(f"alpha must be <= 1, got {self.alpha}")
        if not self.R > 0:
            raise ParameterError(f"R must be positive, got {self.R}")
        return self


# -- closed forms ---------------------------------------------------------

def hyperbolic_disk_density(z):
    """1 / (1 - |z|^2) on the unit disk."""
    a = np.abs(np.asarray(z, dtype=complex))
    if np.any(a >= 1):
        raise DomainError("hyperbolic disk density needs |z| < 1")
    out = 1.0 / (1.0 - a * a)
    return out if out.ndim else float(out)


def punctured_disk_density(z):
    """1 / (2|z| log(1/|z|)) on the punctured unit disk."""
    a = np.abs(np.asarray(z, dtype=complex))
    if np.any(a == 0) or np.any(a >= 1):
        raise DomainError("punctured disk density needs 0 < |z| < 1")
    out = 1.0 / (2.0 * a * np.log(1.0 / a))
    return out if out.ndim else float(out)


# below this fraction of R the sinh form is used
SINH_SWITCH = 1e-8


def _lambda_rational(alpha, R, a):
    b = 1.0 - alpha
    return b * R**b * a ** (-alpha) / (R ** (2 * b) - a ** (2 * b))


def _lambda_sinh(alpha, R, a):
    b = 1.0 - alpha
    x = b * np.log(R / a)
    # 2 sinh(x) = e^x (1 - e^{-2x}); written to avoid overflow for huge x
    return b * np.exp(-x) / (a * -np.expm1(-2.0 * x))


def lambda_alpha_R(params: LambdaAlphaRParams, z, form: str = "auto"):
    """Maximal SK density on the punctured disk of radius R with order alpha.

    ``form`` selects ``"rational"``, ``"sinh"`` or ``"auto"`` (rational
    unless ``|z| < 1e-8 R``). For ``alpha == 1`` both collapse to
    ``1/(2|z| log(R/|z|))``.
    """
    alpha, R = LambdaAlphaRParams(*params).validate()
    a = np.abs(np.asarray(z, dtype=complex))
    if np.any(a == 0) or np.any(a >= R):
        raise DomainError(f"lambda_alpha_R needs 0 < |z| < R={R}")
    if alpha == 1:
        out = 1.0 / (2.0 * a * np.log(R / a))
    elif form == "rational":
        out = _lambda_rational(alpha, R, a)
    elif form == "sinh":
        out = _lambda_sinh(alpha, R, a)
    elif form == "auto":
        out = np.where(a < SINH_SWITCH * R, _lambda_sinh(alpha, R, a), _lambda_rational(alpha, R, a))
    else:
        raise ParameterError(f"unknown form {form!r}")
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


def hyperbolic_disk_metric() -> MetricField:
    return MetricField(hyperbolic_disk_density, PuncturedDisk(0j, 0.0, 1.0, punctured=False),
                       order_hint=0.0, curvature_hint=-4.0, name="lambda_D")


def punctured_disk_metric() -> MetricField:
    return MetricField(punctured_disk_density, PuncturedDisk(0j, 0.0, 1.0),
                       order_hint=1.0, curvature_hint=-4.0, name="lambda_D*")


def lambda_alpha_R_metric(alpha: float, R: float = 1.0) -> MetricField:
    p = LambdaAlphaRParams(alpha, R).validate()
    return MetricField(lambda z: lambda_alpha_R(p, z), PuncturedDisk(0j, 0.0, R),
                       order_hint=alpha, curvature_hint=-4.0, name=f"lambda_{alpha:g},{R:g}")


def constant_metric(c: float = 1.0, outer: float = math.inf) -> MetricField:
    if not c > 0:
        raise ParameterError("constant density must be positive")
    return MetricField(lambda z: np.full(np.shape(z), float(c)), PuncturedDisk(0j, 0.0, outer),
                       order_hint=0.0, name=f"const_{c:g}")


def pullback_density(metric: MetricField, f_value, f_deriv_abs: float) -> float:
    """Density of the pullback ``lambda(f(w)) |f'(w)|`` at one point."""
    w = as_point(f_value)
    if f_deriv_abs < 0:
        raise ParameterError("|f'| must be nonnegative")
    if not metric.domain.contains(w):
        raise DomainError(f"f(w)={w!r} outside the domain of {metric.name}")
    if f_deriv_abs == 0:
        return 0.0
    return float(metric.eval(w)) * f_deriv_abs


# -- curvature --------------------------------------------------------------

def _laplacian5(g, z, h):
    return (g(z + h) + g(z - h) + g(z + 1j * h) + g(z - 1j * h) - 4.0 * g(z)) / (h * h)


def _local_scale(field: MetricField, z: complex) -> float:
    dom = field.domain
    d = dom.distance_to_boundary(z)
    if not d > 0:
        raise DomainError(f"{z!r} is not inside the domain of {field.name}")
    return min(d, 1.0) if math.isfinite(d) else 1.0


def numeric_curvature(field: MetricField, z, h: float | None = None) -> float:
    """Gaussian curvature ``-Delta log(lambda) / lambda^2`` at ``z``.

    With an explicit ``h`` this is the plain 5-point Laplacian (O(h^2)).
    With ``h=None`` the step is chosen automatically: Richardson-improved
    estimates are formed on a ladder of steps scaled to the distance to
    the domain boundary, and the one where consecutive estimates agree
    best is returned.
    """
    z = as_point(z)
    lam = float(field.eval(z))

    def g(w):
        return np.log(field.eval(w))

    if h is not None:
        if not h > 0:
            raise ParameterError("step must be positive")
        if h >= field.domain.distance_to_boundary(z):
            raise StepTooLargeError(f"stencil of step {h} leaves the domain at {z!r}")
        return float(-_laplacian5(g, z, h) / lam**2)

    ell = _local_scale(field, z)
    steps = 0.25 * ell * 0.5 ** np.arange(14)
    lap = np.array([_laplacian5(g, z, s) for s in steps])
    rich = (4.0 * lap[1:] - lap[:-1]) / 3.0
    # truncation proxy: disagreement of neighbours; rounding proxy: eps*|g|/h^2
    noise = 20.0 * np.finfo(float).eps * (abs(math.log(lam)) + 1.0) / steps[1:-1] ** 2
    err = np.abs(np.diff(rich)) + noise
    k = int(np.argmin(err))
    return float(-rich[k] / lam**2)


# -- finite-difference derivatives -----------------------------------------

@lru_cache(maxsize=None)
def central_weights(order: int, accuracy: int = config.FD_ACCURACY) -> tuple[float, ...]:
    """Central finite-difference weights on integer offsets ``-m..m``."""
    from sympy.calculus.finite_diff import finite_diff_weights

    if order == 0:
        return (1.0,)
    m = (order + 1) // 2 - 1 + accuracy // 2
    nodes = list(range(-m, m + 1))
    w = finite_diff_weights(order, nodes, 0)[order][-1]
    return tuple(float(c) for c in w)


_DEFAULT_REL_STEP = {1: 1e-3, 2: 1e-3, 3: 2e-2, 4: 5e-2, 5: 8e-2, 6: 1e-1}


def default_step(order: int, scale: float) -> float:
    return _DEFAULT_REL_STEP.get(order, 1e-1) * scale


def _partials_on_stencil(f, z, h, orders, accuracy):
    """Evaluate several mixed partials d1^a d2^b f(z) from one shared stencil."""
    ws = {}
    for a, b in orders:
        ws.setdefault(a, central_weights(a, accuracy))
        ws.setdefault(b, central_weights(b, accuracy))
    m = max((len(w) - 1) // 2 for w in ws.values())
    offs = np.arange(-m, m + 1)
    pts = z + h * (offs[None, :] + 1j * offs[:, None])  # rows: x2 offset, cols: x1 offset
    vals = np.asarray(f(pts), dtype=float)
    out = {}
    for a, b in orders:
        wa = np.pad(ws[a], m - (len(ws[a]) - 1) // 2)
        wb = np.pad(ws[b], m - (len(ws[b]) - 1) // 2)
        out[(a, b)] = float(wb @ vals @ wa) / h ** (a + b)
    return out, m


def _check_stencil(domain, z, reach):
    if domain is None:
        return
    if not reach < domain.distance_to_boundary(z):
        raise StepTooLargeError(f"stencil reaching {reach:.3g} from {z!r} leaves the domain")


def _real_partials(f, z, orders, h, *, domain, center, accuracy, richardson):
    n = max(a + b for a, b in orders)
    scale = abs(z - center) if center is not None else abs(z)
    if not scale > 0:
        scale = 1.0
    if h is None:
        h = default_step(n, scale)
    if n >= 5 and h / scale < 1e-3:
        warnings.warn(f"order-{n} difference with relative step {h / scale:.1e} is rounding-dominated",
                      AccuracyWarning, stacklevel=3)
    m = max((len(central_weights(k, accuracy)) - 1) // 2 for o in orders for k in o)
    _check_stencil(domain, z, m * h * math.sqrt(2.0))
    coarse, _ = _partials_on_stencil(f, z, h, orders, accuracy)
    if not richardson:
        return coarse
    fine, _ = _partials_on_stencil(f, z, 0.5 * h, orders, accuracy)
    k = 2.0**accuracy - 1.0
    return {o: fine[o] + (fine[o] - coarse[o]) / k for o in orders}


def _resolve_field(field):
    if isinstance(field, MetricField):
        return field.eval, field.domain, field.domain.center
    return field, None, None


def field_deriv(field, J, z, h: float | None = None, *, domain: PuncturedDisk | None = None,
                center: complex | None = None, accuracy: int = config.FD_ACCURACY,
                richardson: bool = True) -> float:
    """Finite-difference ``d1^j1 d2^j2`` of a scalar field at ``z``.

    ``field`` is a callable on complex arrays or a ``MetricField``. The
    default step is relative to the distance from ``center`` (the
    puncture), growing with the derivative order to keep rounding error
    in check; one Richardson step removes the leading truncation term.
    """
    j1, j2 = int(J[0]), int(J[1])
    if j1 < 0 or j2 < 0 or j1 + j2 > 6:
        raise ParameterError(f"multi-index {J} unsupported (need 0 <= |J| <= 6)")
    z = as_point(z)
    f, dom, c = _resolve_field(field)
    dom = domain or dom
    c = center if center is not None else c
    if j1 + j2 == 0:
        return float(np.asarray(f(np.asarray(z))))
    return _real_partials(f, z, [(j1, j2)], h, domain=dom, center=c, accuracy=accuracy,
                          richardson=richardson)[(j1, j2)]


def wirtinger_terms(n_bar: int, n_hol: int) -> dict[tuple[int, int], complex]:
    """Coefficients expressing dbar^n_bar d^n_hol in real partials d1^a d2^b."""
    terms: dict[tuple[int, int], complex] = {}
    scale = 0.5 ** (n_bar + n_hol)
    for k in range(n_bar + 1):
        for m in range(n_hol + 1):
            c = comb(n_bar, k) * comb(n_hol, m) * (1j) ** k * (-1j) ** m * scale
            key = (n_bar + n_hol - k - m, k + m)
            terms[key] = terms.get(key, 0) + c
    return {k: v for k, v in terms.items() if v != 0}


def wirtinger_deriv(field, n_bar: int, n_hol: int, z, h: float | None = None, *,
                    domain: PuncturedDisk | None = None, center: complex | None = None,
                    accuracy: int = config.FD_ACCURACY, richardson: bool = True) -> complex:
    """``dbar^n_bar d^n_hol field`` at ``z`` with d = (d1 - i d2)/2."""
    if n_bar < 0 or n_hol < 0 or n_bar + n_hol > 6:
        raise ParameterError("Wirtinger order must be between 0 and 6")
    z = as_point(z)
    f, dom, c = _resolve_field(field)
    dom = domain or dom
    c = center if center is not None else c
    if n_bar + n_hol == 0:
        return complex(np.asarray(f(np.asarray(z))))
    terms = wirtinger_terms(n_bar, n_hol)
    parts = _real_partials(f, z, list(terms), h, domain=dom, center=c, accuracy=accuracy,
                           richardson=richardson)
    return complex(sum(coef * parts[o] for o, coef in terms.items()))


def wirtinger_derivs(field, order: int, z, h: float | None = None, *,
                     domain: PuncturedDisk | None = None, center: complex | None = None,
                     accuracy: int = config.FD_ACCURACY,
                     richardson: bool = True) -> dict[tuple[int, int], complex]:
    """All ``dbar^a d^b field`` with ``a + b = order`` from one shared stencil.

    Keys are ``(n_bar, n_hol)``.
    """
    if not 1 <= order <= 6:
        raise ParameterError("Wirtinger order must be between 1 and 6")
    z = as_point(z)
    f, dom, c = _resolve_field(field)
    dom = domain or dom
    c = center if center is not None else c
    parts = _real_partials(f, z, [(order - k, k) for k in range(order + 1)], h, domain=dom,
                           center=c, accuracy=accuracy, richardson=richardson)
    out = {}
    for nb in range(order + 1):
        terms = wirtinger_terms(nb, order - nb)
        out[(nb, order - nb)] = complex(sum(coef * parts[o] for o, coef in terms.items()))
    return out
