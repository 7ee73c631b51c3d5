"""Newton solver for the curvature equation on log-radial annular grids.

The equation ``Delta u = -kappa(z) e^{2u}`` is discretized in
``(s, theta)``, ``s = log r``, with Dirichlet data on both circles of the
annulus. The default stencil is fourth order (five points wide along each
axis, one-sided next to the boundary); ``order=2`` gives the five-point
scheme. Residuals are measured after multiplying by
``r^2``: the polar Laplacian carries a ``1/r^2`` factor that makes the
plain residual sit at the rounding level ``eps/r^2`` near a small inner
circle, far above any useful absolute tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from . import config
from .errors import (
    DomainError,
    NewtonDivergenceError,
    ParameterError,
    SingularLinearizationError,
)
from .grid import AnnularGrid, GridField, apply_laplacian, build_grid

__all__ = [
    "AnnularGrid",
    "CurvatureField",
    "Solution",
    "RemainderField",
    "build_grid",
    "apply_laplacian",
    "constant_curvature",
    "laplacian_matrix",
    "solve_curvature",
    "extract_remainder",
    "remainder_function",
    "subharmonicity_margin",
    "cusp_defect_profile",
]


@dataclass(frozen=True)
class CurvatureField:
    """``kappa(z)``, non-positive on the domain, with its value at the puncture.

    ``kappa0 = 0`` is accepted so the linear (harmonic) problem goes
    through the same code path; every theorem-level use needs ``kappa0 < 0``.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    kappa0: float
    hoelder: tuple[int, float] | None = None
    name: str = "kappa"

    def __post_init__(self):
        if not (math.isfinite(self.kappa0) and self.kappa0 <= 0):
            raise ParameterError(f"curvature at the puncture must be <= 0, got {self.kappa0}")

    def __call__(self, z):
        return np.asarray(self.eval(np.asarray(z, dtype=complex)), dtype=float)


def constant_curvature(k: float = -4.0) -> CurvatureField:
    return CurvatureField(lambda z: np.full(np.shape(z), float(k)), float(k),
                          hoelder=(100, 1.0), name=f"constant {k:g}")


@dataclass
class Solution:
    grid: AnnularGrid
    u: np.ndarray
    residual_norm: float
    newton_iters: int
    trace: list[float] = field(default_factory=list)

    def field(self) -> GridField:
        return GridField(self.grid, self.u)

    def __call__(self, z):
        return self.field()(z)


def _boundary_rings(grid: AnnularGrid, boundary):
    """Dirichlet values on the inner and outer circles as two length-Ntheta arrays.

    ``boundary`` is a callable of ``z`` or a pair ``(inner, outer)`` whose
    entries are scalars, arrays of length Ntheta, or callables.
    """
    pts = grid.points
    if callable(boundary):
        inner, outer = boundary, boundary
    else:
        try:
            inner, outer = boundary
        except (TypeError, ValueError):
            raise ParameterError("boundary must be a callable or an (inner, outer) pair") from None

    def ring(spec, row):
        if callable(spec):
            vals = np.asarray(spec(pts[row]), dtype=float)
        else:
            vals = np.asarray(spec, dtype=float)
        vals = np.broadcast_to(vals, (grid.Ntheta,)).astype(float)
        if not np.all(np.isfinite(vals)):
            raise ParameterError("boundary data must be finite")
        return vals

    return ring(inner, 0), ring(outer, -1)


def _second_difference(n: int, h: float, order: int, periodic: bool) -> sp.csr_matrix:
    """``d^2/dx^2`` on ``n`` equispaced nodes, all rows (boundary rows left empty
    unless periodic)."""
    if order == 2:
        stencil = {-1: 1.0, 0: -2.0, 1: 1.0}
        edge = None
    elif order == 4:
        stencil = {-2: -1 / 12, -1: 16 / 12, 0: -30 / 12, 1: 16 / 12, 2: -1 / 12}
        # one-sided fourth-order row next to a Dirichlet boundary
        edge = np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0]) / 12.0
    else:
        raise ParameterError(f"difference order must be 2 or 4, got {order}")
    M = sp.lil_matrix((n, n))
    width = max(stencil)
    rows = range(n) if periodic else range(1, n - 1)
    for i in rows:
        if not periodic and edge is not None and (i < width or i > n - 1 - width):
            if i < width:
                M[i, 0:6] = edge
            else:
                M[i, n - 6:n] = edge[::-1]
            continue
        for k, c in stencil.items():
            M[i, (i + k) % n] = M[i, (i + k) % n] + c
    return M.tocsr() / h**2


def laplacian_matrix(grid: AnnularGrid, order: int = 4) -> sp.csr_matrix:
    """``r^2 Delta_h`` as a map from all nodes to the interior nodes.

    ``order=2`` is the five-point stencil of ``apply_laplacian``;
    ``order=4`` uses five-point-wide centred differences in each direction
    (one-sided next to the boundary circles).
    """
    nr, nt = grid.shape
    d_s = _second_difference(nr, grid.ds, order, periodic=False)[1:-1]
    d_t = _second_difference(nt, grid.dtheta, order, periodic=True)
    pick = sp.identity(nr, format="csr")[1:-1]
    return (sp.kron(d_s, sp.identity(nt)) + sp.kron(pick, d_t)).tocsr()


def solve_curvature(kappa: CurvatureField, boundary, grid: AnnularGrid, *,
                    tol: float = config.NEWTON_TOL,
                    max_iter: int = config.NEWTON_MAX_ITER,
                    damping: float = config.ARMIJO_FACTOR,
                    max_backtracks: int = config.ARMIJO_MAX_BACKTRACKS,
                    order: int = config.SOLVER_ORDER,
                    initial_guess=None) -> Solution:
    """Damped Newton iteration for ``Delta_h u + kappa e^{2u} = 0``.

    ``residual_norm`` is the max over interior nodes of
    ``r^2 |Delta_h u + kappa e^{2u}|``. Without ``initial_guess`` the
    iteration starts from the discrete harmonic extension of the boundary
    data; that linear solve is counted in ``newton_iters``, so the
    harmonic problem (``kappa = 0``) finishes after one step.
    """
    if not 0 < damping < 1:
        raise ParameterError("damping factor must lie in (0, 1)")
    inner, outer = _boundary_rings(grid, boundary)
    nr, nt = grid.shape
    kap = np.asarray(kappa(grid.points[1:-1]), dtype=float).reshape(nr - 2, nt)
    if np.any(kap > 0) or not np.all(np.isfinite(kap)):
        raise ParameterError("kappa must be finite and <= 0 on the grid")
    r2kappa = (kap * grid.radii[1:-1, None] ** 2).ravel()

    full = laplacian_matrix(grid, order)
    interior = np.arange(nt, (nr - 1) * nt)
    edge = np.concatenate([np.arange(nt), np.arange((nr - 1) * nt, nr * nt)])
    A = full[:, interior].tocsc()
    coupling = full[:, edge] @ np.concatenate([inner, outer])

    def residual(x):
        return A @ x + coupling + r2kappa * np.exp(2.0 * x)

    trace: list[float] = []
    iters = 0
    if initial_guess is None:
        x = spsolve(A, -coupling)
        iters = 1
    else:
        guess = np.asarray(initial_guess, dtype=float)
        if guess.shape != grid.shape:
            raise ParameterError(f"initial guess shape {guess.shape} does not match grid {grid.shape}")
        x = guess[1:-1].ravel().copy()

    F = residual(x)
    norm = float(np.max(np.abs(F)))
    trace.append(norm)
    while norm >= tol:
        if iters >= max_iter:
            raise NewtonDivergenceError(
                f"no convergence after {iters} iterations (residual {norm:.3g})", trace)
        diag = 2.0 * r2kappa * np.exp(2.0 * x)
        # kappa <= 0 keeps the zeroth-order term non-positive, so the
        # linearization stays coercive; anything else is a bug upstream
        if np.any(diag > 0) or not np.all(np.isfinite(diag)):
            raise SingularLinearizationError("linearized operator lost coercivity")
        delta = spsolve((A + sp.diags(diag)).tocsc(), -F)
        if not np.all(np.isfinite(delta)):
            raise SingularLinearizationError("linear solve returned non-finite values")
        t = 1.0
        for _ in range(max_backtracks + 1):
            trial = x + t * delta
            with np.errstate(over="ignore", invalid="ignore"):
                F_new = residual(trial)
            new_norm = float(np.max(np.abs(F_new)))
            if math.isfinite(new_norm) and new_norm <= (1.0 - 1e-4 * t) * norm:
                break
            t *= damping
        else:
            raise NewtonDivergenceError(
                f"line search failed at iteration {iters} (residual {norm:.3g})", trace)
        x, F, norm = trial, F_new, new_norm
        iters += 1
        trace.append(norm)
    u = np.empty(grid.shape)
    u[0], u[-1] = inner, outer
    u[1:-1] = x.reshape(nr - 2, nt)
    return Solution(grid, u, norm, iters, trace)


# -- remainders ----------------------------------------------------------

@dataclass(frozen=True)
class RemainderField:
    """Nodal values of ``v`` (corner) or ``w`` (cusp) on a grid."""

    kind: str
    alpha: float
    values: np.ndarray
    grid: AnnularGrid

    def field(self) -> GridField:
        return GridField(self.grid, self.values)

    def __call__(self, z):
        return self.field()(z)


def _normal_form_shift(alpha: float, z):
    """The term added to ``u`` to get the remainder: ``alpha log|z|`` or
    ``log|z| + log log(1/|z|)``."""
    r = np.abs(np.asarray(z, dtype=complex))
    if alpha == 1:
        if np.any(r >= 1) or np.any(r <= 0):
            raise DomainError("log log(1/|z|) needs 0 < |z| < 1")
        return np.log(r) + np.log(np.log(1.0 / r))
    if np.any(r <= 0):
        raise DomainError("remainder undefined at the puncture")
    return alpha * np.log(r)


def _check_alpha(alpha):
    alpha = float(alpha)
    if not alpha <= 1:
        raise ParameterError(f"singularity order must be <= 1, got {alpha}")
    return alpha


def extract_remainder(u, alpha: float, grid: AnnularGrid | None = None) -> RemainderField:
    """``v = u + alpha log|z|`` (alpha < 1) or ``w = u + log|z| + log log(1/|z|)``.

    ``u`` is a ``Solution``, a callable of ``z`` (sampled on ``grid``) or an
    array of nodal values on ``grid``.
    """
    alpha = _check_alpha(alpha)
    if isinstance(u, Solution):
        grid, vals = u.grid, u.u
    elif grid is None:
        raise ParameterError("a grid is required unless u is a Solution")
    elif callable(u):
        vals = grid.sample(u)
    else:
        vals = np.asarray(u, dtype=float)
        if vals.shape != grid.shape:
            raise ParameterError(f"values shape {vals.shape} does not match grid {grid.shape}")
    kind = "cusp" if alpha == 1 else "corner"
    return RemainderField(kind, alpha, vals + _normal_form_shift(alpha, grid.points), grid)


def remainder_function(u: Callable, alpha: float) -> Callable:
    """Pointwise remainder of a closed-form ``u`` (callable of ``z``)."""
    alpha = _check_alpha(alpha)

    def rem(z):
        return np.asarray(u(z), dtype=float) + _normal_form_shift(alpha, z)

    return rem


def synthesize(remainder: RemainderField) -> np.ndarray:
    """Inverse of ``extract_remainder``: nodal ``u`` from ``v`` or ``w``."""
    return remainder.values - _normal_form_shift(remainder.alpha, remainder.grid.points)


# -- diagnostics ---------------------------------------------------------

def subharmonicity_margin(solution: Solution) -> float:
    """``min r^2 Delta_h u`` over interior nodes; positive when ``u`` is
    strictly subharmonic, as it must be for ``kappa < 0``."""
    g = solution.grid
    return float(np.min(apply_laplacian(g, solution.u) * g.radii[1:-1, None] ** 2))


def cusp_defect_profile(w: RemainderField, kappa: CurvatureField) -> tuple[np.ndarray, np.ndarray]:
    """Ring maxima of ``|(-kappa e^{2w} - 1) log(1/|z|)|`` for a cusp remainder.

    Returns ``(radii, values)``; boundedness as the radius shrinks is the
    diagnostic.
    """
    if w.kind != "cusp":
        raise ParameterError("the cusp defect profile applies to cusp remainders (alpha = 1)")
    g = w.grid
    pts = g.points
    L = np.log(1.0 / np.abs(pts))
    q = np.abs((-kappa(pts) * np.exp(2.0 * w.values) - 1.0) * L)
    return g.radii, q.max(axis=1)
