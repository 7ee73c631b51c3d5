"""Log-radial polar grids around the puncture and nodal fields on them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError


@dataclass(frozen=True)
class AnnularGrid:
    """Nodes ``r_i e^{i theta_j}`` with log-uniform radii and uniform angles.

    ``r_i = r_min (r_max/r_min)^(i/(Nr-1))``, ``theta_j = 2 pi j / Ntheta``.
    Index order everywhere is ``[i_radius, j_angle]``.
    """

    r_min: float
    r_max: float
    Nr: int
    Ntheta: int

    def __post_init__(self):
        if not (0 < self.r_min < self.r_max and math.isfinite(self.r_max)):
            raise ParameterError(f"need 0 < r_min < r_max, got ({self.r_min}, {self.r_max})")
        if self.Nr < 8 or self.Ntheta < 8:
            raise ParameterError(f"grid too coarse: Nr={self.Nr}, Ntheta={self.Ntheta} (need >= 8)")

    @property
    def shape(self):
        return (self.Nr, self.Ntheta)

    @property
    def ds(self) -> float:
        return math.log(self.r_max / self.r_min) / (self.Nr - 1)

    @property
    def dtheta(self) -> float:
        return 2.0 * math.pi / self.Ntheta

    @property
    def radii(self) -> np.ndarray:
        r = self.r_min * np.exp(self.ds * np.arange(self.Nr))
        r[-1] = self.r_max
        return r

    @property
    def thetas(self) -> np.ndarray:
        return self.dtheta * np.arange(self.Ntheta)

    @property
    def points(self) -> np.ndarray:
        return self.radii[:, None] * np.exp(1j * self.thetas)[None, :]

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func`` (complex array -> real array) at every node."""
        return np.asarray(func(self.points), dtype=float).reshape(self.shape)

    def refined(self) -> AnnularGrid:
        """Twice the resolution in both directions, same nodes kept."""
        return AnnularGrid(self.r_min, self.r_max, 2 * self.Nr - 1, 2 * self.Ntheta)


def build_grid(r_min: float, r_max: float, Nr: int, Ntheta: int) -> AnnularGrid:
    return AnnularGrid(float(r_min), float(r_max), int(Nr), int(Ntheta))


def apply_laplacian(grid: AnnularGrid, u) -> np.ndarray:
    """Second-order polar Laplacian at the interior rings.

    In ``s = log r`` the operator ``u_rr + u_r/r + u_tt/r^2`` is
    ``(u_ss + u_tt)/r^2``, so the 5-point stencil in (s, theta) is used.
    Returns shape ``(Nr-2, Ntheta)``, periodic in theta.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != grid.shape:
        raise ParameterError(f"field shape {u.shape} does not match grid {grid.shape}")
    r = grid.radii[1:-1, None]
    u_ss = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / grid.ds**2
    core = u[1:-1]
    u_tt = (np.roll(core, -1, axis=1) - 2.0 * core + np.roll(core, 1, axis=1)) / grid.dtheta**2
    return (u_ss + u_tt) / r**2


@dataclass(frozen=True)
class GridField:
    """Nodal values on an ``AnnularGrid``, interpolated bilinearly in (log r, theta)."""

    grid: AnnularGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ParameterError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", v)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        g = self.grid
        r = np.abs(z)
        tol = 1e-12 * g.r_max
        if np.any(r < g.r_min - tol) or np.any(r > g.r_max + tol):
            raise DomainError(f"point outside grid annulus [{g.r_min}, {g.r_max}]")
        s = np.clip(np.log(np.clip(r, g.r_min, g.r_max) / g.r_min) / g.ds, 0.0, g.Nr - 1 - 1e-12)
        t = np.mod(np.angle(z), 2.0 * math.pi) / g.dtheta
        i = np.floor(s).astype(int)
        j = np.floor(t).astype(int) % g.Ntheta
        fs = s - i
        ft = t - np.floor(t)
        j1 = (j + 1) % g.Ntheta
        v = self.values
        out = ((1 - fs) * (1 - ft) * v[i, j] + fs * (1 - ft) * v[i + 1, j]
               + (1 - fs) * ft * v[i, j1] + fs * ft * v[i + 1, j1])
        return out if out.ndim else float(out)

    def ring_means(self) -> np.ndarray:
        return self.values.mean(axis=1)

    def __sub__(self, other: GridField) -> GridField:
        return GridField(self.grid, self.values - other.values)

    def __add__(self, other: GridField) -> GridField:
        return GridField(self.grid, self.values + other.values)
