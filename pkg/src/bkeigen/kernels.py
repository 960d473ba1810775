"""Green's-function kernels, quadrature rules and Nystrom operators.

Two interval kernels on [0, 1]::

    k1(t, s) = (1 - t) s   for s <= t,     t (1 - s)  for s > t
    k2(t, s) = (1 - 2t)/2  for s <= t,     (1 - 2s)/2 for s > t

(``u'' + h = 0`` with ``u(0) = u(1) = 0``, and ``v'' + h = 0`` with
``v'(0) = 0 = v(1) - v'(1)/2``), and the Dirichlet Green's function of
``-Laplace`` on the unit disk, written in the singularity-friendly form::

    G(x, y) = log((|x|^2 |y|^2 - 2 x.y + 1) / |x - y|^2) / (4 pi)

The interval integrals use the composite trapezoid rule on the uniform grid;
the kernels are piecewise linear in ``s`` with the kink on a node, so rows
applied to linear data are exact.  On the disk the log singularity at ``x = y``
is removed by subtraction against the exact torsion function
``(1 - |x|^2)/4``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .domain import DiskGrid, Grid, Grid1D, GridFn
from .exceptions import GridMismatchError, KernelError

__all__ = [
    "KernelId",
    "QuadratureRule",
    "k1",
    "k2",
    "disk_green",
    "green_values",
    "torsion_exact",
    "trapezoid_rule",
    "disk_rule",
    "quadrature_rule",
    "integrate_1d",
    "torsion",
    "kernel_row",
    "kernel_matrix",
    "DenseOperator",
    "DiskOperator",
    "assemble_operator",
    "nystrom_operator",
]

_INV_4PI = 1.0 / (4.0 * math.pi)


class KernelId(enum.Enum):
    K1_DIRICHLET = "k1"
    K2_MIXED = "k2"
    DISK_LAPLACIAN = "disk"

    @property
    def grid_type(self):
        return DiskGrid if self is KernelId.DISK_LAPLACIAN else Grid1D


def _check_unit(t, s):
    if not (0.0 <= t <= 1.0 and 0.0 <= s <= 1.0):
        raise KernelError(f"kernel arguments must lie in [0, 1], got t={t}, s={s}")


def k1(t: float, s: float) -> float:
    _check_unit(t, s)
    return (1.0 - t) * s if s <= t else t * (1.0 - s)


def k2(t: float, s: float) -> float:
    _check_unit(t, s)
    return 0.5 * (1.0 - 2.0 * t) if s <= t else 0.5 * (1.0 - 2.0 * s)


def _k1_matrix(t, s):
    t = t[:, None]
    s = s[None, :]
    return np.where(s <= t, (1.0 - t) * s, t * (1.0 - s))


def _k2_matrix(t, s):
    t = t[:, None]
    s = s[None, :]
    return np.where(s <= t, 0.5 * (1.0 - 2.0 * t), 0.5 * (1.0 - 2.0 * s))


def kernel_matrix(kernel: KernelId, t, s) -> np.ndarray:
    """``k(t_i, s_j)`` for an interval kernel, vectorized."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if kernel is KernelId.K1_DIRICHLET:
        return _k1_matrix(t, s)
    if kernel is KernelId.K2_MIXED:
        return _k2_matrix(t, s)
    raise KernelError("kernel_matrix is only defined for the interval kernels")


def green_values(x1, x2, y1, y2):
    num = (x1 * x1 + x2 * x2) * (y1 * y1 + y2 * y2) - 2.0 * (x1 * y1 + x2 * y2) + 1.0
    den = (x1 - y1) ** 2 + (x2 - y2) ** 2
    return _INV_4PI * np.log(num / den)


def disk_green(x, y) -> float:
    """Dirichlet Green's function of ``-Laplace`` on the unit disk."""
    x1, x2 = map(float, x)
    y1, y2 = map(float, y)
    if x1 * x1 + x2 * x2 > 1.0 + 1e-12 or y1 * y1 + y2 * y2 > 1.0 + 1e-12:
        raise KernelError(f"points must lie in the closed unit disk, got {x}, {y}")
    if x1 == y1 and x2 == y2:
        raise KernelError(f"Green's function is singular at x = y = {tuple(x)}")
    return float(green_values(x1, x2, y1, y2))


def torsion_exact(x) -> float:
    """``(1 - |x|^2)/4``, the solution of ``-Laplace w = 1``, ``w = 0`` on the circle."""
    x = np.asarray(x, dtype=float)
    return 0.25 * (1.0 - np.sum(x * x, axis=-1))


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and nonnegative weights; ``points`` has shape ``(n, d)``."""

    grid: Grid
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def trapezoid_rule(grid: Grid1D) -> QuadratureRule:
    h = grid.spacing
    w = np.full(grid.n, h)
    w[0] = w[-1] = 0.5 * h
    return QuadratureRule(grid, grid.points, w)


def disk_rule(grid: DiskGrid) -> QuadratureRule:
    return QuadratureRule(grid, grid.nodes, grid.weights)


def quadrature_rule(grid: Grid) -> QuadratureRule:
    return trapezoid_rule(grid) if isinstance(grid, Grid1D) else disk_rule(grid)


def integrate_1d(f: GridFn, q: QuadratureRule) -> float:
    """Quadrature sum ``sum_i w_i f(t_i)``."""
    if f.grid != q.grid:
        raise GridMismatchError("function and quadrature rule live on different grids")
    return q.integrate(f.values)


def _coincident(point, q: QuadratureRule, atol=1e-14):
    d = np.max(np.abs(q.points - np.asarray(point, dtype=float)[None, :]), axis=1)
    hit = np.flatnonzero(d <= atol)
    return int(hit[0]) if hit.size else None


def torsion(x, q: QuadratureRule) -> float:
    """Plain quadrature of ``integral_disk G(x, y) dy``.

    Independent of the singularity subtraction used by the Nystrom operator,
    so it can serve as a check on it.  A node coinciding with ``x`` is
    skipped.
    """
    x = np.asarray(x, dtype=float)
    if x @ x > 1.0 + 1e-12:
        raise KernelError(f"point {tuple(x)} is outside the closed unit disk")
    p = q.points
    with np.errstate(divide="ignore", invalid="ignore"):
        g = green_values(x[0], x[1], p[:, 0], p[:, 1])
    skip = _coincident(x, q)
    if skip is not None:
        g[skip] = 0.0
    return float(np.dot(g, q.weights))


def kernel_row(kernel: KernelId, point, q: QuadratureRule) -> np.ndarray:
    """Weights ``row`` with ``row @ phi ~ integral k(point, s) phi(s) ds``.

    For the disk kernel, when ``point`` is a grid node the diagonal entry is
    set so that the row sum equals the exact torsion value (singularity
    subtraction); at any other point the row is the plain product rule.
    """
    if kernel is KernelId.DISK_LAPLACIAN:
        if not isinstance(q.grid, DiskGrid):
            raise GridMismatchError("the disk kernel needs a DiskGrid quadrature rule")
        x = np.asarray(point, dtype=float).reshape(2)
        p = q.points
        with np.errstate(divide="ignore", invalid="ignore"):
            row = green_values(x[0], x[1], p[:, 0], p[:, 1]) * q.weights
        diag = _coincident(x, q)
        if diag is not None:
            row[diag] = 0.0
            row[diag] = torsion_exact(x) - row.sum()
        return row
    if not isinstance(q.grid, Grid1D):
        raise GridMismatchError(f"{kernel.name} needs a Grid1D quadrature rule")
    t = np.atleast_1d(np.asarray(point, dtype=float))
    build = _k1_matrix if kernel is KernelId.K1_DIRICHLET else _k2_matrix
    return build(t, q.points[:, 0])[0] * q.weights


class DenseOperator:
    """Nystrom matrix ``A[i, j] = k(t_i, s_j) w_j`` for an interval kernel."""

    def __init__(self, kernel: KernelId, grid: Grid1D):
        if not isinstance(grid, Grid1D):
            raise GridMismatchError(f"{kernel.name} needs a Grid1D")
        self.kernel = kernel
        self.grid = grid
        q = trapezoid_rule(grid)
        t = grid.nodes
        build = _k1_matrix if kernel is KernelId.K1_DIRICHLET else _k2_matrix
        matrix = build(t, t) * q.weights[None, :]
        matrix.setflags(write=False)
        self.matrix = matrix

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.matrix @ values

    def dense(self) -> np.ndarray:
        return self.matrix


class DiskOperator:
    """Nystrom operator for the disk Green's function on a polar grid.

    The product grid is invariant under rotation by ``2*pi/n_theta``, so the
    off-diagonal part is block circulant in the angular index and is applied
    with real FFTs.  Only ``n_r * n_r * n_theta`` kernel values are stored
    instead of the full ``(n_r*n_theta)**2`` matrix.
    """

    def __init__(self, grid: DiskGrid):
        if not isinstance(grid, DiskGrid):
            raise GridMismatchError("the disk kernel needs a DiskGrid")
        self.kernel = KernelId.DISK_LAPLACIAN
        self.grid = grid
        r = grid.radii
        th = grid.angles
        wk = grid.radial_weights * r * (2.0 * np.pi / grid.n_theta)
        # target (r_i, 0), source (r_k cos th_m, r_k sin th_m)
        ri = r[:, None, None]
        y1 = (r[:, None] * np.cos(th)[None, :])[None, :, :]
        y2 = (r[:, None] * np.sin(th)[None, :])[None, :, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            block = green_values(ri, 0.0, y1, y2) * wk[None, :, None]
        idx = np.arange(grid.n_r)
        block[idx, idx, 0] = 0.0
        self.blocks = block
        self.diag = torsion_exact(np.stack([r, np.zeros_like(r)], axis=1)) - block.sum(axis=(1, 2))
        # out[i, j] = sum_{k, l} block[i, k, (l - j) mod n] phi[k, l]  (a correlation)
        self._fblocks = np.conj(np.fft.rfft(block, axis=2))

    def apply(self, values: np.ndarray) -> np.ndarray:
        g = self.grid
        phi = np.asarray(values, dtype=float).reshape(g.n_r, g.n_theta)
        fphi = np.fft.rfft(phi, axis=1)
        out = np.fft.irfft(np.einsum("ikm,km->im", self._fblocks, fphi), n=g.n_theta, axis=1)
        out += self.diag[:, None] * phi
        return out.reshape(-1)

    def dense(self) -> np.ndarray:
        """Full matrix, for small grids and tests only."""
        g = self.grid
        n = g.n_theta
        j = np.arange(n)
        shift = (j[None, :] - j[:, None]) % n  # [target j, source l] -> (l - j) mod n
        full = self.blocks[:, :, shift]  # (i, k, j, l)
        full = full.transpose(0, 2, 1, 3).reshape(g.size, g.size).copy()
        full[np.arange(g.size), np.arange(g.size)] += np.repeat(self.diag, n)
        return full


def assemble_operator(kernel: KernelId, grid: Grid):
    """Build the Nystrom operator of ``kernel`` on ``grid`` (uncached)."""
    if not isinstance(grid, kernel.grid_type):
        raise GridMismatchError(f"kernel {kernel.name} cannot be used on {type(grid).__name__}")
    if kernel is KernelId.DISK_LAPLACIAN:
        return DiskOperator(grid)
    return DenseOperator(kernel, grid)


@lru_cache(maxsize=32)
def nystrom_operator(kernel: KernelId, grid: Grid):
    """Cached :func:`assemble_operator`; operators are read-only once built."""
    return assemble_operator(kernel, grid)
