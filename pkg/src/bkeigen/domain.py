"""Value types shared by every other module.

Continuous functions are stored by their values at the nodes of a fixed grid
(either a uniform grid on [0, 1] or a polar grid on the closed unit disk), and
the sup-norm is the maximum absolute node value.  Everything here is immutable
once constructed.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Union

import numpy as np

from .exceptions import ConeError, GridMismatchError, IllegalSignPattern

__all__ = [
    "Grid1D",
    "DiskGrid",
    "Grid",
    "GridFn",
    "ConeKind",
    "ConeSpec",
    "SignPattern",
    "HammersteinProblem",
    "EigenPairResult",
    "sup_norm",
    "cone_contains",
    "axpy",
]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid ``0 = t_0 < ... < t_{n-1} = 1``."""

    n: int = 201

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"Grid1D needs an integer n >= 3, got {self.n!r}")

    @cached_property
    def nodes(self) -> np.ndarray:
        return _frozen(np.linspace(0.0, 1.0, self.n))

    @property
    def size(self) -> int:
        return self.n

    @property
    def spacing(self) -> float:
        return 1.0 / (self.n - 1)

    @property
    def coords(self) -> dict[str, np.ndarray]:
        return {"t": self.nodes}

    @property
    def points(self) -> np.ndarray:
        return self.nodes[:, None]


@dataclass(frozen=True)
class DiskGrid:
    """Polar product grid on the closed unit disk.

    Radii are Gauss-Legendre nodes on (0, 1), angles are ``2*pi*j/n_theta``.
    Nodes are flattened radius-major: node ``i*n_theta + j`` sits at radius
    ``radii[i]`` and angle ``angles[j]``.  The weights carry the ``r dr dtheta``
    Jacobian and sum to ``pi``.
    """

    n_r: int = 64
    n_theta: int = 128

    def __post_init__(self):
        if self.n_r < 1 or self.n_theta < 1:
            raise ValueError("DiskGrid needs n_r >= 1 and n_theta >= 1")

    @cached_property
    def _radial(self):
        g, w = np.polynomial.legendre.leggauss(self.n_r)
        return (g + 1.0) / 2.0, w / 2.0

    @cached_property
    def radii(self) -> np.ndarray:
        return _frozen(self._radial[0])

    @cached_property
    def radial_weights(self) -> np.ndarray:
        return _frozen(self._radial[1])

    @cached_property
    def angles(self) -> np.ndarray:
        return _frozen(2.0 * np.pi * np.arange(self.n_theta) / self.n_theta)

    @cached_property
    def nodes(self) -> np.ndarray:
        r, th = np.meshgrid(self.radii, self.angles, indexing="ij")
        pts = np.stack([(r * np.cos(th)).ravel(), (r * np.sin(th)).ravel()], axis=1)
        return _frozen(pts)

    @cached_property
    def weights(self) -> np.ndarray:
        r, wr = self._radial
        w = np.repeat(wr * r * (2.0 * np.pi / self.n_theta), self.n_theta)
        return _frozen(w)

    @property
    def size(self) -> int:
        return self.n_r * self.n_theta

    @property
    def coords(self) -> dict[str, np.ndarray]:
        return {"x": self.nodes[:, 0], "y": self.nodes[:, 1]}

    @property
    def points(self) -> np.ndarray:
        return self.nodes


Grid = Union[Grid1D, DiskGrid]


@dataclass(frozen=True, eq=False)
class GridFn:
    """A real function sampled at the nodes of ``grid``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(-1)
        if vals.size != self.grid.size:
            raise ValueError(
                f"GridFn has {vals.size} values for a grid of {self.grid.size} nodes"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("GridFn values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "GridFn":
        return cls(grid, np.full(grid.size, float(c)))

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFn":
        return cls.constant(grid, 0.0)

    def norm(self) -> float:
        return sup_norm(self)

    def _check(self, other: "GridFn"):
        if not isinstance(other, GridFn):
            return NotImplemented
        if other.grid != self.grid:
            raise GridMismatchError(f"grid mismatch: {self.grid} vs {other.grid}")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return GridFn(self.grid, self.values + other.values)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return GridFn(self.grid, self.values - other.values)

    def __mul__(self, alpha):
        if not np.isscalar(alpha):
            return NotImplemented
        return GridFn(self.grid, float(alpha) * self.values)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFn(self.grid, -self.values)

    def __len__(self):
        return self.values.size

    def __repr__(self):
        return f"GridFn(grid={self.grid!r}, norm={sup_norm(self):.6g})"


def sup_norm(f: GridFn) -> float:
    """Maximum absolute node value."""
    return float(np.max(np.abs(f.values)))


def axpy(f: GridFn, g: GridFn, alpha: float, beta: float) -> GridFn:
    """Node-wise ``alpha*f + beta*g``; both must live on the same grid."""
    if f.grid != g.grid:
        raise GridMismatchError(f"grid mismatch: {f.grid} vs {g.grid}")
    return GridFn(f.grid, alpha * f.values + beta * g.values)


class ConeKind(enum.Enum):
    POSITIVE = "positive"
    GUO = "guo"
    WHOLE_SPACE = "whole_space"


@dataclass(frozen=True)
class ConeSpec:
    """Membership rule for one solution component.

    ``GUO`` is the cone of nonnegative functions whose minimum over the window
    ``[a, b]`` is at least ``c`` times their sup-norm.
    """

    kind: ConeKind
    a: float | None = None
    b: float | None = None
    c: float | None = None

    def __post_init__(self):
        if self.kind is ConeKind.GUO:
            if None in (self.a, self.b, self.c):
                raise ValueError("Guo cone needs a, b and c")
            if not 0.0 < self.a < self.b < 1.0:
                raise ValueError(f"Guo window must satisfy 0 < a < b < 1, got [{self.a}, {self.b}]")
            if not 0.0 < self.c <= 1.0:
                raise ValueError(f"Guo constant must lie in (0, 1], got {self.c}")

    @classmethod
    def positive(cls) -> "ConeSpec":
        return cls(ConeKind.POSITIVE)

    @classmethod
    def guo(cls, a: float = 0.25, b: float = 0.75, c: float = 0.25) -> "ConeSpec":
        return cls(ConeKind.GUO, a, b, c)

    @classmethod
    def whole_space(cls) -> "ConeSpec":
        return cls(ConeKind.WHOLE_SPACE)

    @property
    def is_cone(self) -> bool:
        return self.kind is not ConeKind.WHOLE_SPACE


def _guo_window(c: ConeSpec, grid: Grid) -> np.ndarray:
    if not isinstance(grid, Grid1D):
        raise ConeError("Guo cone is only defined on a Grid1D")
    t = grid.nodes
    mask = (t >= c.a - 1e-12) & (t <= c.b + 1e-12)
    if not mask.any():
        raise ConeError(f"grid too coarse: no nodes in the window [{c.a}, {c.b}]")
    return mask


def cone_contains(c: ConeSpec, f: GridFn, tol: float = 0.0) -> bool:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if c.kind is ConeKind.WHOLE_SPACE:
        return True
    vals = f.values
    if c.kind is ConeKind.POSITIVE:
        return bool(np.all(vals >= -tol))
    mask = _guo_window(c, f.grid)
    if not np.all(vals >= -tol):
        return False
    return bool(vals[mask].min() >= c.c * sup_norm(f) - tol)


@dataclass(frozen=True)
class SignPattern:
    """Signs ``(s1, s2)`` selecting which normalized auxiliary map is iterated."""

    s1: int = 1
    s2: int = 1

    def __post_init__(self):
        for s in (self.s1, self.s2):
            if s not in (1, -1) or isinstance(s, bool):
                raise ValueError(f"sign entries must be +1 or -1, got {s!r}")

    @classmethod
    def parse(cls, text: str) -> "SignPattern":
        text = text.strip()
        if len(text) != 2 or any(ch not in "+-" for ch in text):
            raise ValueError(f"sign pattern must be one of '++', '+-', '-+', '--', got {text!r}")
        return cls(*(1 if ch == "+" else -1 for ch in text))

    def __str__(self):
        return "".join("+" if s > 0 else "-" for s in (self.s1, self.s2))

    def __iter__(self):
        return iter((self.s1, self.s2))

    def check_legal(self, cone1: ConeSpec, cone2: ConeSpec) -> None:
        for i, (s, cone) in enumerate(((self.s1, cone1), (self.s2, cone2)), start=1):
            if s < 0 and cone.is_cone:
                raise IllegalSignPattern(
                    f"sign pattern {self}: component {i} is restricted to the "
                    f"{cone.kind.value} cone, so its sign must be '+'"
                )

    @staticmethod
    def legal_patterns(cone1: ConeSpec, cone2: ConeSpec) -> list["SignPattern"]:
        out = []
        for text in ("++", "+-", "-+", "--"):
            p = SignPattern.parse(text)
            try:
                p.check_legal(cone1, cone2)
            except IllegalSignPattern:
                continue
            out.append(p)
        return out


@dataclass(frozen=True, eq=False)
class HammersteinProblem:
    """One system ``x = l1*T1(x, y)``, ``y = l2*T2(x, y)`` with Hammerstein ``Ti``.

    ``kernel1``/``kernel2`` are :class:`bkeigen.kernels.KernelId` members and
    ``f_expr``/``g_expr`` parsed expressions in the spatial variable(s) of the
    grid plus ``u``, ``v``, ``r1``, ``r2``.  ``h1``/``h2`` are the fixed
    directions used by the retractions; they default to the constant one.
    """

    grid: Grid
    kernel1: Any
    kernel2: Any
    f_expr: Any
    g_expr: Any
    r1: float
    r2: float
    cone1: ConeSpec
    cone2: ConeSpec
    h1: GridFn | None = None
    h2: GridFn | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if not (self.r1 > 0 and self.r2 > 0):
            raise ValueError(f"radii must be positive, got r1={self.r1}, r2={self.r2}")
        for attr, cone in (("h1", self.cone1), ("h2", self.cone2)):
            h = getattr(self, attr)
            if h is None:
                h = GridFn.constant(self.grid, 1.0)
                object.__setattr__(self, attr, h)
            if h.grid != self.grid:
                raise GridMismatchError(f"{attr} lives on a different grid")
            if sup_norm(h) == 0.0:
                raise ValueError(f"{attr} must be nonzero")
            if not cone_contains(cone, h, 1e-12):
                raise ValueError(f"{attr} must belong to its component's cone ({cone.kind.value})")

    def radius(self, i: int) -> float:
        return self.r1 if i == 1 else self.r2

    def cone(self, i: int) -> ConeSpec:
        return self.cone1 if i == 1 else self.cone2


@dataclass(frozen=True, eq=False)
class EigenPairResult:
    lambda1: float
    lambda2: float
    x0: GridFn
    y0: GridFn
    residual1: float
    residual2: float
    iterations: int
    converged: bool
    sign: SignPattern = SignPattern()
    theta: float = 1.0

    @property
    def lambdas(self) -> tuple[float, float]:
        return self.lambda1, self.lambda2
