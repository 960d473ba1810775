"""Hypothesis checks, solution validation and the scalar-eigenvalue counterexample.

Two kinds of evidence for the boundary conditions ``inf |T_i| > 0``:

* the lower-bound route: if ``f >= f_lower`` on the relevant box, then
  ``|T1(u, v)|`` is bounded below by a quantity involving only ``f_lower``,
  which is computed here by quadrature;
* a sampled probe: the minimum of ``|T_i|`` over random admissible pairs.
  This is an *upper* bound on the true infimum, useful only as a warning.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .core import apply_T_component, eval_on_grid, extract_eigen, grid_env
from .domain import (
    ConeKind,
    ConeSpec,
    EigenPairResult,
    Grid1D,
    GridFn,
    HammersteinProblem,
    cone_contains,
    sup_norm,
)
from .exceptions import BKError
from .exprlang import evaluate
from .kernels import (
    KernelId,
    assemble_operator,
    kernel_matrix,
    kernel_row,
    nystrom_operator,
    quadrature_rule,
)

__all__ = [
    "HypothesisSpec",
    "HypothesisReport",
    "SolutionReport",
    "check_lower_bound_route",
    "estimate_inf_boundary",
    "random_admissible",
    "verify_solution",
    "common_eigenvalue",
]

DOMINATION_SAMPLES = 21


@dataclass(frozen=True)
class HypothesisSpec:
    f_lower: object
    g_lower: object


@dataclass(frozen=True)
class HypothesisReport:
    theorem: str
    domination_ok1: bool
    domination_ok2: bool
    bound1: float
    bound2: float
    g_lower_integral: Optional[float] = None
    lower_nonnegative: bool = True

    @property
    def positive(self) -> bool:
        return self.bound1 > 0 and self.bound2 > 0

    @property
    def ok(self) -> bool:
        return self.positive and self.domination_ok1 and self.domination_ok2


def _theorem_for(p: HammersteinProblem) -> str:
    if p.kernel1 is KernelId.K1_DIRICHLET and p.kernel2 is KernelId.K2_MIXED:
        return "ode"
    if p.kernel1 is KernelId.DISK_LAPLACIAN and p.kernel2 is KernelId.DISK_LAPLACIAN:
        return "pde_disk"
    raise BKError(
        f"no lower-bound route for kernels ({p.kernel1.name}, {p.kernel2.name}); "
        "expected (K1_DIRICHLET, K2_MIXED) or (DISK_LAPLACIAN, DISK_LAPLACIAN)"
    )


def _dominates(expr, lower, space: dict, u_range, v_range, p: HammersteinProblem) -> bool:
    """Sample ``expr - lower >= 0`` on space x u-range x v-range (tolerance 0)."""
    n = DOMINATION_SAMPLES
    us = np.linspace(u_range[0], u_range[1], n)
    vs = np.linspace(v_range[0], v_range[1], n)
    env = {k: val[:, None, None] for k, val in space.items()}
    env.update(u=us[None, :, None], v=vs[None, None, :], r1=p.r1, r2=p.r2)
    upper = evaluate(expr, env)
    low = evaluate(lower, {k: env[k] for k in space} | {"r1": p.r1, "r2": p.r2})
    return bool(np.all(upper - low >= 0.0))


def check_lower_bound_route(p: HammersteinProblem, h: HypothesisSpec) -> HypothesisReport:
    """Evaluate the lower bounds for ``inf |T1|`` and ``inf |T2|``.

    Interval problem (Guo cone x whole space): ``bound1`` is
    ``max_{t in [1/4, 3/4]} int_{1/4}^{3/4} k1(t, s) f_lower(s) ds`` and
    ``bound2 = int_0^1 g_lower / 2`` (because ``-k2(1, s) = 1/2``).
    Disk problem: ``bound_i = max_x int G(x, y) lower_i(y) dy``.
    """
    theorem = _theorem_for(p)
    grid = p.grid
    env = grid_env(grid, p)
    f_low = eval_on_grid(h.f_lower, grid, env)
    g_low = eval_on_grid(h.g_lower, grid, env)
    nonneg = bool(np.all(f_low >= 0.0) and np.all(g_low >= 0.0))

    if theorem == "ode":
        t = grid.nodes
        w = quadrature_rule(grid).weights
        mask = (t >= 0.25 - 1e-12) & (t <= 0.75 + 1e-12)
        tw = t[mask]
        if tw.size < 2:
            raise BKError("grid too coarse for the window [1/4, 3/4]")
        ww = np.full(tw.size, tw[1] - tw[0])
        ww[0] = ww[-1] = 0.5 * (tw[1] - tw[0])
        k1w = kernel_matrix(KernelId.K1_DIRICHLET, tw, tw) * ww[None, :]
        bound1 = float(np.max(k1w @ f_low[mask]))
        g_int = float(np.dot(w, g_low))
        bound2 = 0.5 * g_int

        window = np.linspace(0.25, 0.75, DOMINATION_SAMPLES)
        full = np.linspace(0.0, 1.0, DOMINATION_SAMPLES)
        dom1 = _dominates(p.f_expr, h.f_lower, {"t": window}, (p.r1 / 4, p.r1), (-p.r2, p.r2), p)
        dom2 = _dominates(p.g_expr, h.g_lower, {"t": full}, (0.0, p.r1), (-p.r2, p.r2), p)
        return HypothesisReport(theorem, dom1, dom2, bound1, bound2, g_int, nonneg)

    q = quadrature_rule(grid)
    center = kernel_row(KernelId.DISK_LAPLACIAN, (0.0, 0.0), q)
    op = nystrom_operator(KernelId.DISK_LAPLACIAN, grid)
    bounds = []
    for low in (f_low, g_low):
        bounds.append(float(max(np.max(op.apply(low)), center @ low)))
    space = {"x": grid.coords["x"], "y": grid.coords["y"]}
    dom1 = _dominates(p.f_expr, h.f_lower, space, (0.0, p.r1), (0.0, p.r2), p)
    dom2 = _dominates(p.g_expr, h.g_lower, space, (0.0, p.r1), (0.0, p.r2), p)
    return HypothesisReport(theorem, dom1, dom2, bounds[0], bounds[1], None, nonneg)


def _bumps(grid, rng, signed: bool) -> np.ndarray:
    pts = grid.points
    vals = np.zeros(grid.size)
    while not np.any(vals):
        for _ in range(int(rng.integers(1, 5))):
            if isinstance(grid, Grid1D):
                c = rng.uniform(0.0, 1.0, size=1)
            else:
                rad, ang = np.sqrt(rng.uniform()), rng.uniform(0.0, 2 * np.pi)
                c = np.array([rad * np.cos(ang), rad * np.sin(ang)])
            width = rng.uniform(0.1, 0.6)
            amp = rng.uniform(-1.0, 1.0) if signed else rng.uniform(0.05, 1.0)
            dist = np.sqrt(np.sum((pts - c[None, :]) ** 2, axis=1))
            vals += amp * np.maximum(0.0, 1.0 - dist / width)
    return vals


def random_admissible(grid, cone: ConeSpec, norm: float, rng: np.random.Generator) -> GridFn:
    """Random element of ``cone`` with sup-norm ``norm``.

    Piecewise-linear hat bumps (signed for the whole space); for a Guo cone the
    normalized bump is blended with the constant one until it enters the cone.
    """
    vals = _bumps(grid, rng, signed=cone.kind is ConeKind.WHOLE_SPACE)
    vals = vals / np.max(np.abs(vals))
    if cone.kind is ConeKind.GUO:
        for beta in np.linspace(0.0, 1.0, 21):
            trial = (1.0 - beta) * vals + beta
            if cone_contains(cone, GridFn(grid, trial)):
                vals = trial
                break
    if norm == 0.0:
        return GridFn.zeros(grid)
    return GridFn(grid, vals * (norm / np.max(np.abs(vals))))


def estimate_inf_boundary(p: HammersteinProblem, component: int, n_samples: int = 200, seed: int = 0) -> float:
    """Minimum of ``|T_component|`` over random pairs on the relevant boundary slice.

    For component 1 the pairs satisfy ``|x| = r1, |y| <= r2``; for component 2,
    ``|x| <= r1, |y| = r2``.  Deterministic for a fixed ``seed``.
    """
    if component not in (1, 2):
        raise ValueError("component must be 1 or 2")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    best = np.inf
    for _ in range(n_samples):
        if component == 1:
            x = random_admissible(p.grid, p.cone1, p.r1, rng)
            y = random_admissible(p.grid, p.cone2, p.r2 * rng.uniform(), rng)
        else:
            x = random_admissible(p.grid, p.cone1, p.r1 * rng.uniform(), rng)
            y = random_admissible(p.grid, p.cone2, p.r2, rng)
        best = min(best, sup_norm(apply_T_component(p, component, x, y)))
    return float(best)


@dataclass
class SolutionReport:
    checks: dict = field(default_factory=dict)
    residual1: float = np.nan
    residual2: float = np.nan

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [k for k, ok in self.checks.items() if not ok]


def verify_solution(p: HammersteinProblem, res: EigenPairResult, tol: float = 1e-6) -> SolutionReport:
    """Recheck an eigenpair with freshly assembled operators.

    The operators are rebuilt rather than taken from the solver cache, so a
    corrupted cached operator would show up here.
    """
    ops = (assemble_operator(p.kernel1, p.grid), assemble_operator(p.kernel2, p.grid))
    x, y = res.x0, res.y0
    t1 = apply_T_component(p, 1, x, y, ops[0])
    t2 = apply_T_component(p, 2, x, y, ops[1])
    res1 = sup_norm(x - res.lambda1 * t1)
    res2 = sup_norm(y - res.lambda2 * t2)
    checks = {
        "residual1": res1 <= tol,
        "residual2": res2 <= tol,
        "norm1": abs(sup_norm(x) - p.r1) <= tol,
        "norm2": abs(sup_norm(y) - p.r2) <= tol,
        "cone1": cone_contains(p.cone1, x, tol),
        "cone2": cone_contains(p.cone2, y, tol),
        "sign1": np.sign(res.lambda1) == res.sign.s1,
        "sign2": np.sign(res.lambda2) == res.sign.s2,
    }
    try:
        l1, l2 = extract_eigen(p.r1, p.r2, t1, t2, res.sign)
        checks["eigen_formula"] = abs(l1 - res.lambda1) <= tol * max(1.0, abs(l1)) and abs(
            l2 - res.lambda2
        ) <= tol * max(1.0, abs(l2))
    except BKError:
        checks["eigen_formula"] = False
    return SolutionReport({k: bool(v) for k, v in checks.items()}, res1, res2)


def common_eigenvalue(x, tx, tol: float = 1e-12):
    """Single ``lambda > 0`` with ``x = lambda * tx`` componentwise, or ``None``.

    Exact when given :class:`fractions.Fraction` or integer entries.
    """
    x1, x2 = x
    t1, t2 = tx
    if x1 == 0 or x2 == 0:
        raise ValueError("x must have no zero component")
    if t1 == 0 or t2 == 0:
        return None
    a, b = x1 / t1, x2 / t2
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        close = a == b
    else:
        close = abs(a - b) <= tol
    if close and a > 0 and b > 0:
        return a
    return None
