"""Retraction, Hammerstein operators, normalized auxiliary maps and the solver.

For radii ``r1, r2`` and signs ``(s1, s2)`` the auxiliary map is::

    N(x, y) = ( s1 r1 T1(rho1(x), y) / |T1(rho1(x), y)|,
                s2 r2 T2(x, rho2(y)) / |T2(x, rho2(y))| )

where ``rho_i`` retracts the ball of radius ``r_i`` (intersected with the
component's cone) onto its sphere.  A fixed point lies on the product of
spheres and gives ``x = l1 T1(x, y)``, ``y = l2 T2(x, y)`` with
``l_i = s_i r_i / |T_i(x, y)|``.  A negative sign is only meaningful when the
component ranges over the whole space.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .domain import (
    ConeSpec,
    EigenPairResult,
    GridFn,
    HammersteinProblem,
    SignPattern,
    sup_norm,
)
from .exceptions import DegenerateRetraction, NonConvergence, VanishingOperator
from .exprlang import ExprEvalError, evaluate
from .kernels import nystrom_operator

__all__ = [
    "RetractionSpec",
    "SolverOptions",
    "retract",
    "grid_env",
    "eval_on_grid",
    "apply_T",
    "apply_T_component",
    "apply_N",
    "extract_eigen",
    "eigen_residuals",
    "solve_fixed_point",
]

log = logging.getLogger(__name__)

VANISH_TOL = 1e-14
RETRACT_TOL = 1e-12
NORM_SLACK = 1e-8


@dataclass(frozen=True, eq=False)
class RetractionSpec:
    r: float
    h: GridFn
    cone: ConeSpec = ConeSpec.whole_space()

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"retraction radius must be positive, got {self.r}")
        if sup_norm(self.h) == 0.0:
            raise ValueError("retraction direction h must be nonzero")


@dataclass(frozen=True)
class SolverOptions:
    """Controls for the damped Picard iteration on the auxiliary map.

    ``init`` is ``None`` (start from ``r_i h_i / |h_i|``) or a pair of
    :class:`GridFn`.
    """

    theta: float = 1.0
    tol_step: float = 1e-10
    tol_res: float = 1e-8
    max_iter: int = 500
    init: Optional[Tuple[GridFn, GridFn]] = None
    min_theta: float = 1.0 / 16.0
    cycle_window: int = 20

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if not (self.tol_step > 0 and self.tol_res > 0):
            raise ValueError("tolerances must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter}")


def _alternative_direction(h: GridFn) -> GridFn:
    ramp = np.linspace(1.0, 2.0, h.grid.size)
    hv = h.values / sup_norm(h)
    rv = ramp / 2.0
    if min(np.max(np.abs(hv - rv)), np.max(np.abs(hv + rv))) < 1e-12:
        return GridFn.constant(h.grid, 1.0)
    return GridFn(h.grid, ramp)


def retract(z: GridFn, spec: RetractionSpec) -> GridFn:
    """Map the closed ball of radius ``spec.r`` onto its sphere.

    ``rho(z) = r (z + (r - |z|)^2 h) / |z + (r - |z|)^2 h|``; identity on the
    sphere.  Inputs marginally outside the ball are clamped radially.
    """
    if z.grid != spec.h.grid:
        raise ValueError("z and h live on different grids")
    r = spec.r
    nz = sup_norm(z)
    if nz > r * (1.0 + NORM_SLACK):
        raise ValueError(f"retract: |z| = {nz:.17g} exceeds the radius {r:.17g}")
    gap = max(r - nz, 0.0)
    for h in (spec.h, _alternative_direction(spec.h)):
        w = z.values + gap * gap * h.values
        nw = float(np.max(np.abs(w)))
        if nw >= RETRACT_TOL:
            return GridFn(z.grid, (r / nw) * w)
        log.debug("retraction denominator %.3g below %.1g; trying another direction", nw, RETRACT_TOL)
    raise DegenerateRetraction(f"retraction denominator vanished (|z| = {nz:.6g}, r = {r:.6g})")


def grid_env(grid, problem: HammersteinProblem | None = None, **extra) -> dict:
    env = dict(grid.coords)
    if problem is not None:
        env["r1"] = problem.r1
        env["r2"] = problem.r2
    env.update(extra)
    return env


def _locate_failure(expr, env, grid, exc):
    coords = grid.coords
    for idx in range(grid.size):
        point = {k: (val[idx] if np.ndim(val) else val) for k, val in env.items()}
        try:
            evaluate(expr, point)
        except ExprEvalError as inner:
            where = ", ".join(f"{k}={coords[k][idx]:.6g}" for k in coords)
            return ExprEvalError(f"{inner} at node {idx} ({where})")
    return exc


def eval_on_grid(expr, grid, env: dict) -> np.ndarray:
    try:
        return evaluate(expr, env)
    except ExprEvalError as exc:
        if "unbound variable" in str(exc):
            raise
        raise _locate_failure(expr, env, grid, exc) from None


def apply_T_component(p: HammersteinProblem, i: int, u: GridFn, v: GridFn, operator=None) -> GridFn:
    """``T_i(u, v)`` at every node via the cached Nystrom operator."""
    expr, kernel = (p.f_expr, p.kernel1) if i == 1 else (p.g_expr, p.kernel2)
    env = grid_env(p.grid, p, u=u.values, v=v.values)
    data = eval_on_grid(expr, p.grid, env)
    op = operator if operator is not None else nystrom_operator(kernel, p.grid)
    return GridFn(p.grid, op.apply(data))


def apply_T(p: HammersteinProblem, u: GridFn, v: GridFn) -> Tuple[GridFn, GridFn]:
    return apply_T_component(p, 1, u, v), apply_T_component(p, 2, u, v)


def _retraction(p: HammersteinProblem, i: int) -> RetractionSpec:
    return RetractionSpec(p.radius(i), p.h1 if i == 1 else p.h2, p.cone(i))


def _normalize(tv: GridFn, r: float, s: int, which: int) -> GridFn:
    nt = sup_norm(tv)
    if nt < VANISH_TOL:
        raise VanishingOperator(
            f"|T{which}| = {nt:.3g} is numerically zero; the operator does not stay away from 0"
        )
    return GridFn(tv.grid, (s * r / nt) * tv.values)


def apply_N(p: HammersteinProblem, x: GridFn, y: GridFn, sign: SignPattern) -> Tuple[GridFn, GridFn]:
    """One application of the normalized auxiliary map for ``sign``."""
    sign.check_legal(p.cone1, p.cone2)
    t1 = apply_T_component(p, 1, retract(x, _retraction(p, 1)), y)
    t2 = apply_T_component(p, 2, x, retract(y, _retraction(p, 2)))
    return _normalize(t1, p.r1, sign.s1, 1), _normalize(t2, p.r2, sign.s2, 2)


def extract_eigen(r1: float, r2: float, t1: GridFn, t2: GridFn, sign: SignPattern) -> Tuple[float, float]:
    """``l_i = s_i r_i / |T_i|``."""
    out = []
    for which, (r, tv, s) in enumerate(((r1, t1, sign.s1), (r2, t2, sign.s2)), start=1):
        nt = sup_norm(tv)
        if nt < VANISH_TOL:
            raise VanishingOperator(f"|T{which}| = {nt:.3g}: eigenvalue undefined")
        out.append(s * r / nt)
    return out[0], out[1]


def eigen_residuals(p: HammersteinProblem, x: GridFn, y: GridFn, sign: SignPattern, operators=None):
    """Return ``(l1, l2, |x - l1 T1(x, y)|, |y - l2 T2(x, y)|)``."""
    ops = operators or (None, None)
    t1 = apply_T_component(p, 1, x, y, ops[0])
    t2 = apply_T_component(p, 2, x, y, ops[1])
    l1, l2 = extract_eigen(p.r1, p.r2, t1, t2, sign)
    return l1, l2, sup_norm(x - l1 * t1), sup_norm(y - l2 * t2)


def _to_sphere(w: np.ndarray, r: float) -> np.ndarray:
    nw = float(np.max(np.abs(w)))
    if nw < RETRACT_TOL:
        raise DegenerateRetraction("damped iterate collapsed to zero; reduce theta")
    return (r / nw) * w


def solve_fixed_point(
    p: HammersteinProblem, sign: SignPattern = SignPattern(), opts: SolverOptions = SolverOptions()
) -> EigenPairResult:
    """Iterate the auxiliary map until it settles on a fixed point.

    Each step is ``(x, y) <- (1 - theta)(x, y) + theta N(x, y)`` followed by
    radial rescaling to norms ``(r1, r2)``.  If the step sizes stop shrinking
    over ``opts.cycle_window`` iterations, ``theta`` is halved (not below
    ``opts.min_theta``).  Raises :class:`NonConvergence` after ``max_iter``.
    """
    sign.check_legal(p.cone1, p.cone2)
    if opts.init is None:
        x = GridFn(p.grid, _to_sphere(p.h1.values, p.r1))
        y = GridFn(p.grid, _to_sphere(p.h2.values, p.r2))
    else:
        x, y = opts.init

    theta = opts.theta
    steps: list[float] = []
    last_change = 0
    best = None
    for it in range(1, opts.max_iter + 1):
        n1, n2 = apply_N(p, x, y, sign)
        if theta < 1.0:
            xv = _to_sphere((1.0 - theta) * x.values + theta * n1.values, p.r1)
            yv = _to_sphere((1.0 - theta) * y.values + theta * n2.values, p.r2)
        else:
            xv, yv = n1.values, n2.values
        step = max(float(np.max(np.abs(xv - x.values))), float(np.max(np.abs(yv - y.values))))
        x, y = GridFn(p.grid, xv), GridFn(p.grid, yv)
        steps.append(step)
        if best is None or step <= best[0]:
            best = (step, x, y, it)

        if step <= opts.tol_step:
            l1, l2, res1, res2 = eigen_residuals(p, x, y, sign)
            if res1 <= opts.tol_res and res2 <= opts.tol_res:
                log.debug("converged after %d iterations (theta=%g)", it, theta)
                return EigenPairResult(l1, l2, x, y, res1, res2, it, True, sign, theta)

        w = opts.cycle_window
        if (
            theta > opts.min_theta
            and it - last_change >= w
            and len(steps) > w
            and steps[-1] >= steps[-1 - w]
        ):
            theta = max(theta / 2.0, opts.min_theta)
            last_change = it
            log.debug("step sizes not decreasing at iteration %d; theta -> %g", it, theta)

    _, bx, by, bit = best
    l1, l2, res1, res2 = eigen_residuals(p, bx, by, sign)
    result = EigenPairResult(l1, l2, bx, by, res1, res2, opts.max_iter, False, sign, theta)
    raise NonConvergence(
        f"no fixed point within {opts.max_iter} iterations "
        f"(best step {best[0]:.3g} at iteration {bit}, residuals {res1:.3g}, {res2:.3g})",
        result,
    )
