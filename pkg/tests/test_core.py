import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings
from hypothesis import strategies as st

import bkeigen.core as core
from bkeigen.core import (
    RetractionSpec,
    SolverOptions,
    apply_N,
    apply_T,
    extract_eigen,
    retract,
    solve_fixed_point,
)
from bkeigen.domain import ConeSpec, Grid1D, GridFn, SignPattern, cone_contains, sup_norm
from bkeigen.exceptions import DegenerateRetraction, IllegalSignPattern, NonConvergence, VanishingOperator
from bkeigen.exprlang import parse
from bkeigen.kernels import k1, k2, torsion_exact
from bkeigen.verify import random_admissible

from conftest import ode_problem, pde_problem, whole_space_problem

G = Grid1D(101)
ALL_SIGNS = [SignPattern.parse(s) for s in ("++", "+-", "-+", "--")]


class TestRetract:
    def test_identity_on_sphere(self):
        z = GridFn(G, np.sin(3 * G.nodes) * 2 / np.max(np.abs(np.sin(3 * G.nodes))))
        out = retract(z, RetractionSpec(2.0, GridFn.constant(G, 1.0)))
        np.testing.assert_array_equal(out.values, z.values)

    def test_zero_maps_to_scaled_h(self):
        h = GridFn(G, 1 + G.nodes)
        out = retract(GridFn.zeros(G), RetractionSpec(3.0, h))
        np.testing.assert_allclose(out.values, 3.0 * h.values / sup_norm(h), rtol=1e-15)

    def test_collinear(self):
        h = GridFn(G, 0.5 + G.nodes**2)  # |h| = 1.5
        r = 2 * sup_norm(h)
        out = retract(h, RetractionSpec(r, h))
        np.testing.assert_allclose(out.values, r * h.values / sup_norm(h), rtol=1e-14)

    def test_rejects_outside_ball(self):
        with pytest.raises(ValueError):
            retract(GridFn.constant(G, 2.0), RetractionSpec(1.0, GridFn.constant(G, 1.0)))

    def test_marginal_slack_is_clamped(self):
        z = GridFn.constant(G, 1.0 + 1e-12)
        out = retract(z, RetractionSpec(1.0, GridFn.constant(G, 1.0)))
        assert sup_norm(out) == pytest.approx(1.0, abs=1e-15)

    def test_degenerate_direction_fallback(self):
        # z = -(r - |z|)^2 h  makes the first denominator vanish (whole space only)
        h = GridFn.constant(G, 1.0)
        z = GridFn.constant(G, -0.25)  # |z| = 0.25, r = 0.75: (0.5)^2 h = 0.25 h
        out = retract(z, RetractionSpec(0.75, h))
        assert sup_norm(out) == pytest.approx(0.75, abs=1e-15)

    def test_degenerate_raises_when_all_directions_fail(self, monkeypatch):
        h = GridFn.constant(G, 1.0)
        monkeypatch.setattr(core, "_alternative_direction", lambda h: h)
        with pytest.raises(DegenerateRetraction):
            retract(GridFn.constant(G, -0.25), RetractionSpec(0.75, h))


@settings(max_examples=150, deadline=None)
@given(
    st.integers(0, 2**32 - 1),
    st.sampled_from([ConeSpec.guo(), ConeSpec.positive(), ConeSpec.whole_space()]),
    st.floats(0.1, 10.0),
    st.floats(0.0, 1.0),
)
def test_retract_properties(seed, cone, r, frac):
    rng = np.random.default_rng(seed)
    z = random_admissible(G, cone, frac * r, rng)
    h = random_admissible(G, cone, rng.uniform(0.1, 2.0), rng)
    spec = RetractionSpec(r, h, cone)
    w = retract(z, spec)
    assert abs(sup_norm(w) - r) <= 1e-14 * r
    np.testing.assert_allclose(retract(w, spec).values, w.values, atol=1e-12 * r, rtol=0)
    assert cone_contains(cone, w, 1e-10 * r)
    on_sphere = random_admissible(G, cone, r, rng)
    np.testing.assert_allclose(retract(on_sphere, spec).values, on_sphere.values, atol=1e-14 * r, rtol=0)


class TestApplyT:
    def test_ode_closed_forms(self):
        p = ode_problem(f="1", g="1")
        t = p.grid.nodes
        u = v = GridFn.zeros(p.grid)
        t1, t2 = apply_T(p, u, v)
        np.testing.assert_allclose(t1.values, t * (1 - t) / 2, atol=1e-12, rtol=0)
        np.testing.assert_allclose(t2.values, -(t**2) / 2, atol=1e-12, rtol=0)

    def test_disk_closed_form(self):
        p = pde_problem(f="1", g="1")
        t1, _ = apply_T(p, GridFn.zeros(p.grid), GridFn.zeros(p.grid))
        np.testing.assert_allclose(t1.values, torsion_exact(p.grid.nodes), atol=1e-3, rtol=0)

    def test_domain_error_reports_node(self):
        p = ode_problem(f="ln(t)")
        with pytest.raises(Exception, match="at node 0 \\(t=0\\)"):
            apply_T(p, GridFn.zeros(p.grid), GridFn.zeros(p.grid))

    def test_guo_invariance(self, ode):
        guo = ConeSpec.guo()
        rng = np.random.default_rng(11)
        for _ in range(100):
            x = random_admissible(ode.grid, ode.cone1, ode.r1 * rng.uniform(), rng)
            y = random_admissible(ode.grid, ode.cone2, ode.r2 * rng.uniform(), rng)
            t1, _ = apply_T(ode, x, y)
            assert cone_contains(guo, t1, 1e-10)


class TestApplyN:
    def test_zero_input_step_by_step(self, ode):
        # independent evaluation: scalar kernels, explicit loops
        grid = ode.grid
        t = grid.nodes
        w = np.full(t.size, 1.0 / (t.size - 1))
        w[0] = w[-1] = 0.5 / (t.size - 1)
        x = y = np.zeros(t.size)
        rho1 = ode.r1 * ode.h1.values / np.max(np.abs(ode.h1.values))
        rho2 = ode.r2 * ode.h2.values / np.max(np.abs(ode.h2.values))
        f = t * (1 + rho1**2 * y**2)
        g = t * np.exp(x * rho2)
        T1 = np.array([sum(k1(ti, sj) * wj * fj for sj, wj, fj in zip(t, w, f)) for ti in t])
        T2 = np.array([sum(k2(ti, sj) * wj * gj for sj, wj, gj in zip(t, w, g)) for ti in t])
        n1, n2 = apply_N(ode, GridFn.zeros(grid), GridFn.zeros(grid), SignPattern())
        np.testing.assert_allclose(n1.values, ode.r1 * T1 / np.max(np.abs(T1)), atol=1e-13)
        np.testing.assert_allclose(n2.values, ode.r2 * T2 / np.max(np.abs(T2)), atol=1e-13)

    def test_illegal_sign(self, ode):
        z = GridFn.zeros(ode.grid)
        with pytest.raises(IllegalSignPattern):
            apply_N(ode, z, z, SignPattern(-1, 1))

    def test_vanishing_operator(self):
        p = ode_problem(f="0")
        z = GridFn.zeros(p.grid)
        with pytest.raises(VanishingOperator):
            apply_N(p, z, z, SignPattern())

    def test_fixed_point_gives_eigenpair(self, ode):
        res = solve_fixed_point(ode, SignPattern())
        n1, n2 = apply_N(ode, res.x0, res.y0, SignPattern())
        t1, t2 = apply_T(ode, res.x0, res.y0)
        l1 = ode.r1 / sup_norm(t1)
        assert sup_norm(n1 - res.x0) < 1e-9
        assert sup_norm(res.x0 - l1 * t1) < 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(ALL_SIGNS))
def test_apply_N_sphere_whole_space(seed, sign):
    p = whole_space_problem()
    rng = np.random.default_rng(seed)
    x = random_admissible(p.grid, p.cone1, p.r1 * rng.uniform(), rng)
    y = random_admissible(p.grid, p.cone2, p.r2 * rng.uniform(), rng)
    n1, n2 = apply_N(p, x, y, sign)
    assert abs(sup_norm(n1) - p.r1) <= 1e-14
    assert abs(sup_norm(n2) - p.r2) <= 1e-14


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(ALL_SIGNS[:2]))
def test_apply_N_sphere_ode(seed, sign):
    p = ode_problem()
    rng = np.random.default_rng(seed)
    x = random_admissible(p.grid, p.cone1, p.r1 * rng.uniform(), rng)
    y = random_admissible(p.grid, p.cone2, p.r2 * rng.uniform(), rng)
    n1, n2 = apply_N(p, x, y, sign)
    assert abs(sup_norm(n1) - p.r1) <= 1e-14
    assert abs(sup_norm(n2) - p.r2) <= 1e-14


class TestExtractEigen:
    def test_examples(self):
        g = Grid1D(3)
        assert extract_eigen(1, 1, GridFn.constant(g, 2), GridFn.constant(g, 1), SignPattern())[0] == 0.5
        assert extract_eigen(1, 3, GridFn.constant(g, 1), GridFn.constant(g, 3), SignPattern(1, -1))[1] == -1.0
        with pytest.raises(VanishingOperator):
            extract_eigen(1, 1, GridFn.zeros(g), GridFn.constant(g, 1), SignPattern())


class TestSolve:
    @pytest.mark.parametrize("sign", ["++", "+-"])
    def test_ode_example(self, sign):
        s = SignPattern.parse(sign)
        res = solve_fixed_point(ode_problem(), s)
        fine = solve_fixed_point(ode_problem(n=801), s)
        assert res.converged and res.iterations <= 500
        assert res.residual1 <= 1e-8 and res.residual2 <= 1e-8
        assert abs(sup_norm(res.x0) - 1) <= 1e-8 and abs(sup_norm(res.y0) - 1) <= 1e-8
        assert res.lambda1 > 0
        assert np.sign(res.lambda2) == s.s2
        assert abs(res.lambda1 - fine.lambda1) <= 1e-3
        assert abs(res.lambda2 - fine.lambda2) <= 1e-3

    def test_guo_sign_rejected_before_iterating(self, ode, monkeypatch):
        monkeypatch.setattr(core, "apply_N", lambda *a: pytest.fail("iterated"))
        with pytest.raises(IllegalSignPattern):
            solve_fixed_point(ode, SignPattern(-1, 1))

    @pytest.mark.parametrize("sign", ALL_SIGNS, ids=str)
    def test_whole_space_four_patterns(self, whole, sign):
        res = solve_fixed_point(whole, sign)
        assert res.converged
        assert (np.sign(res.lambda1), np.sign(res.lambda2)) == (sign.s1, sign.s2)

    def test_lambda_identity_from_returned_pair(self, ode):
        for scale in (1.0, 2.0):
            p = replace(ode, r1=ode.r1 * scale, r2=ode.r2 * scale)
            res = solve_fixed_point(p, SignPattern())
            t1, t2 = apply_T(p, res.x0, res.y0)
            assert abs(res.lambda1 - p.r1 / sup_norm(t1)) <= 1e-12 * res.lambda1
            assert abs(res.lambda2 - p.r2 / sup_norm(t2)) <= 1e-12 * res.lambda2

    def test_deterministic(self, ode):
        a = solve_fixed_point(ode, SignPattern(1, -1))
        b = solve_fixed_point(ode, SignPattern(1, -1))
        assert a.lambda1 == b.lambda1 and a.lambda2 == b.lambda2
        np.testing.assert_array_equal(a.x0.values, b.x0.values)

    def test_non_convergence_carries_result(self, ode):
        with pytest.raises(NonConvergence) as info:
            solve_fixed_point(ode, SignPattern(), SolverOptions(max_iter=2))
        res = info.value.result
        assert res is not None and not res.converged
        assert res.residual1 > 0

    def test_custom_init(self, ode):
        x = random_admissible(ode.grid, ode.cone1, ode.r1, np.random.default_rng(0))
        y = random_admissible(ode.grid, ode.cone2, ode.r2, np.random.default_rng(1))
        res = solve_fixed_point(ode, SignPattern(), SolverOptions(init=(x, y)))
        ref = solve_fixed_point(ode, SignPattern())
        assert res.lambda1 == pytest.approx(ref.lambda1, rel=1e-8)

    def test_damping_fallback_breaks_two_cycle(self, monkeypatch):
        p = whole_space_problem(r1=1.0, r2=1.0)
        n = p.grid.size
        star = np.zeros(n)
        star[0] = 1.0
        d = np.zeros(n)
        d[1:] = np.linspace(-0.5, 0.5, n - 1)
        x_star = GridFn(p.grid, star)
        # reflection through x_star: a pure 2-cycle for theta = 1, exact for theta = 1/2
        monkeypatch.setattr(core, "apply_N", lambda p, x, y, s: (2 * x_star - x, 2 * x_star - y))
        monkeypatch.setattr(core, "eigen_residuals", lambda p, x, y, s: (1.0, 1.0, 0.0, 0.0))
        start = GridFn(p.grid, star + d)
        res = solve_fixed_point(p, SignPattern(), SolverOptions(init=(start, start)))
        assert res.converged
        assert res.theta == 0.5
        np.testing.assert_allclose(res.x0.values, star, atol=1e-15)
        assert res.iterations > 20

    def test_options_validation(self):
        with pytest.raises(ValueError):
            SolverOptions(theta=0.0)
        with pytest.raises(ValueError):
            SolverOptions(tol_res=0.0)
        with pytest.raises(ValueError):
            SolverOptions(max_iter=0)
