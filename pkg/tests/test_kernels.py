import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bkeigen.domain import DiskGrid, Grid1D, GridFn
from bkeigen.exceptions import GridMismatchError, KernelError
from bkeigen.kernels import (
    DiskOperator,
    KernelId,
    assemble_operator,
    disk_green,
    disk_rule,
    integrate_1d,
    k1,
    k2,
    kernel_matrix,
    kernel_row,
    nystrom_operator,
    torsion,
    torsion_exact,
    trapezoid_rule,
)


def image_charge(x, y):
    """The textbook image-charge form, written independently of the package."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    ny = np.linalg.norm(y)
    if ny == 0.0:
        return math.log(1.0 / np.linalg.norm(x)) / (2 * math.pi)
    return math.log(ny * np.linalg.norm(x - y / ny**2) / np.linalg.norm(x - y)) / (2 * math.pi)


def random_disk_points(rng, n, rmax=0.999):
    r = rmax * np.sqrt(rng.uniform(size=n))
    a = rng.uniform(0, 2 * np.pi, n)
    return np.stack([r * np.cos(a), r * np.sin(a)], axis=1)


class TestIntervalKernels:
    def test_k1_values(self):
        assert k1(0.5, 0.25) == 0.125
        assert k1(0.25, 0.5) == 0.125
        for t in np.linspace(0, 1, 11):
            assert k1(t, 0.0) == 0.0

    def test_k2_values(self):
        for s in np.linspace(0, 1, 11):
            assert k2(1.0, s) == -0.5
        assert k2(0.0, 0.0) == 0.5
        assert k2(0.0, 0.5) == 0.0

    def test_out_of_range(self):
        with pytest.raises(KernelError):
            k1(1.1, 0.5)
        with pytest.raises(KernelError):
            k2(0.5, -0.1)

    def test_k1_continuous_and_symmetric(self):
        t = np.linspace(0, 1, 201)
        m = kernel_matrix(KernelId.K1_DIRICHLET, t, t)
        np.testing.assert_allclose(m, m.T, atol=1e-15)
        assert np.all(m >= 0)

    def test_vectorized_matches_scalar(self):
        t = np.linspace(0, 1, 21)
        for kid, fn in ((KernelId.K1_DIRICHLET, k1), (KernelId.K2_MIXED, k2)):
            m = kernel_matrix(kid, t, t)
            ref = np.array([[fn(a, b) for b in t] for a in t])
            np.testing.assert_array_equal(m, ref)

    def test_k1_guo_inequality(self):
        # k1(t, s) >= s(1 - s)/4 for t in [1/4, 3/4] on a 201 x 201 sample
        t = np.linspace(0.25, 0.75, 201)
        s = np.linspace(0, 1, 201)
        m = kernel_matrix(KernelId.K1_DIRICHLET, t, s)
        assert np.all(m >= 0.25 * s * (1 - s) - 1e-16)

    def test_k2_row_at_one(self):
        rng = np.random.default_rng(3)
        g = Grid1D(201)
        q = trapezoid_rule(g)
        row = kernel_row(KernelId.K2_MIXED, 1.0, q)
        for _ in range(20):
            gv = rng.uniform(0, 5, g.size)
            assert -row @ gv == pytest.approx(0.5 * q.integrate(gv), abs=1e-13)


class TestQuadrature:
    def test_trapezoid(self):
        g = Grid1D(101)
        q = trapezoid_rule(g)
        assert abs(q.weights.sum() - 1.0) < 1e-14
        assert integrate_1d(GridFn.constant(g, 1.0), q) == pytest.approx(1.0, abs=1e-15)
        assert integrate_1d(GridFn(g, g.nodes), q) == pytest.approx(0.5, abs=1e-15)
        # error bound h^2/12 * max|f''| = 1e-4/6
        assert abs(integrate_1d(GridFn(g, g.nodes**2), q) - 1 / 3) <= 2e-5
        with pytest.raises(GridMismatchError):
            integrate_1d(GridFn.constant(Grid1D(5), 1.0), q)

    def test_disk_weights(self):
        q = disk_rule(DiskGrid())
        assert np.all(q.weights >= 0)
        assert abs(q.weights.sum() - np.pi) < 1e-6

    @pytest.mark.parametrize(
        "kernel, closed",
        [
            (KernelId.K1_DIRICHLET, lambda t: t * (1 - t) / 2),
            (KernelId.K2_MIXED, lambda t: -(t**2) / 2),
        ],
    )
    def test_rows_against_closed_forms(self, kernel, closed):
        g = Grid1D(201)
        q = trapezoid_rule(g)
        for t in g.nodes:
            assert kernel_row(kernel, t, q) @ np.ones(g.size) == pytest.approx(closed(t), abs=1e-12)

    def test_disk_row_at_center(self):
        q = disk_rule(DiskGrid())
        row = kernel_row(KernelId.DISK_LAPLACIAN, (0.0, 0.0), q)
        assert abs(row.sum() - 0.25) < 1e-3


class TestDiskGreen:
    def test_center_value(self):
        assert disk_green((0, 0), (0.5, 0)) == pytest.approx(math.log(2) / (2 * math.pi), abs=1e-15)
        assert disk_green((0, 0), (0.5, 0)) == pytest.approx(0.1103178001, abs=1e-10)

    def test_singular(self):
        with pytest.raises(KernelError):
            disk_green((0.3, 0.1), (0.3, 0.1))
        with pytest.raises(KernelError):
            disk_green((1.2, 0), (0.1, 0))

    def test_matches_image_charge_formula(self):
        rng = np.random.default_rng(0)
        xs, ys = random_disk_points(rng, 500), random_disk_points(rng, 500)
        for x, y in zip(xs, ys):
            assert disk_green(x, y) == pytest.approx(image_charge(x, y), rel=1e-10, abs=1e-13)
        assert disk_green((0.3, 0.4), (0, 0)) == pytest.approx(image_charge((0.3, 0.4), (0, 0)), abs=1e-14)

    def test_symmetry_positivity_boundary(self):
        rng = np.random.default_rng(1)
        xs, ys = random_disk_points(rng, 1000), random_disk_points(rng, 1000)
        for x, y in zip(xs, ys):
            gxy = disk_green(x, y)
            assert abs(gxy - disk_green(y, x)) <= 1e-12
            assert gxy > 0
        angles = rng.uniform(0, 2 * np.pi, 1000)
        for a, y in zip(angles, ys):
            assert abs(disk_green((math.cos(a), math.sin(a)), y)) <= 1e-12


class TestTorsion:
    @pytest.mark.parametrize("point", [(0.0, 0.0), (0.6, 0.0), (0.3, -0.2), (0.0, 0.95)])
    def test_default_grid(self, point):
        q = disk_rule(DiskGrid())
        assert abs(torsion(point, q) - torsion_exact(point)) <= 1e-3

    def test_boundary(self):
        q = disk_rule(DiskGrid())
        for a in np.linspace(0, 2 * np.pi, 7):
            assert abs(torsion((math.cos(a), math.sin(a)), q)) <= 1e-3

    def test_center_refinement(self):
        errs = [abs(torsion((0, 0), disk_rule(DiskGrid(nr, nt))) - 0.25) for nr, nt in ((32, 64), (64, 128), (128, 256))]
        assert errs[1] <= errs[0] / 2
        assert errs[2] <= errs[1] / 2


class TestOperators:
    def test_disk_operator_matches_rows(self):
        g = DiskGrid(6, 10)
        op = DiskOperator(g)
        q = disk_rule(g)
        rows = np.array([kernel_row(KernelId.DISK_LAPLACIAN, p, q) for p in g.nodes])
        np.testing.assert_allclose(op.dense(), rows, atol=1e-15)
        phi = np.random.default_rng(2).normal(size=g.size)
        np.testing.assert_allclose(op.apply(phi), rows @ phi, atol=1e-14)

    def test_disk_operator_reproduces_torsion(self):
        g = DiskGrid()
        op = nystrom_operator(KernelId.DISK_LAPLACIAN, g)
        np.testing.assert_allclose(op.apply(np.ones(g.size)), torsion_exact(g.nodes), atol=1e-12)

    def test_disk_operator_smooth_data(self):
        # -Laplace w = 1 - |x|^2 ... w = (1 - |x|^2)(3 - |x|^2)/16 solves it with w = 0 on the circle
        g = DiskGrid()
        op = nystrom_operator(KernelId.DISK_LAPLACIAN, g)
        r2 = np.sum(g.nodes**2, axis=1)
        exact = (1 - r2) * (3 - r2) / 16
        assert np.max(np.abs(op.apply(1 - r2) - exact)) < 1e-3

    def test_cache_and_mismatch(self):
        g = Grid1D(51)
        assert nystrom_operator(KernelId.K1_DIRICHLET, g) is nystrom_operator(KernelId.K1_DIRICHLET, Grid1D(51))
        with pytest.raises(GridMismatchError):
            assemble_operator(KernelId.DISK_LAPLACIAN, g)
        with pytest.raises(GridMismatchError):
            assemble_operator(KernelId.K1_DIRICHLET, DiskGrid(4, 4))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_k2_half_integral_identity(seed):
    g = Grid1D(201)
    q = trapezoid_rule(g)
    gv = np.random.default_rng(seed).uniform(0, 3, g.size)
    row = kernel_row(KernelId.K2_MIXED, 1.0, q)
    assert abs(-row @ gv - 0.5 * q.integrate(gv)) <= 1e-13
