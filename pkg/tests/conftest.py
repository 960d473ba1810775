import pytest

from bkeigen.domain import ConeSpec, DiskGrid, Grid1D, HammersteinProblem
from bkeigen.exprlang import parse
from bkeigen.kernels import KernelId

ODE_F = "t*(1+u^2*v^2)"
ODE_G = "t*exp(u*v)"
PDE_F = "(1+x^2)*exp(u)*(2+cos(v))"
PDE_G = "(1+y^2)*(1+v^2)*(2+sin(u))"


def ode_problem(n=201, r1=1.0, r2=1.0, f=ODE_F, g=ODE_G):
    return HammersteinProblem(
        Grid1D(n),
        KernelId.K1_DIRICHLET,
        KernelId.K2_MIXED,
        parse(f),
        parse(g),
        r1,
        r2,
        ConeSpec.guo(),
        ConeSpec.whole_space(),
    )


def pde_problem(n_r=64, n_theta=128, r1=1.0, r2=1.0, f=PDE_F, g=PDE_G):
    return HammersteinProblem(
        DiskGrid(n_r, n_theta),
        KernelId.DISK_LAPLACIAN,
        KernelId.DISK_LAPLACIAN,
        parse(f),
        parse(g),
        r1,
        r2,
        ConeSpec.positive(),
        ConeSpec.positive(),
    )


def whole_space_problem(n=101, r1=1.0, r2=0.5):
    # strictly positive nonlinearities keep both operators away from zero
    return HammersteinProblem(
        Grid1D(n),
        KernelId.K1_DIRICHLET,
        KernelId.K2_MIXED,
        parse("1+u^2+t*v^2"),
        parse("2+sin(u*v)"),
        r1,
        r2,
        ConeSpec.whole_space(),
        ConeSpec.whole_space(),
    )


@pytest.fixture(scope="session")
def ode():
    return ode_problem()


@pytest.fixture(scope="session")
def pde():
    return pde_problem()


@pytest.fixture(scope="session")
def whole():
    return whole_space_problem()
