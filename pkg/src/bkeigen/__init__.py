"""Component-wise Birkhoff-Kellogg eigenpairs for systems of Hammerstein equations.

Solve ``x = l1 T1(x, y)``, ``y = l2 T2(x, y)`` with prescribed norms
``|x| = r1``, ``|y| = r2`` by iterating a normalized auxiliary map on
discretized integral operators.
"""
from .config import RunConfig, build_problem, load_config, loads_config
from .core import (
    RetractionSpec,
    SolverOptions,
    apply_N,
    apply_T,
    extract_eigen,
    retract,
    solve_fixed_point,
)
from .domain import (
    ConeKind,
    ConeSpec,
    DiskGrid,
    EigenPairResult,
    Grid1D,
    GridFn,
    HammersteinProblem,
    SignPattern,
    axpy,
    cone_contains,
    sup_norm,
)
from .exceptions import (
    BKError,
    ConfigError,
    DegenerateRetraction,
    IllegalSignPattern,
    NonConvergence,
    VanishingOperator,
)
from .exprlang import evaluate, parse, to_source
from .kernels import KernelId, disk_green, k1, k2, torsion
from .verify import (
    HypothesisSpec,
    check_lower_bound_route,
    common_eigenvalue,
    estimate_inf_boundary,
    verify_solution,
)

__version__ = "0.1.0"
