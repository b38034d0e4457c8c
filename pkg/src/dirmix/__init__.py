"""Transductive simplex classification with Dirichlet mixtures."""

__version__ = "0.1.0"

from .core import (
    ClassProportions,
    ContentKind,
    DirichletParams,
    FeatureSet,
    ObjectiveBreakdown,
    SoftAssignment,
    TaskInstance,
)
from .container import Manifest, read_container, write_container
from .mle import WeightedSample, fit_dirichlet, fit_dirichlet_linearized
from .solvers import SolverConfig, SolverResult, em_dirichlet, solve
from .tasks import (
    BenchmarkReport,
    FewShotProtocol,
    ZeroShotProtocol,
    evaluate_task,
    generate_synthetic_mixture,
    run_benchmark,
)

__all__ = [
    "__version__",
    "ClassProportions",
    "ContentKind",
    "DirichletParams",
    "FeatureSet",
    "ObjectiveBreakdown",
    "SoftAssignment",
    "TaskInstance",
    "Manifest",
    "read_container",
    "write_container",
    "WeightedSample",
    "fit_dirichlet",
    "fit_dirichlet_linearized",
    "SolverConfig",
    "SolverResult",
    "em_dirichlet",
    "solve",
    "BenchmarkReport",
    "FewShotProtocol",
    "ZeroShotProtocol",
    "evaluate_task",
    "generate_synthetic_mixture",
    "run_benchmark",
]
