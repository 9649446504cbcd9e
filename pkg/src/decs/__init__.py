"""DECS: sparse weighted-DAG recovery under dense latent confounding.

The data matrix is spectrally adjusted (singular values capped at their
median) and an L1-penalized least-squares score is minimized under a smooth
acyclicity constraint. The package also ships the simulation and evaluation
harness used to exercise the method end to end.
"""

from .estimators import DECS, SpectralTrimmer
from .exceptions import (
    DecsError,
    DegenerateInputError,
    InvalidInputError,
    SingularCovarianceError,
    SolverDivergedError,
    UndefinedMetricError,
)
from .linalg import (
    SpectralTransform,
    acyclicity_gradient,
    acyclicity_value,
    thin_svd,
    trim_transform,
)
from .metrics import (
    EvalResult,
    auc_sweep,
    evaluate_weights,
    l2_loss,
    reproducibility_curve,
    shd_skeleton,
    tpr_fdr,
)
from .model import Dag, Dataset, Skeleton, WeightedAdjacency, is_acyclic, skeleton_of
from .simulate import (
    DenseGaussian,
    ErdosRenyi,
    GeneratedInstance,
    ScaleFree,
    SemSpec,
    SparseDag,
    assign_weights,
    confounding_bias,
    gen_environments,
    gen_er_dag,
    gen_sf_dag,
    remove_roots,
    sample_sem,
)
from .solver import (
    ScoreConfig,
    SolveReport,
    cross_validate_lambda,
    default_lambda,
    neighbourhood_lasso_oracle,
    score_value,
    smooth_gradient,
    solve_decs,
)

__version__ = "0.1.0"

__all__ = [
    "DECS",
    "SpectralTrimmer",
    "SpectralTransform",
    "ScoreConfig",
    "SolveReport",
    "SemSpec",
    "GeneratedInstance",
    "ErdosRenyi",
    "ScaleFree",
    "DenseGaussian",
    "SparseDag",
    "Dag",
    "Dataset",
    "Skeleton",
    "WeightedAdjacency",
    "EvalResult",
    "DecsError",
    "InvalidInputError",
    "DegenerateInputError",
    "SingularCovarianceError",
    "SolverDivergedError",
    "UndefinedMetricError",
    "thin_svd",
    "trim_transform",
    "acyclicity_value",
    "acyclicity_gradient",
    "is_acyclic",
    "skeleton_of",
    "gen_er_dag",
    "gen_sf_dag",
    "assign_weights",
    "sample_sem",
    "confounding_bias",
    "gen_environments",
    "remove_roots",
    "score_value",
    "smooth_gradient",
    "solve_decs",
    "cross_validate_lambda",
    "neighbourhood_lasso_oracle",
    "default_lambda",
    "shd_skeleton",
    "tpr_fdr",
    "auc_sweep",
    "l2_loss",
    "reproducibility_curve",
    "evaluate_weights",
    "__version__",
]
