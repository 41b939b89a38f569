"""Low-rank matrix recovery from dithered one-bit measurements.

The main entry points are :func:`svprka.solvers.svp_rka` (randomized
Kaczmarz with rank-r singular value projection) and the Monte Carlo
driver in :mod:`svprka.harness`.
"""

from .errors import ConfigError, NumericalError, SvdError
from .linalg import (
    rank_r_project,
    scaled_condition_number,
    svd,
    unvectorize,
    vectorize,
)
from .quantizer import (
    DitherPlan,
    OneBitRecord,
    PolyhedronRow,
    dynamic_range,
    generate_dithers,
    max_violation,
    polyhedron_row,
    quantize,
)
from .sensing import (
    GroundTruth,
    SensingEnsemble,
    apply_operator,
    assemble_V,
    generate_gaussian_ensemble,
    generate_low_rank,
)
from .solvers import (
    RkaConfig,
    SolveTrace,
    hsvt_baseline,
    lemma1_bound,
    rka_feasibility,
    svp_rka,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DitherPlan",
    "GroundTruth",
    "NumericalError",
    "OneBitRecord",
    "PolyhedronRow",
    "RkaConfig",
    "SensingEnsemble",
    "SolveTrace",
    "SvdError",
    "apply_operator",
    "assemble_V",
    "dynamic_range",
    "generate_dithers",
    "generate_gaussian_ensemble",
    "generate_low_rank",
    "hsvt_baseline",
    "lemma1_bound",
    "max_violation",
    "polyhedron_row",
    "quantize",
    "rank_r_project",
    "rka_feasibility",
    "scaled_condition_number",
    "svd",
    "svp_rka",
    "unvectorize",
    "vectorize",
]
