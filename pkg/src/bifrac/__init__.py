"""bifrac: a numerical laboratory for bilinear fractional integral
operators, their multiplication commutators, Muckenhoupt weight classes,
and oscillation/compactness experiments on uniform grids."""

from .grids import (
    Cube,
    ExponentConfig,
    GridError,
    GridSpec,
    SampledFunction,
    cube_average,
    dyadic_cubes,
    load_csv,
    lq_norm,
    save_csv,
)
from .kernels import KernelParams, SingularNode, k_alpha, k_delta
from .lab import (
    CompactnessReport,
    CubeScheme,
    FkrModuli,
    SchemeError,
    SlopeFit,
    WitnessPair,
    ZeroOscillation,
    estimate_slopes,
    fkr_moduli,
    make_scheme,
    separation_experiment,
    truncation_convergence,
    witness_pair,
)
from .operators import ApplyMode, BudgetError, apply, commutator, maximal
from .oscillation import (
    OscillationReport,
    bmo_norm,
    cmo_moduli,
    mean_oscillation,
    normalize_bmo,
)
from .weights import (
    WeightPair,
    WeightReport,
    ap_constant,
    apq_constant,
    lemma1_check,
    vector_ap_constant,
    vector_apq_constant,
)

__version__ = "0.1.0"

__all__ = [
    "ApplyMode",
    "BudgetError",
    "CompactnessReport",
    "Cube",
    "CubeScheme",
    "ExponentConfig",
    "FkrModuli",
    "GridError",
    "GridSpec",
    "KernelParams",
    "OscillationReport",
    "SampledFunction",
    "SchemeError",
    "SingularNode",
    "SlopeFit",
    "WeightPair",
    "WeightReport",
    "WitnessPair",
    "ZeroOscillation",
    "ap_constant",
    "apply",
    "apq_constant",
    "bmo_norm",
    "cmo_moduli",
    "commutator",
    "cube_average",
    "dyadic_cubes",
    "estimate_slopes",
    "fkr_moduli",
    "k_alpha",
    "k_delta",
    "lemma1_check",
    "load_csv",
    "lq_norm",
    "make_scheme",
    "maximal",
    "mean_oscillation",
    "normalize_bmo",
    "save_csv",
    "separation_experiment",
    "truncation_convergence",
    "vector_ap_constant",
    "vector_apq_constant",
    "witness_pair",
]
