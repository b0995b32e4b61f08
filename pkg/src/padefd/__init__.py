"""Spectrally optimized compact finite-difference schemes.

Derivation of optimal stencil coefficients via equality-constrained
quadratic programming, modified-wavenumber analysis, Runge-Kutta
stability limits, and periodic-domain PDE benchmarks against analytical
solutions.
"""

from .stencils import (
    StencilSpec,
    SchemeCoefficients,
    ConstraintSystem,
    StencilError,
    build_constraints,
    symmetrize_check,
    delta_vector,
    max_standard_order,
    KIND_OPTIMIZED,
    KIND_STANDARD,
)
from .quadrature import (
    WeightFunction,
    CostMatrix,
    inner_product,
    build_cost_even,
    build_cost_odd,
    build_cost,
    spectral_norm,
    QuadratureError,
    DenominatorError,
)
from .optimize import (
    KktSolution,
    RankDeficiencyError,
    derive_optimized,
    derive_standard,
    mirror,
    verify_kkt,
    assemble_kkt,
)
from .spectral import (
    SpectralCurve,
    trig_vectors,
    modified_wavenumber_pow,
    error_components,
    figure_data,
)

__version__ = "0.1.0"

__all__ = [
    "StencilSpec",
    "SchemeCoefficients",
    "ConstraintSystem",
    "StencilError",
    "build_constraints",
    "symmetrize_check",
    "delta_vector",
    "max_standard_order",
    "KIND_OPTIMIZED",
    "KIND_STANDARD",
    "WeightFunction",
    "CostMatrix",
    "inner_product",
    "build_cost_even",
    "build_cost_odd",
    "build_cost",
    "spectral_norm",
    "QuadratureError",
    "DenominatorError",
    "KktSolution",
    "RankDeficiencyError",
    "derive_optimized",
    "derive_standard",
    "mirror",
    "verify_kkt",
    "assemble_kkt",
    "SpectralCurve",
    "trig_vectors",
    "modified_wavenumber_pow",
    "error_components",
    "figure_data",
    "__version__",
]
