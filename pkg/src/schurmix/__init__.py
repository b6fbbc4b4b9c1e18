"""Exact chi-square mixture law of the scalar Schur complement in a noncentral Wishart matrix."""

__version__ = "0.1.0"

from .errors import (
    CaseError,
    ConvergenceError,
    DefinitenessError,
    DomainError,
    RankError,
    SchemaError,
    SchurMixError,
    SingularityError,
)
from .model import (
    Case,
    DerivedParams,
    GaussianMatrixSpec,
    ModelInput,
    derive_params,
    load_model,
    parse_model,
)
from .mixture import MixtureWeights, RhoLaw, mean_rho, mgf, pdf_rho, cdf_rho, pgf, weights
from .specfun import SeriesControl

__all__ = [
    "__version__",
    "Case",
    "CaseError",
    "ConvergenceError",
    "DefinitenessError",
    "DerivedParams",
    "DomainError",
    "GaussianMatrixSpec",
    "MixtureWeights",
    "ModelInput",
    "RankError",
    "RhoLaw",
    "SchemaError",
    "SchurMixError",
    "SeriesControl",
    "SingularityError",
    "cdf_rho",
    "derive_params",
    "load_model",
    "mean_rho",
    "mgf",
    "parse_model",
    "pdf_rho",
    "pgf",
    "weights",
]
