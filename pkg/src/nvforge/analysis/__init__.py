"""Fitting engine, fit models, and the statistical procedures built on them."""

from .correlation import (
    CorrelationHistogram,
    EmitterClass,
    G2Params,
    classify_emitter_count,
    correlate,
    fit_g2,
)
from .engine import FitParameter, FitResult, finite_difference_jacobian, nlls_fit
from .fits import (
    DisplacementParams,
    EchoParams,
    Localization,
    aggregate_scans,
    fit_displacement,
    fit_echo,
    fit_lorentzian,
    fit_trpl,
    fourier_limit_linewidth,
    localize_emitter,
)
from .geometry import QuadraticMap, correct_field_distortion, fit_field_distortion
from .models import (
    MODELS,
    displacement_model,
    echo_model,
    g2_model,
    gaussian2d,
    lorentzian,
    make_trpl_model,
)
from .statistics import (
    RowStats,
    SiteClassification,
    poisson_single_probability,
    row_statistics,
    wilson_interval,
)

__all__ = [
    "CorrelationHistogram",
    "G2Params",
    "EmitterClass",
    "correlate",
    "fit_g2",
    "classify_emitter_count",
    "FitParameter",
    "FitResult",
    "nlls_fit",
    "finite_difference_jacobian",
    "DisplacementParams",
    "EchoParams",
    "Localization",
    "fit_displacement",
    "fit_lorentzian",
    "aggregate_scans",
    "fit_echo",
    "fit_trpl",
    "fourier_limit_linewidth",
    "localize_emitter",
    "QuadraticMap",
    "fit_field_distortion",
    "correct_field_distortion",
    "MODELS",
    "g2_model",
    "lorentzian",
    "echo_model",
    "displacement_model",
    "gaussian2d",
    "make_trpl_model",
    "RowStats",
    "SiteClassification",
    "row_statistics",
    "wilson_interval",
    "poisson_single_probability",
]
